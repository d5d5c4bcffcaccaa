"""Build and update BIDS neuroimaging dataset trees from raw DICOM series.

The library converts each session directory with an external DICOM-to-NIfTI
converter (or a deterministic mock), infers every series' scan type from its
MR sequence parameters unless the request overrides it, lays the artifacts out
as a BIDS tree, and commits atomically. The same operations are exposed over
HTTP (``bidsbuilder serve``) and the ``bidsbuilder`` CLI.
"""

from ._version import __version__
from .classify import DecisionRule, classify_params, classify_series, decision_table, load_decision_table
from .convert import ConvertedSeries, ConverterHandle, convert_session, detect_diffusion, parse_sidecar
from .dataset import DatasetReport, bids_path, create_dataset, update_dataset
from .model import (
    Classification,
    Modality,
    SequenceParams,
    Suffix,
    UnclassifiableSeries,
    normalize_label,
    pair_is_legal,
)
from .request import ConversionRequest, ModalityOverride, parse_request, serialize_request
from .service import ServiceConfig, create_app
from .state import SeriesRecord, ToolboxState, read_state, write_state
from .validate import Violation, ViolationCode, validate_layout

__all__ = [
    "__version__",
    "Classification",
    "ConversionRequest",
    "ConvertedSeries",
    "ConverterHandle",
    "DatasetReport",
    "DecisionRule",
    "Modality",
    "ModalityOverride",
    "SequenceParams",
    "SeriesRecord",
    "ServiceConfig",
    "Suffix",
    "ToolboxState",
    "UnclassifiableSeries",
    "Violation",
    "ViolationCode",
    "bids_path",
    "classify_params",
    "classify_series",
    "convert_session",
    "create_app",
    "create_dataset",
    "decision_table",
    "detect_diffusion",
    "load_decision_table",
    "normalize_label",
    "pair_is_legal",
    "parse_request",
    "parse_sidecar",
    "read_state",
    "serialize_request",
    "update_dataset",
    "validate_layout",
    "write_state",
]
