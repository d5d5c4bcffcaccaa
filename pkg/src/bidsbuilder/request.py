"""Parsing and serialization of the JSON conversion-request wire format.

This is the single wire contract shared by the create/update HTTP endpoints
and the CLI. Field names are fixed: ``scans``, ``output``, ``metadata``,
``modalities``, ``tag``, ``modality``, ``type``, ``datasetDescription``, plus
the ``overwrite`` extension controlling re-conversion on update.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import (
    BadLabel,
    EmptyScans,
    IllegalOverride,
    LabelError,
    MalformedJson,
    MissingKey,
    UnknownKey,
)
from .model import Modality, Suffix, normalize_label, pair_is_legal

_TOP_LEVEL_KEYS = {"scans", "output", "metadata", "overwrite"}
_METADATA_KEYS = {"modalities", "datasetDescription"}
_OVERRIDE_KEYS = {"tag", "modality", "type"}


@dataclass(frozen=True)
class ModalityOverride:
    """User-supplied scan typing: any series whose name contains *tag* gets this pair."""

    tag: str
    modality: Modality
    suffix: Suffix

    def __post_init__(self) -> None:
        if not self.tag:
            raise IllegalOverride("override tag must be non-empty")
        if not pair_is_legal(self.modality, self.suffix):
            raise IllegalOverride(
                f"illegal modality/type pairing: {self.modality.value}/{self.suffix.value}"
            )


@dataclass
class ConversionRequest:
    """Validated form of the request document.

    ``scans`` maps normalized subject labels to maps of normalized session
    labels to source directory paths (passed through verbatim).
    """

    scans: dict[str, dict[str, str]]
    output: str
    overrides: tuple[ModalityOverride, ...] = ()
    dataset_description: dict[str, str] = field(default_factory=dict)
    overwrite: bool = False


def _require_object(value: object, where: str) -> dict:
    if not isinstance(value, dict):
        raise MalformedJson(f"{where} must be a JSON object, got {type(value).__name__}")
    return value


def _parse_scans(raw: object) -> dict[str, dict[str, str]]:
    scans_obj = _require_object(raw, '"scans"')
    scans: dict[str, dict[str, str]] = {}
    for raw_sub, raw_sessions in scans_obj.items():
        try:
            sub = normalize_label(raw_sub)
        except LabelError as err:
            raise BadLabel(f"bad subject label: {err.message}") from err
        if sub in scans:
            raise BadLabel(f"duplicate subject label after normalization: {sub!r}")
        sessions_obj = _require_object(raw_sessions, f'"scans" entry for subject {raw_sub!r}')
        sessions: dict[str, str] = {}
        for raw_ses, raw_path in sessions_obj.items():
            try:
                ses = normalize_label(raw_ses)
            except LabelError as err:
                raise BadLabel(f"bad session label: {err.message}") from err
            if ses in sessions:
                raise BadLabel(
                    f"duplicate session label after normalization: {sub!r}/{ses!r}"
                )
            if not isinstance(raw_path, str) or not raw_path:
                raise MalformedJson(
                    f"session path for {raw_sub!r}/{raw_ses!r} must be a non-empty string"
                )
            sessions[ses] = raw_path
        scans[sub] = sessions
    return scans


def _parse_override(raw: object) -> ModalityOverride:
    obj = _require_object(raw, "override entry")
    unknown = set(obj) - _OVERRIDE_KEYS
    if unknown:
        raise IllegalOverride(f"unexpected override key {sorted(unknown)[0]!r}")
    for key in ("tag", "modality", "type"):
        if key not in obj:
            raise IllegalOverride(f"override entry is missing {key!r}")
        if not isinstance(obj[key], str):
            raise IllegalOverride(f"override {key!r} must be a string")
    try:
        modality = Modality(obj["modality"])
    except ValueError:
        raise IllegalOverride(f"unknown modality {obj['modality']!r}") from None
    try:
        suffix = Suffix(obj["type"])
    except ValueError:
        raise IllegalOverride(f"unknown type {obj['type']!r}") from None
    return ModalityOverride(tag=obj["tag"], modality=modality, suffix=suffix)


def _parse_metadata(raw: object) -> tuple[tuple[ModalityOverride, ...], dict[str, str]]:
    meta = _require_object(raw, '"metadata"')
    unknown = set(meta) - _METADATA_KEYS
    if unknown:
        raise UnknownKey(f"unknown metadata key {sorted(unknown)[0]!r}")
    overrides: tuple[ModalityOverride, ...] = ()
    if "modalities" in meta:
        if not isinstance(meta["modalities"], list):
            raise MalformedJson('"modalities" must be a JSON array')
        overrides = tuple(_parse_override(entry) for entry in meta["modalities"])
    description: dict[str, str] = {}
    if "datasetDescription" in meta:
        desc = _require_object(meta["datasetDescription"], '"datasetDescription"')
        for key, value in desc.items():
            if not isinstance(value, str):
                raise MalformedJson(f"datasetDescription value for {key!r} must be a string")
            description[key] = value
    return overrides, description


def parse_request(text: str | bytes) -> ConversionRequest:
    """Parse and validate a request document.

    Unknown top-level keys are a hard error so that typos fail loudly instead
    of silently dropping input.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as err:
            raise MalformedJson(f"request body is not valid UTF-8: {err}") from err
    try:
        document = json.loads(text)
    except json.JSONDecodeError as err:
        raise MalformedJson(f"request body is not valid JSON: {err}") from err
    document = _require_object(document, "request document")

    unknown = set(document) - _TOP_LEVEL_KEYS
    if unknown:
        raise UnknownKey(f"unknown top-level key {sorted(unknown)[0]!r}")
    for key in ("scans", "output"):
        if key not in document:
            raise MissingKey(key)

    scans = _parse_scans(document["scans"])
    output = document["output"]
    if not isinstance(output, str) or not output:
        raise MalformedJson('"output" must be a non-empty string')

    overrides: tuple[ModalityOverride, ...] = ()
    description: dict[str, str] = {}
    if "metadata" in document:
        overrides, description = _parse_metadata(document["metadata"])

    overwrite = document.get("overwrite", False)
    if not isinstance(overwrite, bool):
        raise MalformedJson('"overwrite" must be a boolean')

    if not scans and not description:
        raise EmptyScans("request has no scans and no dataset description")
    for sub, sessions in scans.items():
        if not sessions:
            raise EmptyScans(f"subject {sub!r} has no sessions")

    return ConversionRequest(
        scans=scans,
        output=output,
        overrides=overrides,
        dataset_description=description,
        overwrite=overwrite,
    )


def serialize_request(req: ConversionRequest) -> str:
    """Serialize a request so that ``parse_request`` reconstructs it exactly.

    Keys with default values are omitted; dataset description entries keep
    their insertion order.
    """
    document: dict = {
        "scans": {sub: dict(sessions) for sub, sessions in req.scans.items()},
        "output": req.output,
    }
    metadata: dict = {}
    if req.overrides:
        metadata["modalities"] = [
            {"tag": o.tag, "modality": o.modality.value, "type": o.suffix.value}
            for o in req.overrides
        ]
    if req.dataset_description:
        metadata["datasetDescription"] = dict(req.dataset_description)
    if metadata:
        document["metadata"] = metadata
    if req.overwrite:
        document["overwrite"] = True
    return json.dumps(document, indent=1, ensure_ascii=False)
