"""Shared vocabulary for dataset building: labels, modalities, classification outcomes."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum

from .errors import BadFlipAngle, EmptyLabel, IllegalCharacter, NegativeTime

_INPUT_CHARSET = re.compile(r"[A-Za-z0-9-]+")
_LABEL_CHARSET = re.compile(r"[A-Za-z0-9]+")
_LABEL_PREFIXES = ("sub-", "ses-")


class Modality(str, Enum):
    """Modality directory a series is filed under."""

    ANAT = "anat"
    FUNC = "func"
    DWI = "dwi"
    # Reserved for field maps; no built-in classifier rule emits it.
    FMAP = "fmap"


class Suffix(str, Enum):
    """Type label carried in a data file name."""

    T1W = "T1w"
    T2W = "T2w"
    FLAIR = "FLAIR"
    BOLD = "bold"
    DWI = "dwi"


#: The single modality each suffix is allowed to live under.
SUFFIX_HOME: dict[Suffix, Modality] = {
    Suffix.T1W: Modality.ANAT,
    Suffix.T2W: Modality.ANAT,
    Suffix.FLAIR: Modality.ANAT,
    Suffix.BOLD: Modality.FUNC,
    Suffix.DWI: Modality.DWI,
}


def pair_is_legal(modality: Modality, suffix: Suffix) -> bool:
    """True iff *suffix* may appear under *modality*."""
    return SUFFIX_HOME.get(suffix) is modality


def normalize_label(raw: str) -> str:
    """Normalize a subject or session label.

    Strips one leading ``sub-``/``ses-`` prefix and enforces the alphanumeric
    label charset. Idempotent over its own output.
    """
    if not raw:
        raise EmptyLabel("label is empty")
    if not _INPUT_CHARSET.fullmatch(raw):
        raise IllegalCharacter(f"label {raw!r} contains characters outside [A-Za-z0-9-]")
    value = raw
    for prefix in _LABEL_PREFIXES:
        if value.startswith(prefix):
            value = value[len(prefix):]
            break
    if not value:
        raise EmptyLabel(f"label {raw!r} is empty after prefix removal")
    if not _LABEL_CHARSET.fullmatch(value):
        raise IllegalCharacter(
            f"label {raw!r} may contain a hyphen only as part of a sub-/ses- prefix"
        )
    return value


@dataclass(frozen=True)
class Classification:
    """A (modality, suffix) verdict plus the id of the rule that produced it."""

    modality: Modality
    suffix: Suffix
    rule_id: str

    def __post_init__(self) -> None:
        if not pair_is_legal(self.modality, self.suffix):
            raise ValueError(
                f"illegal modality/suffix pairing: {self.modality.value}/{self.suffix.value}"
            )


@dataclass(frozen=True)
class UnclassifiableSeries:
    """A converted series the decision table could not place."""

    series_name: str
    reason: str

    def __post_init__(self) -> None:
        if not self.series_name:
            raise ValueError("series_name must be non-empty")


def _check_time(name: str, value: float | None) -> None:
    if value is None:
        return
    if not math.isfinite(value) or value <= 0:
        raise NegativeTime(f"{name} must be a positive finite number of milliseconds, got {value!r}")


@dataclass(frozen=True)
class SequenceParams:
    """MR sequence parameters for one converted series.

    All time values are in milliseconds. ``ir`` is true when the acquisition
    used inversion recovery (an IR scanning-sequence code or an inversion time).
    """

    fa_deg: float | None = None
    ir: bool = False
    ss: tuple[str, ...] | None = None
    te_ms: float | None = None
    ti_ms: float | None = None
    tr_ms: float | None = None

    def __post_init__(self) -> None:
        if self.ss is not None and not isinstance(self.ss, tuple):
            object.__setattr__(self, "ss", tuple(self.ss))
        if self.fa_deg is not None and not (
            math.isfinite(self.fa_deg) and 0 < self.fa_deg <= 180
        ):
            raise BadFlipAngle(f"flip angle must be in (0, 180] degrees, got {self.fa_deg!r}")
        _check_time("te_ms", self.te_ms)
        _check_time("ti_ms", self.ti_ms)
        _check_time("tr_ms", self.tr_ms)
