"""Scan-type detection: first-match evaluation of an ordered decision table.

The pipeline is: user overrides first (tag matched case-insensitively as a
substring of the series name), then the gradient-file diffusion shortcut,
then sequence-parameter rules. A terminal catch-all guarantees every series
gets either a classification or an unclassifiable outcome, never an exception.

The built-in table is data, not code; an alternative table with tuned
thresholds can be loaded from a JSON file (see :func:`load_decision_table`).
"""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .convert import ConvertedSeries, detect_diffusion
from .model import Classification, Modality, SequenceParams, Suffix, UnclassifiableSeries, pair_is_legal
from .request import ModalityOverride

_RANGE_KEYS = ("fa_deg", "te_ms", "ti_ms", "tr_ms")
_CONDITION_KEYS = frozenset(_RANGE_KEYS) | {"gradients", "ss_contains", "inversion"}


@dataclass(frozen=True)
class DecisionRule:
    """One row of the table: conditions plus either a classification or a rejection.

    Condition keys:

    - ``gradients``: bool — matches when gradient-file presence equals the value.
    - ``ss_contains``: str — the scanning-sequence list contains this code.
    - ``inversion``: true — the IR flag is set or an inversion time is present.
    - ``fa_deg``/``te_ms``/``ti_ms``/``tr_ms``: ``(lo, hi)`` inclusive range,
      either end open when ``None``; never matches when the parameter is absent.
    """

    rule_id: str
    predicate: str
    conditions: Mapping[str, object] = field(default_factory=dict)
    modality: Modality | None = None
    suffix: Suffix | None = None
    reason: str | None = None

    def __post_init__(self) -> None:
        classifies = self.modality is not None and self.suffix is not None
        rejects = self.reason is not None
        if classifies == rejects:
            raise ValueError(f"rule {self.rule_id!r} must either classify or reject")
        if classifies and not pair_is_legal(self.modality, self.suffix):  # type: ignore[arg-type]
            raise ValueError(f"rule {self.rule_id!r} has an illegal modality/suffix pairing")
        unknown = set(self.conditions) - _CONDITION_KEYS
        if unknown:
            raise ValueError(f"rule {self.rule_id!r} has unknown condition {sorted(unknown)[0]!r}")


DEFAULT_RULES: tuple[DecisionRule, ...] = (
    DecisionRule(
        "diffusion-files",
        "converter emitted .bval and .bvec gradient files",
        {"gradients": True},
        modality=Modality.DWI,
        suffix=Suffix.DWI,
    ),
    DecisionRule(
        "R2",
        "scanning sequence contains RM (research mode)",
        {"ss_contains": "RM"},
        reason="research mode",
    ),
    DecisionRule(
        "R3a",
        "inversion recovery with TI in [1800, 3200] ms and TE >= 80 ms",
        {"inversion": True, "ti_ms": (1800.0, 3200.0), "te_ms": (80.0, None)},
        modality=Modality.ANAT,
        suffix=Suffix.FLAIR,
    ),
    DecisionRule(
        "R3b",
        "inversion recovery with TI in [400, 1400] ms",
        {"inversion": True, "ti_ms": (400.0, 1400.0)},
        modality=Modality.ANAT,
        suffix=Suffix.T1W,
    ),
    DecisionRule(
        "R3c",
        "inversion recovery outside the T1w/FLAIR TI windows",
        {"inversion": True},
        reason="ambiguous inversion recovery",
    ),
    DecisionRule(
        "R4",
        "echo-planar sequence with TR in [300, 5000] ms and TE in [20, 60] ms",
        {"ss_contains": "EP", "tr_ms": (300.0, 5000.0), "te_ms": (20.0, 60.0)},
        modality=Modality.FUNC,
        suffix=Suffix.BOLD,
    ),
    DecisionRule(
        "R5",
        "TE >= 80 ms and TR >= 2000 ms",
        {"te_ms": (80.0, None), "tr_ms": (2000.0, None)},
        modality=Modality.ANAT,
        suffix=Suffix.T2W,
    ),
    DecisionRule(
        "R6",
        "TE <= 30 ms, TR <= 800 ms and flip angle >= 50 degrees",
        {"te_ms": (None, 30.0), "tr_ms": (None, 800.0), "fa_deg": (50.0, None)},
        modality=Modality.ANAT,
        suffix=Suffix.T1W,
    ),
    DecisionRule("R7", "no condition matched", {}, reason="no rule matched"),
)


def decision_table() -> tuple[DecisionRule, ...]:
    """The built-in rules, in evaluation order."""
    return DEFAULT_RULES


def _in_range(value: float | None, bounds: object) -> bool:
    if value is None:
        return False
    lo, hi = bounds  # type: ignore[misc]
    if lo is not None and value < lo:
        return False
    if hi is not None and value > hi:
        return False
    return True


def rule_matches(rule: DecisionRule, params: SequenceParams, has_gradients: bool) -> bool:
    """Evaluate one rule; conditions on absent parameters never match."""
    for key, expected in rule.conditions.items():
        if key == "gradients":
            if has_gradients != expected:
                return False
        elif key == "ss_contains":
            if params.ss is None or expected not in params.ss:
                return False
        elif key == "inversion":
            inverted = params.ir or params.ti_ms is not None
            if inverted != expected:
                return False
        else:
            value = getattr(params, key)
            if not _in_range(value, expected):
                return False
    return True


def classify_params(
    params: SequenceParams,
    has_gradients: bool,
    series_name: str,
    overrides: Sequence[ModalityOverride] = (),
    rules: Sequence[DecisionRule] | None = None,
) -> Classification | UnclassifiableSeries:
    """Classify from raw inputs; see :func:`classify_series` for the series form."""
    for override in overrides:
        if override.tag.lower() in series_name.lower():
            return Classification(override.modality, override.suffix, "override")
    for rule in rules if rules is not None else DEFAULT_RULES:
        if rule_matches(rule, params, has_gradients):
            if rule.reason is not None:
                return UnclassifiableSeries(series_name=series_name, reason=rule.reason)
            return Classification(rule.modality, rule.suffix, rule.rule_id)  # type: ignore[arg-type]
    # Custom tables are validated to end in a catch-all, but stay total regardless.
    return UnclassifiableSeries(series_name=series_name, reason="no rule matched")


def classify_series(
    series: ConvertedSeries,
    overrides: Sequence[ModalityOverride] = (),
    rules: Sequence[DecisionRule] | None = None,
) -> Classification | UnclassifiableSeries:
    """Classify one converted series.

    A matching override wins unconditionally (first override in request order
    on ties) and reports ``rule_id="override"``; otherwise gradient files make
    the series diffusion, then the parameter rules apply in order.
    """
    return classify_params(
        series.params, detect_diffusion(series), series.series_name, overrides, rules
    )


def _rule_from_config(entry: dict, index: int) -> DecisionRule:
    if not isinstance(entry, dict):
        raise ValueError(f"rule #{index} must be an object")
    rule_id = entry.get("rule_id")
    if not isinstance(rule_id, str) or not rule_id:
        raise ValueError(f"rule #{index} needs a non-empty string rule_id")
    conditions_raw = entry.get("conditions", {})
    if not isinstance(conditions_raw, dict):
        raise ValueError(f"rule {rule_id!r}: conditions must be an object")
    conditions: dict[str, object] = {}
    for key, value in conditions_raw.items():
        if key in _RANGE_KEYS:
            if not isinstance(value, list) or len(value) != 2:
                raise ValueError(f"rule {rule_id!r}: {key} must be a [lo, hi] pair")
            conditions[key] = (value[0], value[1])
        else:
            conditions[key] = value
    result = entry.get("result")
    if not isinstance(result, dict):
        raise ValueError(f"rule {rule_id!r} needs a result object")
    predicate = entry.get("predicate", "")
    if "reason" in result:
        return DecisionRule(rule_id, predicate, conditions, reason=result["reason"])
    try:
        modality = Modality(result.get("modality"))
        suffix = Suffix(result.get("type"))
    except ValueError as err:
        raise ValueError(f"rule {rule_id!r}: {err}") from None
    return DecisionRule(rule_id, predicate, conditions, modality=modality, suffix=suffix)


def load_decision_table(path: Path | str) -> tuple[DecisionRule, ...]:
    """Load an alternative decision table from a JSON rule list.

    The list must be non-empty, rule ids unique, and the final rule an
    unconditional catch-all so the table stays total.
    """
    entries = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(entries, list) or not entries:
        raise ValueError("decision table file must be a non-empty JSON array")
    rules = tuple(_rule_from_config(entry, i) for i, entry in enumerate(entries))
    ids = [rule.rule_id for rule in rules]
    if len(set(ids)) != len(ids):
        raise ValueError("decision table has duplicate rule ids")
    if rules[-1].conditions:
        raise ValueError("the final rule must be an unconditional catch-all")
    return rules
