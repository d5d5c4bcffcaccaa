"""The hidden dataset state file recording what the builder has placed where.

The file lives at ``<dataset>/.bidstoolbox`` and is what makes incremental
updates possible: it lists every (subject, session) already converted, the
series each contributed, and a content hash of the source directory for
provenance. Writes are atomic (temp file + rename) and subject/session keys
are serialized sorted so equal datasets produce byte-equal state files.
"""

from __future__ import annotations

import json
import os
import secrets
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import MalformedState, StateFileMissing, StateVersionUnsupported
from .model import Classification, Modality, Suffix

STATE_FILENAME = ".bidstoolbox"
LOCK_FILENAME = ".bidstoolbox.lock"
STATE_FORMAT_VERSION = 1


def utc_now() -> str:
    """Current time as an ISO-8601 UTC timestamp with a Z suffix."""
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


@dataclass(frozen=True)
class SeriesRecord:
    """One converted series as recorded in the state file."""

    series_name: str
    classification: Classification
    destination: str
    source_hash: str

    def to_dict(self) -> dict:
        return {
            "series_name": self.series_name,
            "modality": self.classification.modality.value,
            "suffix": self.classification.suffix.value,
            "rule_id": self.classification.rule_id,
            "destination": self.destination,
            "source_hash": self.source_hash,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SeriesRecord":
        try:
            classification = Classification(
                Modality(data["modality"]), Suffix(data["suffix"]), data["rule_id"]
            )
            return cls(
                series_name=data["series_name"],
                classification=classification,
                destination=data["destination"],
                source_hash=data["source_hash"],
            )
        except (KeyError, ValueError, TypeError) as err:
            raise MalformedState(f"bad series record in state file: {err}") from err


@dataclass
class ToolboxState:
    """Contents of the hidden state file."""

    created_at: str
    updated_at: str
    converter: str
    entries: dict[str, dict[str, list[SeriesRecord]]] = field(default_factory=dict)
    format_version: int = STATE_FORMAT_VERSION

    def has_session(self, sub: str, ses: str) -> bool:
        return ses in self.entries.get(sub, {})

    def sessions(self) -> list[tuple[str, str]]:
        return [(sub, ses) for sub in self.entries for ses in self.entries[sub]]

    def records(self) -> list[SeriesRecord]:
        return [
            record
            for sub in self.entries
            for ses in self.entries[sub]
            for record in self.entries[sub][ses]
        ]

    def put_session(self, sub: str, ses: str, records: list[SeriesRecord]) -> None:
        self.entries.setdefault(sub, {})[ses] = list(records)

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "converter": self.converter,
            "entries": {
                sub: {
                    ses: [record.to_dict() for record in self.entries[sub][ses]]
                    for ses in sorted(self.entries[sub])
                }
                for sub in sorted(self.entries)
            },
        }


def _state_from_dict(data: dict) -> ToolboxState:
    if not isinstance(data, dict):
        raise MalformedState("state file must hold a JSON object")
    version = data.get("format_version")
    if version != STATE_FORMAT_VERSION:
        raise StateVersionUnsupported(
            f"state format_version {version!r} is not supported (expected {STATE_FORMAT_VERSION})"
        )
    entries_raw = data.get("entries")
    if not isinstance(entries_raw, dict):
        raise MalformedState("state file has no entries map")
    entries: dict[str, dict[str, list[SeriesRecord]]] = {}
    for sub, sessions in entries_raw.items():
        if not isinstance(sessions, dict):
            raise MalformedState(f"state entries for subject {sub!r} must be an object")
        entries[sub] = {}
        for ses, records in sessions.items():
            if not isinstance(records, list):
                raise MalformedState(f"state records for {sub!r}/{ses!r} must be a list")
            entries[sub][ses] = [SeriesRecord.from_dict(r) for r in records]
    try:
        return ToolboxState(
            created_at=data["created_at"],
            updated_at=data["updated_at"],
            converter=data["converter"],
            entries=entries,
        )
    except KeyError as err:
        raise MalformedState(f"state file is missing {err.args[0]!r}") from err


def state_path(dataset_root: Path | str) -> Path:
    return Path(dataset_root) / STATE_FILENAME


def read_state(dataset_root: Path | str) -> ToolboxState:
    path = state_path(dataset_root)
    if not path.is_file():
        raise StateFileMissing(f"{path} does not exist; not a managed dataset")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as err:
        raise MalformedState(f"state file is not valid JSON: {err}") from err
    return _state_from_dict(data)


def dump_state(state: ToolboxState) -> str:
    return json.dumps(state.to_dict(), indent=2, ensure_ascii=False) + "\n"


def write_state(dataset_root: Path | str, state: ToolboxState) -> None:
    """Atomically replace the state file (temp file + rename)."""
    target = state_path(dataset_root)
    temp = target.with_name(f"{STATE_FILENAME}.tmp-{secrets.token_hex(4)}")
    temp.write_text(dump_state(state), encoding="utf-8")
    os.replace(temp, target)
