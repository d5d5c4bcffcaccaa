"""Shared fixtures: the reference request document and mock-converter corpora."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from bidsbuilder.convert import ConverterHandle

# The reference request document driving the golden wire-contract tests.
REFERENCE_REQUEST = """{
 "scans":{
  "01":{
   "01":"/path/to/DICOMs/for/sub01/ses01",
   "02":"/path/to/DICOMs/for/sub01/ses02"
   }
 },
 "output":"/path/to/store/dataset",
 "metadata":{
  "modalities":
    [{
      "tag": "scan01",
      "modality": "anat",
      "type": "T1w"
    }],
  "datasetDescription":{
   "key01":"value01",
   "key02":"value02"
   }
  }
}
"""

# Sidecar presets in converter convention (times in seconds).
SIDECARS: dict[str, dict] = {
    "t1ir": {
        "FlipAngle": 8,
        "ScanningSequence": "GR\\IR",
        "EchoTime": 0.003,
        "RepetitionTime": 2.2,
        "InversionTime": 0.9,
    },
    "t1spgr": {
        "FlipAngle": 70,
        "ScanningSequence": "GR",
        "EchoTime": 0.01,
        "RepetitionTime": 0.5,
    },
    "t2": {
        "FlipAngle": 90,
        "ScanningSequence": "SE",
        "EchoTime": 0.1,
        "RepetitionTime": 5.0,
    },
    "flair": {
        "ScanningSequence": "SE\\IR",
        "EchoTime": 0.09,
        "RepetitionTime": 9.0,
        "InversionTime": 2.5,
    },
    "bold": {
        "FlipAngle": 77,
        "ScanningSequence": "EP\\GR",
        "EchoTime": 0.03,
        "RepetitionTime": 2.0,
    },
    "dwi": {
        "FlipAngle": 90,
        "ScanningSequence": "EP\\SE",
        "EchoTime": 0.09,
        "RepetitionTime": 9.0,
    },
    "rm": {"ScanningSequence": "RM"},
}

# What the built-in table should say for each preset (without overrides).
EXPECTED_CLASSIFICATION = {
    "t1ir": ("anat", "T1w", "R3b"),
    "t1spgr": ("anat", "T1w", "R6"),
    "t2": ("anat", "T2w", "R5"),
    "flair": ("anat", "FLAIR", "R3a"),
    "bold": ("func", "bold", "R4"),
}


def write_manifest(
    fixture_dir: Path,
    name: str,
    sidecar: dict | None = None,
    gradients: bool = False,
    fail: str | None = None,
    sleep_s: float | None = None,
    series_name: str | None = None,
) -> Path:
    """Write one mock-converter fixture manifest."""
    fixture_dir.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"sidecar": sidecar if sidecar is not None else {}}
    if gradients:
        manifest["gradients"] = True
    if fail is not None:
        manifest["fail"] = fail
    if sleep_s is not None:
        manifest["sleep_s"] = sleep_s
    if series_name is not None:
        manifest["series_name"] = series_name
    path = fixture_dir / f"{name}.json"
    path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return path


def make_session(fixtures_root: Path, scan_path: str, series: dict[str, dict]) -> None:
    """Materialize manifests for one session at the fixture location of *scan_path*."""
    relative = scan_path.lstrip("/")
    session_dir = fixtures_root / relative
    for name, kwargs in series.items():
        write_manifest(session_dir, name, **kwargs)


def snapshot_tree(path: Path) -> dict[str, bytes] | None:
    """All files under *path* keyed by posix relpath, or None when absent."""
    if not path.exists():
        return None
    return {
        p.relative_to(path).as_posix(): p.read_bytes()
        for p in sorted(path.rglob("*"))
        if p.is_file()
    }


def dataset_files(root: Path) -> list[str]:
    return sorted(p.relative_to(root).as_posix() for p in root.rglob("*") if p.is_file())


def normalized_files(root: Path) -> dict[str, object]:
    """Tree contents with state-file timestamps stripped, for equivalence checks."""
    normalized: dict[str, object] = {}
    for rel, content in (snapshot_tree(root) or {}).items():
        if rel == ".bidstoolbox":
            state = json.loads(content.decode("utf-8"))
            state.pop("created_at", None)
            state.pop("updated_at", None)
            normalized[rel] = state
        else:
            normalized[rel] = content
    return normalized


def reference_request_document(output: Path) -> bytes:
    """The reference document with only the output path swapped for a local one."""
    document = json.loads(REFERENCE_REQUEST)
    document["output"] = str(output)
    return json.dumps(document).encode("utf-8")


@pytest.fixture
def fixtures_root(tmp_path: Path) -> Path:
    root = tmp_path / "fixtures"
    root.mkdir()
    return root


@pytest.fixture
def mock_converter(fixtures_root: Path) -> ConverterHandle:
    return ConverterHandle.mock(fixtures_root)


@pytest.fixture
def reference_fixtures(fixtures_root: Path) -> Path:
    """Fixture corpus matching the reference document's two sessions."""
    make_session(
        fixtures_root,
        "/path/to/DICOMs/for/sub01/ses01",
        {"scan01_mprage": {"sidecar": SIDECARS["t1ir"]}},
    )
    make_session(
        fixtures_root,
        "/path/to/DICOMs/for/sub01/ses02",
        {"scan02_diff": {"sidecar": SIDECARS["dwi"], "gradients": True}},
    )
    return fixtures_root
