"""DICOM-to-NIfTI converter orchestration.

Runs the external converter (dcm2niix-compatible invocation) over one session
directory, collects the per-series artifacts it produced, and normalizes
sidecar metadata into :class:`~bidsbuilder.model.SequenceParams`. A
deterministic mock converter materializes synthetic artifacts from fixture
manifests so the whole pipeline is testable without DICOM data or the
external binary.

Sidecar time fields arrive in seconds (converter convention) and are converted
to milliseconds here, in exactly one place, so the classifier never sees mixed
units.
"""

from __future__ import annotations

import base64
import gzip
import json
import re
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    ConverterFailed,
    ConverterNotFound,
    IoError,
    MalformedJson,
    NoSeriesProduced,
    SidecarError,
    Timeout,
)
from .model import SequenceParams

#: Captured converter output attached to errors is truncated to this size.
OUTPUT_CAPTURE_LIMIT = 64 * 1024

_SS_SPLIT = re.compile(r"[\\_]")


@dataclass(frozen=True)
class ConverterHandle:
    """How to run the converter: the external binary or the fixture-driven mock."""

    kind: str
    executable: str | None = None
    extra_args: tuple[str, ...] = ()
    timeout_s: float | None = None
    # Mock only: session directories are resolved beneath this root, so
    # requests may reference source paths that need not exist on disk.
    fixtures_root: Path | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("external", "mock"):
            raise ValueError(f"unknown converter kind {self.kind!r}")
        if self.kind == "external" and not self.executable:
            raise ValueError("external converter requires an executable path")
        if self.extra_args and not isinstance(self.extra_args, tuple):
            object.__setattr__(self, "extra_args", tuple(self.extra_args))

    @classmethod
    def external(
        cls,
        executable: str,
        extra_args: tuple[str, ...] = (),
        timeout_s: float | None = None,
    ) -> "ConverterHandle":
        return cls(kind="external", executable=executable, extra_args=extra_args, timeout_s=timeout_s)

    @classmethod
    def mock(cls, fixtures_root: Path | str | None = None) -> "ConverterHandle":
        root = Path(fixtures_root) if fixtures_root is not None else None
        return cls(kind="mock", fixtures_root=root)

    @property
    def identity(self) -> str:
        return self.executable if self.kind == "external" else "mock"


@dataclass(frozen=True)
class ConvertedSeries:
    """One series' converter artifacts plus its normalized sequence parameters."""

    series_name: str
    image_path: Path
    sidecar_path: Path
    bval_path: Path | None
    bvec_path: Path | None
    params: SequenceParams
    duration_s: float

    def __post_init__(self) -> None:
        if (self.bval_path is None) != (self.bvec_path is None):
            raise ValueError(
                f"series {self.series_name!r} has an unpaired gradient file; "
                ".bval and .bvec must be present together"
            )


def detect_diffusion(series: ConvertedSeries) -> bool:
    """True iff the converter emitted gradient files for this series."""
    return series.bval_path is not None and series.bvec_path is not None


def _sidecar_number(data: dict, key: str) -> float | None:
    value = data.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedJson(f"sidecar field {key!r} must be a number, got {value!r}")
    return float(value)


def _sidecar_codes(data: dict) -> tuple[str, ...] | None:
    value = data.get("ScanningSequence")
    if value is None:
        return None
    if isinstance(value, str):
        entries = [value]
    elif isinstance(value, list) and all(isinstance(v, str) for v in value):
        entries = value
    else:
        raise MalformedJson(f"ScanningSequence must be a string or list of strings, got {value!r}")
    codes = [code for entry in entries for code in _SS_SPLIT.split(entry) if code]
    return tuple(codes)


def parse_sidecar(text: str | bytes) -> SequenceParams:
    """Extract FA/IR/SS/TE/TI/TR from a converter sidecar document.

    Times are converted from the sidecar's seconds to milliseconds. The IR
    flag is derived: true iff the scanning sequence contains the ``IR`` code
    or an inversion time is present (sidecars carry no boolean IR field).
    """
    try:
        data = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as err:
        raise MalformedJson(f"sidecar is not valid JSON: {err}") from err
    if not isinstance(data, dict):
        raise MalformedJson("sidecar must be a JSON object")

    fa_deg = _sidecar_number(data, "FlipAngle")
    ss = _sidecar_codes(data)
    te_s = _sidecar_number(data, "EchoTime")
    ti_s = _sidecar_number(data, "InversionTime")
    tr_s = _sidecar_number(data, "RepetitionTime")

    te_ms = te_s * 1000.0 if te_s is not None else None
    ti_ms = ti_s * 1000.0 if ti_s is not None else None
    tr_ms = tr_s * 1000.0 if tr_s is not None else None
    ir = (ss is not None and "IR" in ss) or ti_ms is not None
    return SequenceParams(fa_deg=fa_deg, ir=ir, ss=ss, te_ms=te_ms, ti_ms=ti_ms, tr_ms=tr_ms)


def resolve_source_dir(dicom_dir: Path | str, converter: ConverterHandle) -> Path:
    """The directory actually read for *dicom_dir* under this converter."""
    dicom_dir = Path(dicom_dir)
    if converter.kind == "mock" and converter.fixtures_root is not None:
        if dicom_dir.is_absolute():
            return converter.fixtures_root.joinpath(*dicom_dir.parts[1:])
        return converter.fixtures_root / dicom_dir
    return dicom_dir


def convert_session(
    dicom_dir: Path | str,
    work_dir: Path | str,
    converter: ConverterHandle,
) -> list[ConvertedSeries]:
    """Convert one session directory, returning series ordered by name."""
    dicom_dir = Path(dicom_dir)
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    if converter.kind == "mock":
        return _convert_mock(dicom_dir, work_dir, converter)
    return _convert_external(dicom_dir, work_dir, converter)


def _collect_series(work_dir: Path, duration_s: float) -> list[ConvertedSeries]:
    series: list[ConvertedSeries] = []
    for image_path in work_dir.glob("*.nii.gz"):
        name = image_path.name[: -len(".nii.gz")]
        sidecar_path = work_dir / f"{name}.json"
        if not sidecar_path.is_file():
            raise ConverterFailed(f"converter produced {image_path.name} without a sidecar")
        bval_path = work_dir / f"{name}.bval"
        bvec_path = work_dir / f"{name}.bvec"
        has_bval = bval_path.is_file()
        has_bvec = bvec_path.is_file()
        if has_bval != has_bvec:
            raise ConverterFailed(f"converter produced an unpaired gradient file for {name!r}")
        try:
            params = parse_sidecar(sidecar_path.read_text(encoding="utf-8"))
        except (MalformedJson, SidecarError) as err:
            # A bad sidecar out of the converter is a conversion failure, not
            # a caller error.
            raise ConverterFailed(
                f"converter produced an invalid sidecar for {name!r}: {err.message}"
            ) from err
        series.append(
            ConvertedSeries(
                series_name=name,
                image_path=image_path,
                sidecar_path=sidecar_path,
                bval_path=bval_path if has_bval else None,
                bvec_path=bvec_path if has_bvec else None,
                params=params,
                duration_s=duration_s,
            )
        )
    return sorted(series, key=lambda s: s.series_name)


def build_invocation(dicom_dir: Path, work_dir: Path, converter: ConverterHandle) -> list[str]:
    """The exact argument vector used for one external conversion."""
    assert converter.executable is not None
    return [
        converter.executable,
        "-b", "y",
        "-z", "y",
        "-f", "%d_%s",
        "-o", str(work_dir),
        *converter.extra_args,
        str(dicom_dir),
    ]


def _convert_external(
    dicom_dir: Path, work_dir: Path, converter: ConverterHandle
) -> list[ConvertedSeries]:
    if not dicom_dir.is_dir():
        raise IoError(f"source directory does not exist or is not readable: {dicom_dir}")
    cmd = build_invocation(dicom_dir, work_dir, converter)
    start = time.perf_counter()
    try:
        proc = subprocess.run(
            cmd,
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            timeout=converter.timeout_s,
            check=False,
        )
    except FileNotFoundError:
        raise ConverterNotFound(f"converter executable not found: {converter.executable}") from None
    except subprocess.TimeoutExpired:
        raise Timeout(
            f"converter exceeded {converter.timeout_s}s on {dicom_dir}"
        ) from None
    elapsed = time.perf_counter() - start
    output = proc.stdout.decode("utf-8", errors="replace")[:OUTPUT_CAPTURE_LIMIT]
    if proc.returncode != 0:
        raise ConverterFailed(
            f"converter exited with code {proc.returncode} on {dicom_dir}",
            exit_code=proc.returncode,
            output=output,
        )
    series = _collect_series(work_dir, elapsed)
    if not series:
        raise NoSeriesProduced(f"converter produced no series from {dicom_dir}")
    return series


def _mock_image_bytes(series_name: str, manifest: dict) -> bytes:
    encoded = manifest.get("image_base64")
    if encoded is not None:
        return base64.b64decode(encoded)
    # mtime=0 keeps gzip output byte-stable across runs.
    return gzip.compress(f"mock-nifti:{series_name}\n".encode("utf-8"), mtime=0)


def _convert_mock(
    dicom_dir: Path, work_dir: Path, converter: ConverterHandle
) -> list[ConvertedSeries]:
    fixture_dir = resolve_source_dir(dicom_dir, converter)
    if not fixture_dir.is_dir():
        raise IoError(f"mock fixture directory does not exist: {fixture_dir}")
    manifests = sorted(fixture_dir.glob("*.json"))
    if not manifests:
        raise NoSeriesProduced(f"no fixture manifests in {fixture_dir}")

    produced: list[tuple[str, Path, dict, float]] = []
    seen: set[str] = set()
    for manifest_path in manifests:
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as err:
            raise ConverterFailed(f"fixture manifest {manifest_path.name} is not JSON: {err}")
        if not isinstance(manifest, dict):
            raise ConverterFailed(f"fixture manifest {manifest_path.name} must be an object")
        start = time.perf_counter()
        if "sleep_s" in manifest:
            time.sleep(float(manifest["sleep_s"]))
        if "fail" in manifest:
            raise ConverterFailed(
                f"mock conversion failed for {manifest_path.name}: {manifest['fail']}",
                exit_code=1,
            )
        series_name = manifest.get("series_name", manifest_path.stem)
        if series_name in seen:
            raise ConverterFailed(f"duplicate series name in fixtures: {series_name!r}")
        seen.add(series_name)

        (work_dir / f"{series_name}.nii.gz").write_bytes(_mock_image_bytes(series_name, manifest))
        sidecar = manifest.get("sidecar", {})
        (work_dir / f"{series_name}.json").write_text(
            json.dumps(sidecar, indent=2, ensure_ascii=False), encoding="utf-8"
        )
        if manifest.get("gradients", False):
            (work_dir / f"{series_name}.bval").write_text(
                manifest.get("bval", "0 1000 1000\n"), encoding="utf-8"
            )
            (work_dir / f"{series_name}.bvec").write_text(
                manifest.get("bvec", "0 1 0\n0 0 1\n1 0 0\n"), encoding="utf-8"
            )
        produced.append((series_name, manifest_path, manifest, time.perf_counter() - start))

    durations = {name: duration for name, _, _, duration in produced}
    series = _collect_series(work_dir, 0.0)
    return [
        ConvertedSeries(
            series_name=s.series_name,
            image_path=s.image_path,
            sidecar_path=s.sidecar_path,
            bval_path=s.bval_path,
            bvec_path=s.bvec_path,
            params=s.params,
            duration_s=durations.get(s.series_name, 0.0),
        )
        for s in series
    ]
