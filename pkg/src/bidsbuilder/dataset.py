"""Create/update orchestration: convert, classify, plan paths, commit atomically.

All conversion output and new files are staged in a sibling directory of the
dataset (``<output>.staging-<token>``). Failures before commit delete the
staging area and leave the output path bit-identical to its prior contents.
The hidden state file is always (re)written last, so a crash mid-commit can
leave extra data files but never an inconsistent state.

Mutations on one dataset are serialized by an exclusive lock file inside the
dataset; a second mutator fails fast with ``Busy`` instead of queueing.
"""

from __future__ import annotations

import hashlib
import json
import os
import secrets
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .classify import DecisionRule, classify_series
from .convert import ConvertedSeries, ConverterHandle, convert_session, resolve_source_dir
from .errors import (
    Busy,
    ClassificationFailed,
    EmptyScans,
    IoError,
    OutputNotEmpty,
    SessionConflict,
    StateFileMissing,
    Timeout,
)
from .model import Classification, Modality, UnclassifiableSeries
from .request import ConversionRequest, ModalityOverride
from .state import (
    LOCK_FILENAME,
    STATE_FILENAME,
    SeriesRecord,
    ToolboxState,
    read_state,
    utc_now,
    write_state,
)
from .validate import validate_layout

DESCRIPTION_FILENAME = "dataset_description.json"
DEFAULT_BIDS_VERSION = "1.2.0"
IMAGE_EXTENSION = ".nii.gz"
_EXTENSIONS = (".nii.gz", ".json", ".bval", ".bvec")


def bids_path(
    sub: str,
    ses: str,
    cls: Classification,
    run: int | None = None,
    extension: str = IMAGE_EXTENSION,
) -> str:
    """Relative dataset path for one artifact of a classified series."""
    if extension not in _EXTENSIONS:
        raise ValueError(f"unsupported extension {extension!r}")
    if run is not None and run < 1:
        raise ValueError(f"run index must be positive, got {run}")
    run_part = f"_run-{run}" if run is not None else ""
    name = f"sub-{sub}_ses-{ses}{run_part}_{cls.suffix.value}{extension}"
    return f"sub-{sub}/ses-{ses}/{cls.modality.value}/{name}"


@dataclass(frozen=True)
class SeriesClassification:
    """Per-series classification line for reports."""

    series_name: str
    modality: str
    suffix: str
    rule_id: str

    def to_dict(self) -> dict:
        return {
            "series_name": self.series_name,
            "modality": self.modality,
            "suffix": self.suffix,
            "rule_id": self.rule_id,
        }


@dataclass
class DatasetReport:
    """Outcome of one create/update operation."""

    status: str
    dataset_path: str
    subjects: int
    sessions: int
    series: int
    classifications: list[SeriesClassification]
    total_s: float
    converter_s: float
    failures: list[UnclassifiableSeries] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.status not in ("created", "updated", "failed"):
            raise ValueError(f"unknown report status {self.status!r}")
        if self.converter_s > self.total_s:
            raise ValueError("converter_s cannot exceed total_s")
        if (self.status == "failed") != bool(self.failures):
            raise ValueError("status is 'failed' iff failures are present")

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "dataset_path": self.dataset_path,
            "subjects": self.subjects,
            "sessions": self.sessions,
            "series": self.series,
            "classifications": [c.to_dict() for c in self.classifications],
            "timing": {"total_s": self.total_s, "converter_s": self.converter_s},
            "failures": [
                {"series_name": f.series_name, "reason": f.reason} for f in self.failures
            ],
        }


# --- locking -----------------------------------------------------------------


@dataclass
class _DatasetLock:
    output: Path
    lock_path: Path
    created_dir: bool


def _acquire_lock(output: Path, create_missing: bool) -> _DatasetLock:
    created_dir = False
    if not output.exists():
        if not create_missing:
            raise StateFileMissing(f"dataset directory does not exist: {output}")
        try:
            output.mkdir(parents=True)
            created_dir = True
        except FileExistsError:
            pass
    elif not output.is_dir():
        raise OutputNotEmpty(f"output path exists and is not a directory: {output}")
    lock_path = output / LOCK_FILENAME
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
    except FileExistsError:
        raise Busy(f"another operation holds the dataset lock: {lock_path}") from None
    with os.fdopen(fd, "w") as handle:
        handle.write(str(os.getpid()))
    return _DatasetLock(output=output, lock_path=lock_path, created_dir=created_dir)


def _release_lock(lock: _DatasetLock, failed: bool) -> None:
    lock.lock_path.unlink(missing_ok=True)
    if failed and lock.created_dir:
        # Restore prior nonexistence when the failed operation created the dir.
        try:
            lock.output.rmdir()
        except OSError:
            pass


def _make_staging(output: Path) -> Path:
    staging = output.parent / f"{output.name}.staging-{secrets.token_hex(4)}"
    staging.mkdir(parents=True)
    return staging


# --- conversion and classification -------------------------------------------


@dataclass
class _ClassifiedSession:
    sub: str
    ses: str
    source_hash: str
    pairs: list[tuple[ConvertedSeries, Classification]]


def _hash_source_dir(path: Path) -> str:
    """Order-independent hash of relative file names and sizes (cheap provenance)."""
    lines: list[str] = []
    if path.is_dir():
        for entry in path.rglob("*"):
            if entry.is_file():
                lines.append(f"{entry.relative_to(path).as_posix()}:{entry.stat().st_size}")
    digest = hashlib.sha256()
    for line in sorted(lines):
        digest.update(line.encode("utf-8"))
        digest.update(b"\n")
    return f"sha256:{digest.hexdigest()}"


def _check_deadline(deadline: float | None) -> None:
    if deadline is not None and time.perf_counter() > deadline:
        raise Timeout("operation exceeded the configured request timeout")


def _convert_all(
    req: ConversionRequest,
    converter: ConverterHandle,
    work_root: Path,
    parallelism: int,
    deadline: float | None,
) -> tuple[list[tuple[str, str, str, list[ConvertedSeries]]], float]:
    """Convert every requested session; returns results plus conversion wall time."""
    jobs = [
        (sub, ses, source)
        for sub, sessions in req.scans.items()
        for ses, source in sessions.items()
    ]

    def run(job: tuple[str, str, str]) -> tuple[str, str, str, list[ConvertedSeries]]:
        sub, ses, source = job
        work_dir = work_root / f"sub-{sub}" / f"ses-{ses}"
        series = convert_session(source, work_dir, converter)
        return (sub, ses, source, series)

    start = time.perf_counter()
    if parallelism <= 1:
        results = []
        for job in jobs:
            _check_deadline(deadline)
            results.append(run(job))
    else:
        _check_deadline(deadline)
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(run, jobs))
    return results, time.perf_counter() - start


def _classify_all(
    conversions: list[tuple[str, str, str, list[ConvertedSeries]]],
    overrides: tuple[ModalityOverride, ...],
    converter: ConverterHandle,
    rules: tuple[DecisionRule, ...] | None,
) -> list[_ClassifiedSession]:
    """Classify every converted series; raises with the complete failure list."""
    failures: list[UnclassifiableSeries] = []
    sessions: list[_ClassifiedSession] = []
    for sub, ses, source, series_list in conversions:
        source_hash = _hash_source_dir(resolve_source_dir(source, converter))
        pairs: list[tuple[ConvertedSeries, Classification]] = []
        for series in series_list:
            outcome = classify_series(series, overrides, rules)
            if isinstance(outcome, UnclassifiableSeries):
                failures.append(outcome)
            else:
                pairs.append((series, outcome))
        sessions.append(_ClassifiedSession(sub, ses, source_hash, pairs))
    if failures:
        raise ClassificationFailed(failures)
    return sessions


# --- planning and materialization ---------------------------------------------


def _plan_session(
    session: _ClassifiedSession, tree: Path
) -> tuple[list[SeriesRecord], list[SeriesClassification]]:
    """Assign run indices within (modality, suffix) groups and stage the artifacts.

    Series were converted in name order, so run indices follow series_name;
    a group of one carries no run entity.
    """
    groups: dict[tuple[Modality, str], list[tuple[ConvertedSeries, Classification]]] = {}
    for series, cls in session.pairs:
        groups.setdefault((cls.modality, cls.suffix.value), []).append((series, cls))

    records: list[SeriesRecord] = []
    reported: list[SeriesClassification] = []
    for members in groups.values():
        for index, (series, cls) in enumerate(members, start=1):
            run = index if len(members) > 1 else None
            image_rel = bids_path(session.sub, session.ses, cls, run, IMAGE_EXTENSION)
            moves = [
                (series.image_path, image_rel),
                (series.sidecar_path, bids_path(session.sub, session.ses, cls, run, ".json")),
            ]
            # Gradient files belong only under dwi; an override forcing another
            # modality drops them from the layout.
            if cls.modality is Modality.DWI and series.bval_path is not None:
                moves.append((series.bval_path, bids_path(session.sub, session.ses, cls, run, ".bval")))
                moves.append((series.bvec_path, bids_path(session.sub, session.ses, cls, run, ".bvec")))
            for source, rel in moves:
                target = tree / rel
                target.parent.mkdir(parents=True, exist_ok=True)
                os.replace(source, target)
            records.append(
                SeriesRecord(series.series_name, cls, image_rel, session.source_hash)
            )
            reported.append(
                SeriesClassification(
                    series.series_name, cls.modality.value, cls.suffix.value, cls.rule_id
                )
            )
    return records, reported


def _dump_description(description: dict[str, str]) -> str:
    return json.dumps(description, indent=2, ensure_ascii=False) + "\n"


def _build_description(req: ConversionRequest, output: Path) -> dict[str, str]:
    """Request entries in insertion order, with required keys injected first when absent."""
    description: dict[str, str] = {}
    if "Name" not in req.dataset_description:
        description["Name"] = output.name
    if "BIDSVersion" not in req.dataset_description:
        description["BIDSVersion"] = DEFAULT_BIDS_VERSION
    description.update(req.dataset_description)
    return description


def _write_text_atomic(target: Path, content: str) -> None:
    temp = target.with_name(f"{target.name}.tmp-{secrets.token_hex(4)}")
    temp.write_text(content, encoding="utf-8")
    os.replace(temp, target)


def _series_artifacts(image_rel: str) -> list[str]:
    stem = image_rel[: -len(IMAGE_EXTENSION)]
    return [image_rel, f"{stem}.json", f"{stem}.bval", f"{stem}.bvec"]


def _prune_empty_dirs(root: Path, removed_rel_paths: list[str]) -> None:
    for rel in removed_rel_paths:
        current = (root / rel).parent
        while current != root:
            try:
                current.rmdir()
            except OSError:
                break
            current = current.parent


def _post_commit_check(output: Path) -> None:
    violations = validate_layout(output)
    if violations:
        summary = "; ".join(f"{v.path}: {v.message}" for v in violations)
        raise IoError(f"post-commit validation failed: {summary}")


# --- create -------------------------------------------------------------------


def create_dataset(
    req: ConversionRequest,
    converter: ConverterHandle,
    parallelism: int = 1,
    timeout_s: float | None = None,
    rules: tuple[DecisionRule, ...] | None = None,
) -> DatasetReport:
    """Build a new dataset at ``req.output`` from scratch.

    The output path must be absent or an empty directory. On any failure the
    prior contents of the output path are left bit-identical.
    """
    start = time.perf_counter()
    deadline = start + timeout_s if timeout_s is not None else None
    if not req.scans:
        raise EmptyScans("create requires at least one subject with scans")

    output = Path(req.output)
    lock = _acquire_lock(output, create_missing=True)
    failed = True
    staging: Path | None = None
    try:
        existing = [p for p in output.iterdir() if p.name != LOCK_FILENAME]
        if existing:
            raise OutputNotEmpty(f"output directory is not empty: {output}")
        staging = _make_staging(output)
        conversions, converter_s = _convert_all(
            req, converter, staging / "work", parallelism, deadline
        )
        sessions = _classify_all(conversions, req.overrides, converter, rules)

        tree = staging / "tree"
        tree.mkdir()
        timestamp = utc_now()
        state = ToolboxState(
            created_at=timestamp, updated_at=timestamp, converter=converter.identity
        )
        classifications: list[SeriesClassification] = []
        series_count = 0
        for session in sessions:
            records, reported = _plan_session(session, tree)
            state.put_session(session.sub, session.ses, records)
            classifications.extend(reported)
            series_count += len(records)
        (tree / DESCRIPTION_FILENAME).write_text(
            _dump_description(_build_description(req, output)), encoding="utf-8"
        )

        # Commit: the staged tree moves in whole entries; state is written last.
        for child in sorted(tree.iterdir(), key=lambda p: p.name):
            os.rename(child, output / child.name)
        write_state(output, state)
        _post_commit_check(output)

        failed = False
        total_s = time.perf_counter() - start
        return DatasetReport(
            status="created",
            dataset_path=str(output),
            subjects=len(req.scans),
            sessions=sum(len(s) for s in req.scans.values()),
            series=series_count,
            classifications=classifications,
            total_s=total_s,
            converter_s=min(converter_s, total_s),
        )
    finally:
        if staging is not None:
            shutil.rmtree(staging, ignore_errors=True)
        _release_lock(lock, failed=failed)


# --- update -------------------------------------------------------------------


def _commit_update(
    output: Path,
    staging: Path,
    tree: Path,
    replaced_rel: list[str],
    description: dict[str, str],
    new_state: ToolboxState,
    old_description: bytes | None,
) -> None:
    """Move new files in and rewrite description + state, state last.

    Any failure before the state rename lands rolls the dataset back: moved
    files are deleted, files of overwritten sessions are restored from backup,
    and the previous description is put back.
    """
    backup_root = staging / "backup"
    moved: list[Path] = []
    backed_up: list[tuple[Path, Path]] = []
    description_path = output / DESCRIPTION_FILENAME
    description_written = False
    try:
        for rel in replaced_rel:
            source = output / rel
            if not source.exists():
                continue
            backup = backup_root / rel
            backup.parent.mkdir(parents=True, exist_ok=True)
            os.rename(source, backup)
            backed_up.append((source, backup))
        for file in sorted(p for p in tree.rglob("*") if p.is_file()):
            target = output / file.relative_to(tree)
            target.parent.mkdir(parents=True, exist_ok=True)
            os.replace(file, target)
            moved.append(target)
        _write_text_atomic(description_path, _dump_description(description))
        description_written = True
        write_state(output, new_state)
    except BaseException:
        for target in moved:
            target.unlink(missing_ok=True)
        for original, backup in backed_up:
            original.parent.mkdir(parents=True, exist_ok=True)
            os.rename(backup, original)
        if description_written and old_description is not None:
            description_path.write_bytes(old_description)
        raise
    _prune_empty_dirs(output, replaced_rel)


def update_dataset(
    req: ConversionRequest,
    converter: ConverterHandle,
    parallelism: int = 1,
    timeout_s: float | None = None,
    rules: tuple[DecisionRule, ...] | None = None,
) -> DatasetReport:
    """Merge new sessions and/or description entries into an existing dataset.

    The target must carry a readable state file. Sessions already recorded
    there conflict unless ``overwrite`` is set, in which case they are
    re-converted and replaced. An empty ``scans`` map performs a
    metadata-only update touching just the description and state.
    """
    start = time.perf_counter()
    deadline = start + timeout_s if timeout_s is not None else None
    output = Path(req.output)
    if not output.is_dir() or not (output / STATE_FILENAME).is_file():
        raise StateFileMissing(f"{output} is not a managed dataset (no {STATE_FILENAME})")
    if not req.scans and not req.dataset_description:
        raise EmptyScans("update requires new scans or dataset description entries")

    lock = _acquire_lock(output, create_missing=False)
    failed = True
    staging: Path | None = None
    try:
        state = read_state(output)
        conflicts = [
            (sub, ses)
            for sub, sessions in req.scans.items()
            for ses in sessions
            if state.has_session(sub, ses)
        ]
        if conflicts and not req.overwrite:
            pairs = ", ".join(f"(sub-{sub}, ses-{ses})" for sub, ses in conflicts)
            raise SessionConflict(f"already in dataset: {pairs}; set overwrite to replace")

        staging = _make_staging(output)
        conversions, converter_s = _convert_all(
            req, converter, staging / "work", parallelism, deadline
        )
        sessions = _classify_all(conversions, req.overrides, converter, rules)

        tree = staging / "tree"
        tree.mkdir()
        replaced_rel: list[str] = []
        for sub, ses in conflicts:
            for record in state.entries[sub][ses]:
                replaced_rel.extend(_series_artifacts(record.destination))

        classifications: list[SeriesClassification] = []
        series_count = 0
        for session in sessions:
            records, reported = _plan_session(session, tree)
            state.put_session(session.sub, session.ses, records)
            classifications.extend(reported)
            series_count += len(records)

        description_path = output / DESCRIPTION_FILENAME
        old_description = description_path.read_bytes() if description_path.exists() else None
        existing_desc: dict[str, str] = {}
        if old_description is not None:
            existing_desc = json.loads(old_description.decode("utf-8"))
        merged = dict(existing_desc)
        merged.update(req.dataset_description)

        new_state = ToolboxState(
            created_at=state.created_at,
            updated_at=utc_now(),
            converter=converter.identity,
            entries=state.entries,
        )
        _commit_update(output, staging, tree, replaced_rel, merged, new_state, old_description)
        _post_commit_check(output)

        failed = False
        total_s = time.perf_counter() - start
        return DatasetReport(
            status="updated",
            dataset_path=str(output),
            subjects=len(req.scans),
            sessions=sum(len(s) for s in req.scans.values()),
            series=series_count,
            classifications=classifications,
            total_s=total_s,
            converter_s=min(converter_s, total_s),
        )
    finally:
        if staging is not None:
            shutil.rmtree(staging, ignore_errors=True)
        _release_lock(lock, failed=failed)
