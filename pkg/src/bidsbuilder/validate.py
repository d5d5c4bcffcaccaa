"""Minimal internal compliance checks run after every commit and exposed standalone.

This is deliberately a small, testable subset of what the ecosystem validator
covers: the dataset description and its required keys, the entity naming
grammar and directory placement of data files, image/sidecar pairing,
gradient-file placement, and (for managed datasets) agreement between the
hidden state file and the files actually on disk. It never modifies the tree.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import MalformedState, NotADirectory, StateVersionUnsupported
from .model import Modality, Suffix, pair_is_legal
from .state import STATE_FILENAME, read_state

DESCRIPTION_FILENAME = "dataset_description.json"

_SUB_DIR = re.compile(r"sub-[A-Za-z0-9]+")
_SES_DIR = re.compile(r"ses-[A-Za-z0-9]+")
_DATA_FILE = re.compile(
    r"sub-(?P<sub>[A-Za-z0-9]+)_ses-(?P<ses>[A-Za-z0-9]+)"
    r"(?:_run-(?P<run>[0-9]+))?_(?P<suffix>[A-Za-z0-9]+)"
    r"\.(?P<ext>nii\.gz|json|bval|bvec)"
)


class ViolationCode(str, Enum):
    BAD_NAME = "BadName"
    ORPHAN_SIDECAR = "OrphanSidecar"
    MISSING_SIDECAR = "MissingSidecar"
    MISSING_DESCRIPTION = "MissingDescription"
    UNPAIRED_GRADIENT = "UnpairedGradient"
    STATE_MISMATCH = "StateMismatch"


@dataclass(frozen=True)
class Violation:
    path: str
    code: ViolationCode
    message: str

    def to_dict(self) -> dict:
        return {"path": self.path, "code": self.code.value, "message": self.message}


def _check_description(root: Path, out: list[Violation]) -> None:
    path = root / DESCRIPTION_FILENAME
    if not path.is_file():
        out.append(
            Violation("<root>", ViolationCode.MISSING_DESCRIPTION, f"{DESCRIPTION_FILENAME} is missing")
        )
        return
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as err:
        out.append(
            Violation(DESCRIPTION_FILENAME, ViolationCode.MISSING_DESCRIPTION, f"not valid JSON: {err}")
        )
        return
    if not isinstance(data, dict):
        out.append(
            Violation(DESCRIPTION_FILENAME, ViolationCode.MISSING_DESCRIPTION, "must be a JSON object")
        )
        return
    for key in ("Name", "BIDSVersion"):
        if key not in data:
            out.append(
                Violation(
                    DESCRIPTION_FILENAME,
                    ViolationCode.MISSING_DESCRIPTION,
                    f"required key {key!r} is missing",
                )
            )


def _check_modality_dir(
    root: Path, modality_dir: Path, sub_label: str, ses_label: str, out: list[Violation]
) -> list[str]:
    """Check one sub-*/ses-*/<modality>/ directory; returns valid image relpaths."""
    modality = Modality(modality_dir.name)
    images: set[str] = set()
    sidecars: set[str] = set()
    gradients: dict[str, set[str]] = {}
    valid_images: list[str] = []

    for entry in sorted(modality_dir.iterdir()):
        rel = entry.relative_to(root).as_posix()
        if entry.is_dir():
            out.append(Violation(rel, ViolationCode.BAD_NAME, "unexpected directory"))
            continue
        match = _DATA_FILE.fullmatch(entry.name)
        if not match:
            out.append(
                Violation(rel, ViolationCode.BAD_NAME, "file name does not match the entity grammar")
            )
            continue
        problems = []
        if match["sub"] != sub_label:
            problems.append(f"subject entity {match['sub']!r} does not match directory sub-{sub_label}")
        if match["ses"] != ses_label:
            problems.append(f"session entity {match['ses']!r} does not match directory ses-{ses_label}")
        if match["run"] is not None and int(match["run"]) < 1:
            problems.append("run index must be a positive integer")
        try:
            suffix = Suffix(match["suffix"])
            if not pair_is_legal(modality, suffix):
                problems.append(
                    f"suffix {suffix.value!r} is not valid under {modality.value!r}"
                )
        except ValueError:
            problems.append(f"unknown suffix {match['suffix']!r}")
        if problems:
            out.append(Violation(rel, ViolationCode.BAD_NAME, "; ".join(problems)))
            continue

        stem = entry.name[: -(len(match["ext"]) + 1)]
        if match["ext"] == "nii.gz":
            images.add(stem)
            valid_images.append(rel)
        elif match["ext"] == "json":
            sidecars.add(stem)
        else:
            gradients.setdefault(stem, set()).add(match["ext"])

    for stem in sorted(images - sidecars):
        out.append(
            Violation(
                (modality_dir / f"{stem}.nii.gz").relative_to(root).as_posix(),
                ViolationCode.MISSING_SIDECAR,
                "image has no JSON sidecar",
            )
        )
    for stem in sorted(sidecars - images):
        out.append(
            Violation(
                (modality_dir / f"{stem}.json").relative_to(root).as_posix(),
                ViolationCode.ORPHAN_SIDECAR,
                "sidecar has no image",
            )
        )
    for stem, exts in sorted(gradients.items()):
        rel_dir = modality_dir.relative_to(root).as_posix()
        if modality is not Modality.DWI:
            out.append(
                Violation(
                    f"{rel_dir}/{stem}.bval",
                    ViolationCode.UNPAIRED_GRADIENT,
                    "gradient files are only allowed under dwi",
                )
            )
            continue
        if exts != {"bval", "bvec"}:
            present = sorted(exts)[0]
            out.append(
                Violation(
                    f"{rel_dir}/{stem}.{present}",
                    ViolationCode.UNPAIRED_GRADIENT,
                    ".bval and .bvec must be present together",
                )
            )
        elif stem not in images:
            out.append(
                Violation(
                    f"{rel_dir}/{stem}.bval",
                    ViolationCode.UNPAIRED_GRADIENT,
                    "gradient files have no matching image",
                )
            )
    return valid_images


def _check_state(root: Path, image_rels: list[str], out: list[Violation]) -> None:
    if not (root / STATE_FILENAME).is_file():
        return
    try:
        state = read_state(root)
    except (MalformedState, StateVersionUnsupported) as err:
        out.append(Violation(STATE_FILENAME, ViolationCode.STATE_MISMATCH, err.message))
        return
    recorded = {record.destination for record in state.records()}
    for destination in sorted(recorded):
        if not (root / destination).is_file():
            out.append(
                Violation(
                    destination,
                    ViolationCode.STATE_MISMATCH,
                    "state file records a destination that does not exist",
                )
            )
    for rel in image_rels:
        if rel not in recorded:
            out.append(
                Violation(rel, ViolationCode.STATE_MISMATCH, "image is not recorded in the state file")
            )


def validate_layout(dataset_root: Path | str) -> list[Violation]:
    """Check a dataset tree; an empty list means it passes every check."""
    root = Path(dataset_root)
    if not root.is_dir():
        raise NotADirectory(f"{root} is not a directory")

    out: list[Violation] = []
    _check_description(root, out)

    image_rels: list[str] = []
    for entry in sorted(root.iterdir()):
        if entry.name.startswith("."):
            continue
        if entry.is_file():
            if entry.name != DESCRIPTION_FILENAME:
                out.append(
                    Violation(entry.name, ViolationCode.BAD_NAME, "unexpected file at dataset root")
                )
            continue
        if not _SUB_DIR.fullmatch(entry.name):
            out.append(
                Violation(entry.name, ViolationCode.BAD_NAME, "directory is not a sub-<label>")
            )
            continue
        sub_label = entry.name[len("sub-"):]
        for ses_entry in sorted(entry.iterdir()):
            rel = ses_entry.relative_to(root).as_posix()
            if not ses_entry.is_dir() or not _SES_DIR.fullmatch(ses_entry.name):
                out.append(
                    Violation(rel, ViolationCode.BAD_NAME, "expected a ses-<label> directory")
                )
                continue
            ses_label = ses_entry.name[len("ses-"):]
            for modality_entry in sorted(ses_entry.iterdir()):
                rel = modality_entry.relative_to(root).as_posix()
                if not modality_entry.is_dir() or modality_entry.name not in {
                    m.value for m in Modality
                }:
                    out.append(
                        Violation(rel, ViolationCode.BAD_NAME, "expected a modality directory")
                    )
                    continue
                image_rels.extend(
                    _check_modality_dir(root, modality_entry, sub_label, ses_label, out)
                )

    _check_state(root, image_rels, out)
    return out
