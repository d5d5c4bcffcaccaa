"""Layout checks: grammar, pairing, gradients, description, and the state audit."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import pytest

from bidsbuilder.convert import ConverterHandle
from bidsbuilder.dataset import create_dataset
from bidsbuilder.errors import NotADirectory
from bidsbuilder.request import parse_request
from bidsbuilder.validate import ViolationCode, validate_layout
from conftest import reference_request_document, snapshot_tree


@pytest.fixture
def dataset(tmp_path, reference_fixtures) -> Path:
    output = tmp_path / "dataset"
    req = parse_request(reference_request_document(output))
    create_dataset(req, ConverterHandle.mock(reference_fixtures))
    return output


def codes(violations) -> list[ViolationCode]:
    return [v.code for v in violations]


class TestCleanDataset:
    def test_fresh_create_is_valid(self, dataset):
        assert validate_layout(dataset) == []

    def test_not_a_directory(self, tmp_path):
        with pytest.raises(NotADirectory):
            validate_layout(tmp_path / "missing")

    def test_validation_is_read_only(self, dataset):
        def tree_hash(root):
            digest = hashlib.sha256()
            for rel, content in sorted((snapshot_tree(root) or {}).items()):
                digest.update(rel.encode())
                digest.update(content)
            return digest.hexdigest()

        before = tree_hash(dataset)
        validate_layout(dataset)
        assert tree_hash(dataset) == before

    def test_plain_bids_tree_without_state_passes(self, tmp_path):
        root = tmp_path / "plain"
        anat = root / "sub-01" / "ses-01" / "anat"
        anat.mkdir(parents=True)
        (anat / "sub-01_ses-01_T1w.nii.gz").write_bytes(b"x")
        (anat / "sub-01_ses-01_T1w.json").write_text("{}")
        (root / "dataset_description.json").write_text(
            json.dumps({"Name": "n", "BIDSVersion": "1.2.0"})
        )
        assert validate_layout(root) == []


class TestGrammar:
    def test_stray_file_is_bad_name(self, dataset):
        (dataset / "sub-01" / "ses-01" / "anat" / "foo.nii.gz").write_bytes(b"x")
        violations = validate_layout(dataset)
        assert codes(violations) == [ViolationCode.BAD_NAME]
        assert violations[0].path == "sub-01/ses-01/anat/foo.nii.gz"

    def test_wrong_subject_entity(self, dataset):
        anat = dataset / "sub-01" / "ses-01" / "anat"
        (anat / "sub-02_ses-01_T2w.nii.gz").write_bytes(b"x")
        (anat / "sub-02_ses-01_T2w.json").write_text("{}")
        assert ViolationCode.BAD_NAME in codes(validate_layout(dataset))

    def test_suffix_must_match_modality_dir(self, dataset):
        anat = dataset / "sub-01" / "ses-01" / "anat"
        (anat / "sub-01_ses-01_bold.nii.gz").write_bytes(b"x")
        (anat / "sub-01_ses-01_bold.json").write_text("{}")
        assert ViolationCode.BAD_NAME in codes(validate_layout(dataset))

    def test_unknown_modality_dir(self, dataset):
        weird = dataset / "sub-01" / "ses-01" / "spectro"
        weird.mkdir()
        assert ViolationCode.BAD_NAME in codes(validate_layout(dataset))

    def test_file_directly_under_subject(self, dataset):
        (dataset / "sub-01" / "stray.txt").write_text("x")
        assert ViolationCode.BAD_NAME in codes(validate_layout(dataset))

    def test_unexpected_root_file(self, dataset):
        (dataset / "notes.txt").write_text("x")
        assert ViolationCode.BAD_NAME in codes(validate_layout(dataset))

    def test_run_zero_rejected(self, dataset):
        anat = dataset / "sub-01" / "ses-01" / "anat"
        (anat / "sub-01_ses-01_run-0_T2w.nii.gz").write_bytes(b"x")
        (anat / "sub-01_ses-01_run-0_T2w.json").write_text("{}")
        assert ViolationCode.BAD_NAME in codes(validate_layout(dataset))

    def test_hidden_files_ignored(self, dataset):
        (dataset / ".stray").write_text("x")
        assert validate_layout(dataset) == []


class TestPairing:
    def test_deleted_sidecar_is_missing_sidecar(self, dataset):
        (dataset / "sub-01" / "ses-01" / "anat" / "sub-01_ses-01_T1w.json").unlink()
        assert codes(validate_layout(dataset)) == [ViolationCode.MISSING_SIDECAR]

    def test_deleted_image_is_orphan_sidecar_and_state_mismatch(self, dataset):
        (dataset / "sub-01" / "ses-01" / "anat" / "sub-01_ses-01_T1w.nii.gz").unlink()
        found = codes(validate_layout(dataset))
        assert ViolationCode.ORPHAN_SIDECAR in found
        assert ViolationCode.STATE_MISMATCH in found

    def test_gradient_outside_dwi(self, dataset):
        (dataset / "sub-01" / "ses-01" / "anat" / "sub-01_ses-01_T1w.bval").write_text("0")
        (dataset / "sub-01" / "ses-01" / "anat" / "sub-01_ses-01_T1w.bvec").write_text("0")
        violations = validate_layout(dataset)
        assert codes(violations) == [ViolationCode.UNPAIRED_GRADIENT]

    def test_unpaired_gradient_under_dwi(self, dataset):
        (dataset / "sub-01" / "ses-02" / "dwi" / "sub-01_ses-02_dwi.bvec").unlink()
        violations = validate_layout(dataset)
        assert codes(violations) == [ViolationCode.UNPAIRED_GRADIENT]


class TestDescription:
    def test_missing_description_file(self, dataset):
        (dataset / "dataset_description.json").unlink()
        assert codes(validate_layout(dataset)) == [ViolationCode.MISSING_DESCRIPTION]

    def test_missing_required_key(self, dataset):
        path = dataset / "dataset_description.json"
        description = json.loads(path.read_text())
        del description["BIDSVersion"]
        path.write_text(json.dumps(description))
        assert codes(validate_layout(dataset)) == [ViolationCode.MISSING_DESCRIPTION]

    def test_unparseable_description(self, dataset):
        (dataset / "dataset_description.json").write_text("{nope")
        assert codes(validate_layout(dataset)) == [ViolationCode.MISSING_DESCRIPTION]


class TestStateAudit:
    def test_unrecorded_image_is_state_mismatch(self, dataset):
        anat = dataset / "sub-01" / "ses-01" / "anat"
        (anat / "sub-01_ses-01_T2w.nii.gz").write_bytes(b"x")
        (anat / "sub-01_ses-01_T2w.json").write_text("{}")
        violations = validate_layout(dataset)
        assert codes(violations) == [ViolationCode.STATE_MISMATCH]
        assert violations[0].path == "sub-01/ses-01/anat/sub-01_ses-01_T2w.nii.gz"

    def test_corrupt_state_is_reported(self, dataset):
        (dataset / ".bidstoolbox").write_text("{broken")
        assert ViolationCode.STATE_MISMATCH in codes(validate_layout(dataset))

    def test_violations_serialize(self, dataset):
        (dataset / "sub-01" / "ses-01" / "anat" / "sub-01_ses-01_T1w.json").unlink()
        violation = validate_layout(dataset)[0].to_dict()
        assert set(violation) == {"path", "code", "message"}
        assert violation["code"] == "MissingSidecar"
