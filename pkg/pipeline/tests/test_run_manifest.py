import json

import pytest

from pipeline.exceptions import ManifestMismatchError, MissingArtifactError
from pipeline.run_manifest import (
    RUN_MANIFEST_NAME,
    file_key,
    load_run_manifest,
    verify_artifact,
    write_run_manifest,
)
from utils.utils import sha256_file


@pytest.fixture
def stage(tiny_config):
    """출력 파일 하나와 run manifest 가 있는 단계 디렉토리"""
    stage_dir = tiny_config.out / "ddpm"
    stage_dir.mkdir(parents=True)
    artifact = stage_dir / "ddpm.ckpt"
    artifact.write_bytes(b"weights")
    write_run_manifest(
        stage_dir, "train-ddpm", tiny_config, [], [artifact], {"pair": "JZ"}
    )
    return stage_dir, artifact


class TestRunManifest:
    def test_records_hashes_seeds_and_config(self, tiny_config, stage):
        stage_dir, artifact = stage
        manifest = load_run_manifest(stage_dir)
        assert manifest.command == "train-ddpm"
        assert manifest.config_hash == tiny_config.config_hash()
        assert manifest.seeds == tiny_config.seeds()
        assert manifest.outputs == {"ddpm/ddpm.ckpt": sha256_file(artifact)}
        assert manifest.tags == {"pair": "JZ"}

    def test_rewrite_is_byte_identical(self, tiny_config, stage):
        stage_dir, artifact = stage
        path = stage_dir / RUN_MANIFEST_NAME
        before = path.read_bytes()
        write_run_manifest(
            stage_dir,
            "train-ddpm",
            tiny_config,
            [],
            [artifact],
            {"pair": "JZ"},
        )
        assert path.read_bytes() == before
        assert json.loads(before)["command"] == "train-ddpm"

    def test_paths_outside_output_dir_are_absolute(self, tmp_path):
        outside = tmp_path / "elsewhere.json"
        key = file_key(outside, tmp_path / "run")
        assert key == str(outside.resolve())


class TestVerifyArtifact:
    def test_matching_artifact(self, tiny_config, stage):
        stage_dir, artifact = stage
        result = verify_artifact(artifact, stage_dir, tiny_config.out)
        assert result == artifact

    def test_missing_artifact(self, tiny_config, stage):
        stage_dir, _ = stage
        with pytest.raises(MissingArtifactError):
            verify_artifact(
                stage_dir / "nope.ckpt", stage_dir, tiny_config.out
            )

    def test_missing_run_manifest(self, tiny_config, tmp_path):
        artifact = tmp_path / "file.bin"
        artifact.write_bytes(b"x")
        with pytest.raises(MissingArtifactError):
            verify_artifact(artifact, tmp_path, tiny_config.out)

    def test_tampered_artifact(self, tiny_config, stage):
        """내용이 바뀐 산출물은 거부한다."""
        stage_dir, artifact = stage
        artifact.write_bytes(b"other weights")
        with pytest.raises(ManifestMismatchError):
            verify_artifact(artifact, stage_dir, tiny_config.out)

    def test_unlisted_artifact(self, tiny_config, stage):
        stage_dir, _ = stage
        stray = stage_dir / "stray.ckpt"
        stray.write_bytes(b"weights")
        with pytest.raises(ManifestMismatchError):
            verify_artifact(stray, stage_dir, tiny_config.out)
