import csv
import dataclasses
import json
import shutil
from unittest.mock import patch

import pytest
import sentry_sdk

from modules.volume_io import load_raw
from networks.exceptions import DivergenceError
from pipeline.cli import (
    EXIT_CONFIG,
    EXIT_DIVERGENCE,
    EXIT_FAILURE,
    EXIT_MISSING_ARTIFACT,
    EXIT_OK,
    build_parser,
    main,
)
from pipeline.commands import (
    COMMANDS,
    corrector_pairs,
    load_dataset,
    make_plan,
)
from pipeline.run_manifest import RUN_MANIFEST_NAME, load_run_manifest


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def snapshot(root):
    """root 아래 모든 파일의 바이트"""
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture
def run_copy(finished_run, tmp_path):
    """끝난 run 을 복사해서 (config, 복사본 경로) 로 돌려준다."""
    config, out, _ = finished_run
    copy = tmp_path / "copy"
    shutil.copytree(out, copy)
    return config, copy


class TestEndToEnd:
    def test_every_stage_succeeds(self, finished_run):
        _, out, codes = finished_run
        assert codes == {command: EXIT_OK for command in codes}
        for path in [
            "phantom/manifest.json",
            "ddpm/ddpm.ckpt",
            "ddpm/splits.json",
            "corrector/corrector.ckpt",
            "evaluate/input.csv",
            "evaluate/corrected.csv",
            "evaluate/corrected_summary.csv",
            "report/summary.csv",
            "report/plotdata.csv",
        ]:
            assert (out / path).is_file(), path
        for stage in (
            "phantom",
            "ddpm",
            "simulate",
            "corrector",
            "evaluate",
            "report",
        ):
            assert (out / stage / RUN_MANIFEST_NAME).is_file()

    def test_simulate_writes_k_variants_per_clean_slice(self, finished_run):
        """unet_train + unet_val 환자마다 슬라이스 2 개 x variant 2 개"""
        _, out, _ = finished_run
        splits = json.loads((out / "ddpm" / "splits.json").read_text())
        patients = splits["unet_train"] + splits["unet_val"]
        files = sorted((out / "simulate" / "pairs").glob("*.raw"))
        assert [f.stem for f in files] == sorted(patients)
        for path in files:
            data, meta = load_raw(path)
            assert data.shape[0] == len(meta["keys"]) == 4
            assert meta["pair"] == "JZ"
            assert sorted(k[2] for k in meta["keys"]) == [0, 0, 1, 1]
        manifest = load_run_manifest(out / "simulate")
        assert manifest.tags == {"pair": "JZ"}

    def test_evaluate_records_every_test_slice(self, finished_run):
        """test 환자 2 명 x motion 스캔 2 개 x 슬라이스 2 개"""
        _, out, _ = finished_run
        for name in ("input.csv", "corrected.csv"):
            rows = read_csv(out / "evaluate" / name)
            assert len(rows) == 8
            assert {r["plane"] for r in rows} == {"sagittal"}
        tags = load_run_manifest(out / "evaluate").tags
        assert tags == {
            "pair": "JZ",
            "patients": 1,
            "source": "diffusion",
            "plane": "sagittal",
        }

    def test_report_groups_by_file_and_plane(self, finished_run):
        _, out, _ = finished_run
        rows = read_csv(out / "report" / "summary.csv")
        assert [(r["file"], r["plane"]) for r in rows] == [
            ("corrected", "sagittal"),
            ("input", "sagittal"),
        ]
        assert all(r["n"] == "8" for r in rows)
        assert set(rows[0]) == {
            "file",
            "plane",
            "n",
            "ssim_mean",
            "ssim_std",
            "nmse_mean",
            "nmse_std",
            "psnr_mean",
            "psnr_std",
        }

    def test_rerun_is_byte_identical(self, finished_run):
        """같은 config + seed 로 전부 다시 돌리면 모든 산출물이 같다."""
        config, out, _ = finished_run
        before = snapshot(out)
        for command in COMMANDS:
            assert main([command, "--config", str(config)]) == EXIT_OK
        assert snapshot(out) == before


class TestCorrectorSources:
    def test_real_pairs(self, run_copy):
        config, copy = run_copy
        args = ["--config", str(config), "--out", str(copy)]
        assert (
            main(["train-corrector", *args, "--set", "corrector_source=real"])
            == EXIT_OK
        )
        tags = load_run_manifest(copy / "corrector").tags
        assert tags == {"source": "real"}
        assert main(["evaluate", *args]) == EXIT_OK
        tags = load_run_manifest(copy / "evaluate").tags
        assert tags["source"] == "real"

    def test_validation_on_training_inputs(self, run_copy):
        config, copy = run_copy
        code = main(
            [
                "train-corrector",
                "--config",
                str(config),
                "--out",
                str(copy),
                "--set",
                "validation_same_as_train=true",
            ]
        )
        assert code == EXIT_OK

    def test_external_set_combinations(self, config_file, tiny_config):
        """세트 조합이 다르면 학습 pair 와 checkpoint 가 달라진다."""
        args = [
            "--config",
            str(config_file),
            "--set",
            "phantom.external_scans=true",
            "--set",
            "corrector_source=external",
        ]
        assert main(["phantom", *args]) == EXIT_OK
        corrector_dir = tiny_config.out / "corrector"
        trained = {}
        for sets in ("AB", "CD"):
            extra = ["--set", f"external_sets={sets}"]
            assert main(["train-corrector", *args, *extra]) == EXIT_OK
            manifest = load_run_manifest(corrector_dir)
            assert manifest.tags == {
                "source": "external",
                "external_sets": sets,
            }
            trained[sets] = manifest.outputs
        assert trained["AB"] != trained["CD"]

        code = main(["evaluate", *args, "--set", "external_sets=CD"])
        assert code == EXIT_OK
        tags = load_run_manifest(tiny_config.out / "evaluate").tags
        assert tags["source"] == "external"
        assert tags["external_sets"] == "CD"

        cfg = dataclasses.replace(tiny_config, corrector_source="external")
        dataset = load_dataset(cfg)
        patients = make_plan(cfg, dataset).unet_train
        labels = {}
        for sets in ("AB", "CD"):
            pairs, _ = corrector_pairs(
                dataclasses.replace(cfg, external_sets=sets), dataset, patients
            )
            labels[sets] = {p.degraded.scan_label for p in pairs}
        assert labels == {"AB": {"sim-A", "sim-B"}, "CD": {"sim-C", "sim-D"}}

    def test_external_without_scans(self, config_file):
        """sim-* 스캔이 없는 데이터셋으로 external 학습 → 3"""
        args = ["--config", str(config_file)]
        assert main(["phantom", *args]) == EXIT_OK
        code = main(
            ["train-corrector", *args, "--set", "corrector_source=external"]
        )
        assert code == EXIT_MISSING_ARTIFACT


class TestExitCodes:
    def test_simulate_without_checkpoint(self, config_file, tiny_config):
        """DDPM checkpoint 없이 simulate → 3, 출력 없음"""
        assert main(["phantom", "--config", str(config_file)]) == EXIT_OK
        code = main(["simulate", "--config", str(config_file)])
        assert code == EXIT_MISSING_ARTIFACT
        assert not (tiny_config.out / "simulate").exists()

    def test_train_without_dataset(self, config_file):
        code = main(["train-ddpm", "--config", str(config_file)])
        assert code == EXIT_MISSING_ARTIFACT

    def test_tampered_checkpoint(self, run_copy):
        config, copy = run_copy
        ckpt = copy / "corrector" / "corrector.ckpt"
        ckpt.write_bytes(ckpt.read_bytes() + b"\0")
        code = main(["evaluate", "--config", str(config), "--out", str(copy)])
        assert code == EXIT_MISSING_ARTIFACT

    def test_tampered_dataset(self, run_copy):
        """phantom 볼륨이 바뀌면 이후 단계는 읽지 않는다."""
        config, copy = run_copy
        scan = next((copy / "phantom").rglob("clean.raw"))
        scan.write_bytes(scan.read_bytes() + b"\0")
        code = main(["simulate", "--config", str(config), "--out", str(copy)])
        assert code == EXIT_MISSING_ARTIFACT

    @pytest.mark.parametrize(
        "args",
        [
            ["--set", "plane=axial"],
            ["--set", "nope=1"],
            ["--set", "simulation.pair=JJ"],
            ["--config", "does-not-exist.json"],
        ],
    )
    def test_invalid_config(self, args, tmp_path):
        assert main(["phantom", "--out", str(tmp_path), *args]) == EXIT_CONFIG
        assert not (tmp_path / "phantom").exists()

    def test_divergence(self, config_file):
        def diverge(cfg):
            raise DivergenceError("loss is nan", 0, 0)

        with patch.dict("pipeline.cli.COMMANDS", {"train-ddpm": diverge}):
            code = main(["train-ddpm", "--config", str(config_file)])
        assert code == EXIT_DIVERGENCE

    def test_unexpected_error_is_reported(self, config_file):
        """예상하지 못한 예외 → 1, Sentry 로 보고"""
        error = RuntimeError("boom")

        def explode(cfg):
            raise error

        with (
            patch.dict("pipeline.cli.COMMANDS", {"report": explode}),
            patch.object(sentry_sdk, "capture_exception") as capture,
        ):
            code = main(["report", "--config", str(config_file)])
        assert code == EXIT_FAILURE
        capture.assert_called_once_with(error)

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as e:
            build_parser().parse_args(["fly"])
        assert e.value.code == 2
