import json
from unittest.mock import patch

import pytest

from pipeline.config import build_config

# 수 초 안에 전체 단계를 돌 수 있는 설정 (16x16 phantom, T=10, 1-level U-Net)
TINY_CONFIG = {
    "plane": "sagittal",
    "slices_per_volume": 2,
    "splits": {"counts": [1, 1, 1, 1, 2]},
    "schedule": {"T": 10, "beta_start": 1e-4, "beta_end": 0.1},
    "simulation": {"pair": "JZ", "variants": 2, "batch_size": 4},
    "ddpm_unet": {
        "levels": 1,
        "base_channels": 2,
        "time_conditioned": True,
        "time_embed_dim": 4,
    },
    "corrector_unet": {"levels": 1, "base_channels": 2, "init": "dirac"},
    "ddpm_trainer": {"max_epochs": 2, "batch_size": 2},
    "corrector_trainer": {"max_epochs": 2, "batch_size": 2},
    "register_max_shift": 2,
    "phantom": {"size": 16, "depth": 8, "corpus_size": 6},
    "seed": 7,
}


@pytest.fixture(autouse=True)
def _no_log_files():
    """CLI 테스트가 로그 디렉토리에 파일을 만들지 않게 한다."""
    with patch("pipeline.cli.configure_logging"):
        yield


@pytest.fixture
def tiny_config_data(tmp_path):
    data = json.loads(json.dumps(TINY_CONFIG))
    data["output_dir"] = str(tmp_path / "run")
    return data


@pytest.fixture
def tiny_config(tiny_config_data):
    return build_config(tiny_config_data)


@pytest.fixture
def config_file(tmp_path, tiny_config_data):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(tiny_config_data), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    """tiny 설정으로 phantom → ... → evaluate → report 를 한 번 끝낸 run.

    (config 경로, output_dir, 단계별 exit code)
    """
    from pipeline.cli import main
    from pipeline.commands import COMMANDS

    root = tmp_path_factory.mktemp("e2e")
    out = root / "run"
    config = root / "config.json"
    config.write_text(
        json.dumps(dict(TINY_CONFIG, output_dir=str(out))), encoding="utf-8"
    )
    with patch("pipeline.cli.configure_logging"):
        codes = {
            command: main([command, "--config", str(config)])
            for command in COMMANDS
        }
    return config, out, codes
