"""단계별 run manifest: config 해시, seed, 입력/출력 파일 해시.

각 단계 디렉토리(<out>/ddpm, <out>/simulate, ...)에 run_manifest.json 을 쓴다.
경로는 output_dir 기준 상대 경로(밖에 있으면 그대로)로 기록하고, 시각 같은
비결정적 값은 넣지 않는다. 같은 config + seed 면 바이트까지 같다.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from common.models import SerializableMixin
from pipeline.config import RunConfig
from pipeline.exceptions import ManifestMismatchError, MissingArtifactError
from utils.utils import canonical_json, sha256_file

logger = logging.getLogger("pipeline")

RUN_MANIFEST_NAME = "run_manifest.json"


@dataclass
class RunManifest(SerializableMixin):
    command: str
    config_hash: str
    seeds: dict[str, int] = field(default_factory=dict)
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    # report 에서 그룹 키로 쓰는 값 (pair, patients, source, plane)
    tags: dict[str, Any] = field(default_factory=dict)


def file_key(path: Path, root: Path) -> str:
    try:
        return path.resolve().relative_to(root.resolve()).as_posix()
    except ValueError:
        return str(path.resolve())


def hash_files(paths: Iterable[Path], root: Path) -> dict[str, str]:
    return {file_key(Path(p), root): sha256_file(p) for p in paths}


def write_run_manifest(
    stage_dir: Path,
    command: str,
    cfg: RunConfig,
    inputs: Iterable[Path],
    outputs: Iterable[Path],
    tags: dict[str, Any] | None = None,
) -> Path:
    manifest = RunManifest(
        command=command,
        config_hash=cfg.config_hash(),
        seeds=cfg.seeds(),
        inputs=hash_files(inputs, cfg.out),
        outputs=hash_files(outputs, cfg.out),
        tags=dict(tags or {}),
    )
    path = Path(stage_dir) / RUN_MANIFEST_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        canonical_json(manifest.to_json_dict()) + "\n", encoding="utf-8"
    )
    logger.info(
        "%s: wrote run manifest %s (%d outputs)",
        command,
        path,
        len(manifest.outputs),
    )
    return path


def load_run_manifest(stage_dir: Path) -> RunManifest:
    path = Path(stage_dir) / RUN_MANIFEST_NAME
    if not path.exists():
        raise MissingArtifactError(f"run manifest not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise ManifestMismatchError(f"{path}: invalid JSON ({e})") from e
    return RunManifest.from_dict(data)


def verify_artifact(path: Path, stage_dir: Path, root: Path) -> Path:
    """앞 단계 산출물이 있고 그 단계 run manifest 의 해시와 같은지 확인"""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"required artifact not found: {path}")
    manifest = load_run_manifest(stage_dir)
    key = file_key(path, root)
    recorded = manifest.outputs.get(key)
    if recorded is None:
        raise ManifestMismatchError(
            f"{key} is not listed in {stage_dir / RUN_MANIFEST_NAME}"
        )
    actual = sha256_file(path)
    if actual != recorded:
        raise ManifestMismatchError(
            f"{key}: sha256 {actual[:12]} does not match the run manifest "
            f"({recorded[:12]})"
        )
    return path
