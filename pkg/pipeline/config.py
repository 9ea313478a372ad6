"""RunConfig: JSON 설정 파일 + `--set a.b=value` override.

필드 이름은 dataclass 필드와 정확히 같다. 모르는 키, 타입이 다른 값, 범위를
벗어난 값은 모두 ConfigError 로 바꿔 던진다 (CLI exit code 2).
"""

import dataclasses
import json
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Sequence, get_args, get_origin, get_type_hints

import numpy as np

from common.models import SerializableMixin
from dataprep.manifest import EXTERNAL_SETS
from dataprep.schemas import PLANES, SPLIT_NAMES
from diffusion.exceptions import InvalidScheduleError
from diffusion.schedule import schedule_from_config
from diffusion.schemas import (
    PRESET_PAIRS,
    ScheduleConfig,
    SimulationParams,
    preset_pair,
)
from modules.metrics import MetricConfig
from networks.exceptions import InvalidConfigError
from networks.schemas import TrainerConfig, UNetConfig
from pipeline.exceptions import ConfigError
from pipeline.phantom import MANIFEST_NAME, PhantomSpec
from utils.utils import canonical_json, sha256_bytes, unwrap_optional

CORRECTOR_SOURCES = ("diffusion", "real", "external")
REPORT_KEYS = (
    "file",
    "plane",
    "pair",
    "patients",
    "source",
    "external_sets",
    "run",
)
# 단계별 seed 는 전역 seed 와 이 순서의 index 로 파생한다
STAGES = (
    "phantom",
    "splits",
    "ddpm_init",
    "ddpm_train",
    "ddpm_val",
    "simulate",
    "corrector_init",
    "corrector_train",
)
# 50 명 phantom 코퍼스용 (ddpm_train, ddpm_val, unet_train, unet_val, test)
DESK_COUNTS = (10, 5, 15, 5, 15)


def stage_seed(seed: int, stage: str) -> int:
    if stage not in STAGES:
        raise KeyError(f"unknown stage: {stage}")
    state = np.random.SeedSequence([seed, STAGES.index(stage)])
    return int(state.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class SplitSettings(SerializableMixin):
    counts: tuple[int, ...] = DESK_COUNTS
    # None 이면 전역 seed 에서 파생
    seed: int | None = None


@dataclass(frozen=True)
class SimulationSettings(SerializableMixin):
    pair: str = "JZ"
    variants: int = 2
    deterministic: bool = False
    fresh_noise_per_iteration: bool = True
    batch_size: int = 16


@dataclass(frozen=True)
class ReportSettings(SerializableMixin):
    # 비어 있으면 output_dir 하나
    inputs: tuple[str, ...] = ()
    group_by: tuple[str, ...] = ("file", "plane")


def _ddpm_unet() -> UNetConfig:
    return UNetConfig(time_conditioned=True)


def _corrector_unet() -> UNetConfig:
    return UNetConfig(init="dirac")


@dataclass(frozen=True)
class RunConfig(SerializableMixin):
    # 비어 있으면 <output_dir>/phantom/manifest.json
    dataset_manifest: str = ""
    plane: str = "sagittal"
    slices_per_volume: int | None = 100
    resample: tuple[int, ...] | None = None
    splits: SplitSettings = field(default_factory=SplitSettings)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    ddpm_unet: UNetConfig = field(default_factory=_ddpm_unet)
    corrector_unet: UNetConfig = field(default_factory=_corrector_unet)
    ddpm_trainer: TrainerConfig = field(default_factory=TrainerConfig)
    corrector_trainer: TrainerConfig = field(default_factory=TrainerConfig)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    corrector_source: str = "diffusion"
    # corrector_source=external 일 때 쓰는 sim-* 세트 조합
    external_sets: str = "BC"
    register_max_shift: int = 10
    # 학습 입력 그대로 validation (환자 겹침 허용)
    validation_same_as_train: bool = False
    phantom: PhantomSpec = field(default_factory=PhantomSpec)
    report: ReportSettings = field(default_factory=ReportSettings)
    output_dir: str = "runs/default"
    seed: int = 0
    literal_paper_coefficient: bool = False

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    @property
    def manifest_path(self) -> Path:
        if self.dataset_manifest:
            return Path(self.dataset_manifest)
        return self.out / "phantom" / MANIFEST_NAME

    @property
    def resample_size(self) -> tuple[int, int] | None:
        if self.resample is None:
            return None
        h, w = self.resample
        return (h, w)

    def presets(self) -> list[SimulationParams]:
        return preset_pair(self.simulation.pair, self.schedule.T)

    def seed_for(self, stage: str) -> int:
        if stage == "splits" and self.splits.seed is not None:
            return self.splits.seed
        if stage == "phantom" and self.phantom.seed is not None:
            return self.phantom.seed
        return stage_seed(self.seed, stage)

    def seeds(self) -> dict[str, int]:
        return {stage: self.seed_for(stage) for stage in STAGES}

    def trainer_for(self, task: str) -> TrainerConfig:
        """trainer seed 는 항상 전역 seed 에서 파생한 값으로 바꾼다."""
        base = self.ddpm_trainer if task == "ddpm" else self.corrector_trainer
        seed = self.seed_for(f"{task}_train")
        return dataclasses.replace(base, seed=seed)

    def config_hash(self) -> str:
        return sha256_bytes(canonical_json(self.to_json_dict()).encode())

    def validate(self) -> None:
        errors = []
        if self.plane not in PLANES:
            errors.append(f"plane must be one of {PLANES}")
        if self.simulation.pair not in PRESET_PAIRS:
            errors.append(f"simulation.pair must be one of {PRESET_PAIRS}")
        if self.simulation.variants < 1 or self.simulation.batch_size < 1:
            errors.append("simulation.variants and batch_size must be >= 1")
        if self.corrector_source not in CORRECTOR_SOURCES:
            errors.append(
                f"corrector_source must be one of {CORRECTOR_SOURCES}"
            )
        sets = self.external_sets
        unknown = set(sets) - set(EXTERNAL_SETS)
        if not sets or unknown or len(set(sets)) != len(sets):
            errors.append(
                f"external_sets must be distinct letters of {EXTERNAL_SETS}"
            )
        counts = self.splits.counts
        if len(counts) != len(SPLIT_NAMES) or min(counts, default=0) < 0:
            errors.append(
                f"splits.counts needs {len(SPLIT_NAMES)} counts >= 0 "
                f"({', '.join(SPLIT_NAMES)})"
            )
        else:
            optional = {"unet_val"} if self.validation_same_as_train else set()
            empty = [
                name
                for name, count in zip(SPLIT_NAMES, counts)
                if count == 0 and name not in optional
            ]
            if empty:
                errors.append(f"splits.counts must be > 0 for {empty}")
        if self.slices_per_volume is not None and self.slices_per_volume < 1:
            errors.append("slices_per_volume must be >= 1 or null")
        if self.resample is not None and (
            len(self.resample) != 2 or min(self.resample) < 1
        ):
            errors.append("resample must be [height, width] or null")
        if self.register_max_shift < 0 or self.seed < 0:
            errors.append("register_max_shift and seed must be >= 0")
        if not self.ddpm_unet.time_conditioned:
            errors.append("ddpm_unet must be time_conditioned")
        if self.corrector_unet.time_conditioned:
            errors.append("corrector_unet must not be time_conditioned")
        unknown = sorted(set(self.report.group_by) - set(REPORT_KEYS))
        if unknown:
            errors.append(f"report.group_by: unknown keys {unknown}")
        try:
            schedule_from_config(self.schedule)
        except InvalidScheduleError as e:
            errors.append(f"schedule: {e}")
        if errors:
            raise ConfigError("; ".join(errors))


_SCALARS: dict[type, tuple[type, ...]] = {
    int: (int,),
    float: (int, float),
    str: (str,),
    bool: (bool,),
}


def _check_section(cls: Any, data: Any, prefix: str) -> None:
    """모르는 키와 스칼라 타입 불일치를 찾는다."""
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'} must be a JSON object")
    hints = get_type_hints(cls)
    names = {f.name for f in fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(
            f"unknown config keys: {[prefix + key for key in unknown]}"
        )
    for name, value in data.items():
        hint = unwrap_optional(hints[name])
        key = prefix + name
        if value is None:
            continue
        if is_dataclass(hint):
            _check_section(hint, value, f"{key}.")
        else:
            _check_value(key, hint, value)


def _check_value(key: str, hint: Any, value: Any) -> None:
    if get_origin(hint) in (tuple, list):
        if not isinstance(value, list):
            raise ConfigError(f"{key}: expected a list, got {value!r}")
        item = (get_args(hint) or (Any,))[0]
        for v in value:
            _check_value(key, item, v)
    elif hint in _SCALARS:
        ok = isinstance(value, _SCALARS[hint])
        # bool 은 int 의 subclass
        if hint is not bool and isinstance(value, bool):
            ok = False
        if not ok:
            raise ConfigError(
                f"{key}: expected {hint.__name__}, got {value!r}"
            )


def parse_override(item: str) -> tuple[list[str], Any]:
    """"a.b=1" → (["a", "b"], 1). 값은 JSON, 실패하면 문자열."""
    key, sep, raw = item.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override must look like key=value: {item!r}")
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    return key.strip().split("."), value


def apply_overrides(
    data: dict[str, Any], overrides: Sequence[str]
) -> dict[str, Any]:
    """data 를 복사해서 override 를 적용한 dict 를 돌려준다."""
    result = json.loads(json.dumps(data))
    for item in overrides:
        path, value = parse_override(item)
        cls: Any = RunConfig
        target = result
        for depth, key in enumerate(path):
            hints = get_type_hints(cls) if is_dataclass(cls) else {}
            if key not in hints:
                raise ConfigError(f"unknown config key: {'.'.join(path)}")
            if depth == len(path) - 1:
                target[key] = value
                break
            cls = unwrap_optional(hints[key])
            if not is_dataclass(cls):
                raise ConfigError(
                    f"{'.'.join(path[: depth + 1])} is not a section"
                )
            target = target.setdefault(key, {})
            if not isinstance(target, dict):
                raise ConfigError(f"{key} must be a JSON object")
    return result


def build_config(data: dict[str, Any]) -> RunConfig:
    _check_section(RunConfig, data, "")
    try:
        cfg = RunConfig.from_dict(data)
    except (TypeError, ValueError, InvalidConfigError) as e:
        raise ConfigError(f"invalid config: {e}") from e
    cfg.validate()
    return cfg


def load_config(
    path: str | Path | None = None,
    overrides: Sequence[str] = (),
    seed: int | None = None,
    out: str | Path | None = None,
) -> RunConfig:
    """파일(없으면 기본값) → --set → --seed / --out 순서로 적용"""
    data: dict[str, Any] = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except (ValueError, UnicodeDecodeError) as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from e
    data = apply_overrides(data, overrides)
    if seed is not None:
        data["seed"] = seed
    if out is not None:
        data["output_dir"] = str(out)
    return build_config(data)
