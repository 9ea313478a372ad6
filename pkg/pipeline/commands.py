"""CLI 단계: phantom → train-ddpm → simulate → train-corrector → evaluate
→ report.

단계 산출물 위치 (output_dir 기준)
- phantom/manifest.json, phantom/<patient>/<label>.raw
- ddpm/ddpm.ckpt, ddpm/splits.json
- simulate/pairs/<patient>.raw
- corrector/corrector.ckpt
- evaluate/{input,corrected}.csv (+ _summary.csv)
- report/summary.csv, report/plotdata.csv

각 단계는 마지막에 run_manifest.json 을 쓴다. 앞 단계 산출물은 그 단계의
run manifest 해시와 맞아야 읽는다. 같은 config + seed 로 다시 실행하면 같은
바이트를 다시 쓴다.
"""

import dataclasses
import logging
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from dataprep.manifest import (
    CLEAN_LABEL,
    DatasetManifest,
    external_label,
    load_manifest,
)
from dataprep.pairs import (
    DiffusionSimulator,
    build_external_pairs,
    build_pairs,
    build_real_pairs,
)
from dataprep.schemas import (
    PROVENANCE_DIFFUSION,
    ImageSlice,
    PairedSample,
    SplitPlan,
)
from dataprep.splits import split_by_patient
from dataprep.volumes import extract_slices, normalize
from diffusion.predictors import TrainedUNetPredictor
from diffusion.schedule import schedule_from_config
from diffusion.schemas import preset_pair
from dima.settings import DimaConfig
from modules.autograd import RngStream
from modules.metrics import MetricsReport
from modules.volume_io import load_raw, save_raw
from networks.checkpoint import load_checkpoint, save_checkpoint
from networks.tasks import CorrectorTask, DenoiserTask, correct_slices
from networks.trainer import train
from networks.unet import build_unet
from pipeline.config import RunConfig
from pipeline.exceptions import ManifestMismatchError, MissingArtifactError
from pipeline.phantom import generate_phantom
from pipeline.report import ReportSource, emit_report
from pipeline.run_manifest import (
    load_run_manifest,
    verify_artifact,
    write_run_manifest,
)
from utils.utils import canonical_json

logger = logging.getLogger("pipeline")

DDPM_CHECKPOINT = "ddpm.ckpt"
CORRECTOR_CHECKPOINT = "corrector.ckpt"
SPLITS_NAME = "splits.json"
INPUT_REPORT = "input.csv"
CORRECTED_REPORT = "corrected.csv"


# ----------------------------------------------------------------------
# 공통
# ----------------------------------------------------------------------


def stage_dir(cfg: RunConfig, stage: str) -> Path:
    return cfg.out / stage


def load_dataset(cfg: RunConfig) -> DatasetManifest:
    path = cfg.manifest_path
    if not path.exists():
        raise MissingArtifactError(
            f"dataset manifest not found: {path} "
            "(run `dima phantom` or set dataset_manifest)"
        )
    manifest = load_manifest(path)
    changed = manifest.verify()
    if changed:
        raise ManifestMismatchError(
            f"dataset files differ from {path}: {changed[:3]}"
        )
    return manifest


def make_plan(cfg: RunConfig, manifest: DatasetManifest) -> SplitPlan:
    return split_by_patient(
        manifest.patient_ids(), cfg.splits.counts, cfg.seed_for("splits")
    )


def load_slices(
    cfg: RunConfig,
    manifest: DatasetManifest,
    patient_id: str,
    label: str,
) -> list[ImageSlice]:
    """볼륨 단위 정규화 후 cfg.plane 의 가운데 슬라이스들"""
    volume = normalize(manifest.load(patient_id, label))
    return extract_slices(
        volume, cfg.plane, cfg.slices_per_volume, cfg.resample_size
    )


def load_labelled(
    cfg: RunConfig,
    manifest: DatasetManifest,
    patient_ids: Sequence[str],
    labels_of: Callable[[str], list[str]],
) -> list[ImageSlice]:
    slices: list[ImageSlice] = []
    for patient_id in patient_ids:
        for label in labels_of(patient_id):
            slices.extend(load_slices(cfg, manifest, patient_id, label))
    return slices


def load_clean(
    cfg: RunConfig, manifest: DatasetManifest, patient_ids: Sequence[str]
) -> list[ImageSlice]:
    return load_labelled(cfg, manifest, patient_ids, lambda _: [CLEAN_LABEL])


def _progress() -> bool:
    return bool(DimaConfig.PROGRESS)


# ----------------------------------------------------------------------
# phantom
# ----------------------------------------------------------------------


def run_phantom(cfg: RunConfig) -> Path:
    out = stage_dir(cfg, "phantom")
    manifest = generate_phantom(
        cfg.phantom, out, seed=cfg.seed_for("phantom"), progress=_progress()
    )
    outputs = [out / "manifest.json"] + [
        manifest.scan_path(p, label)
        for p in manifest.patient_ids()
        for label in manifest.patient(p).labels()
    ]
    return write_run_manifest(out, "phantom", cfg, [], outputs)


# ----------------------------------------------------------------------
# phase 1: DDPM
# ----------------------------------------------------------------------


def run_train_ddpm(cfg: RunConfig) -> Path:
    manifest = load_dataset(cfg)
    plan = make_plan(cfg, manifest)
    train_set = load_labelled(
        cfg, manifest, plan.ddpm_train, manifest.motion_labels
    )
    val_set = load_labelled(
        cfg, manifest, plan.ddpm_val, manifest.motion_labels
    )
    if not train_set or not val_set:
        raise MissingArtifactError(
            "DDPM training needs motion-affected scans for the ddpm splits"
        )
    sched = schedule_from_config(cfg.schedule)
    init_seed = cfg.seed_for("ddpm_init")
    unet = build_unet(cfg.ddpm_unet, RngStream(init_seed))
    task = DenoiserTask(unet, sched, val_seed=cfg.seed_for("ddpm_val"))
    ckpt = train(
        task,
        train_set,
        val_set,
        cfg.trainer_for("ddpm"),
        init_seed=init_seed,
        progress=_progress(),
    )

    out = stage_dir(cfg, "ddpm")
    ckpt_path = save_checkpoint(ckpt, out / DDPM_CHECKPOINT)
    splits_path = out / SPLITS_NAME
    splits_path.write_text(
        canonical_json(plan.to_json_dict()) + "\n", encoding="utf-8"
    )
    return write_run_manifest(
        out,
        "train-ddpm",
        cfg,
        [cfg.manifest_path],
        [ckpt_path, splits_path],
    )


# ----------------------------------------------------------------------
# 시뮬레이션
# ----------------------------------------------------------------------


def save_simulated(
    pairs: Sequence[PairedSample], out: Path, pair: str
) -> list[Path]:
    """환자마다 degraded 슬라이스를 (M, H, W) raw 하나로 저장"""
    by_patient: dict[str, list[PairedSample]] = {}
    for p in pairs:
        by_patient.setdefault(p.patient_id, []).append(p)
    paths = []
    for patient_id, items in by_patient.items():
        meta = {
            "patient_id": patient_id,
            "pair": pair,
            "keys": [
                [p.degraded.plane, p.degraded.index, p.variant] for p in items
            ],
        }
        data = np.stack([p.degraded.pixels for p in items])
        paths.append(save_raw(out / f"{patient_id}.raw", data, meta))
    return paths


def load_simulated(
    path: Path, clean: Sequence[ImageSlice]
) -> list[PairedSample]:
    """save_simulated 의 역. clean 슬라이스와 key 로 다시 짝짓는다."""
    data, meta = load_raw(path)
    by_key = {item.key: item for item in clean}
    pairs = []
    for pixels, (plane, index, variant) in zip(data, meta["keys"]):
        key = (meta["patient_id"], plane, int(index))
        if key not in by_key:
            raise ManifestMismatchError(
                f"{path}: no clean slice for {key} (config changed?)"
            )
        source = by_key[key]
        pairs.append(
            PairedSample(
                clean=source,
                degraded=dataclasses.replace(
                    source,
                    pixels=np.asarray(pixels, dtype=np.float64),
                    scan_label=f"dima-{variant}",
                ),
                provenance=PROVENANCE_DIFFUSION,
                variant=int(variant),
            )
        )
    return pairs


def run_simulate(cfg: RunConfig) -> Path:
    ddpm_dir = stage_dir(cfg, "ddpm")
    ckpt_path = verify_artifact(ddpm_dir / DDPM_CHECKPOINT, ddpm_dir, cfg.out)
    manifest = load_dataset(cfg)
    ckpt = load_checkpoint(ckpt_path)
    if ckpt.schedule is None:
        raise ManifestMismatchError(
            f"{ckpt_path}: checkpoint has no schedule"
        )
    if ckpt.schedule != cfg.schedule:
        logger.warning(
            "schedule in config %s differs from checkpoint %s; "
            "using the checkpoint schedule",
            cfg.schedule,
            ckpt.schedule,
        )
    sched = schedule_from_config(ckpt.schedule)
    simulator = DiffusionSimulator(
        predictor=TrainedUNetPredictor(ckpt.unet(), sched),
        schedule=sched,
        params=preset_pair(cfg.simulation.pair, sched.T),
        options={
            "deterministic": cfg.simulation.deterministic,
            "fresh_noise_per_iteration": (
                cfg.simulation.fresh_noise_per_iteration
            ),
            "literal_paper_coefficient": cfg.literal_paper_coefficient,
        },
    )
    plan = make_plan(cfg, manifest)
    clean = load_clean(cfg, manifest, plan.unet_train + plan.unet_val)
    pairs = build_pairs(
        clean,
        simulator,
        k=cfg.simulation.variants,
        rng=RngStream(cfg.seed_for("simulate")),
        batch_size=cfg.simulation.batch_size,
        workers=DimaConfig.WORKERS,
        progress=_progress(),
    )
    out = stage_dir(cfg, "simulate")
    outputs = save_simulated(pairs, out / "pairs", cfg.simulation.pair)
    logger.info(
        "simulate: %d clean slices → %d pairs (pair %s)",
        len(clean),
        len(pairs),
        cfg.simulation.pair,
    )
    return write_run_manifest(
        out,
        "simulate",
        cfg,
        [cfg.manifest_path, ckpt_path],
        outputs,
        tags={"pair": cfg.simulation.pair},
    )


# ----------------------------------------------------------------------
# phase 2: corrector
# ----------------------------------------------------------------------


def diffusion_pairs(
    cfg: RunConfig,
    manifest: DatasetManifest,
    patient_ids: Sequence[str],
) -> tuple[list[PairedSample], list[Path]]:
    sim_dir = stage_dir(cfg, "simulate")
    pairs: list[PairedSample] = []
    inputs = []
    for patient_id in patient_ids:
        path = verify_artifact(
            sim_dir / "pairs" / f"{patient_id}.raw", sim_dir, cfg.out
        )
        clean = load_clean(cfg, manifest, [patient_id])
        pairs.extend(load_simulated(path, clean))
        inputs.append(path)
    return pairs, inputs


def corrector_pairs(
    cfg: RunConfig,
    manifest: DatasetManifest,
    patient_ids: Sequence[str],
) -> tuple[list[PairedSample], list[Path]]:
    """corrector_source 에 따른 (clean, degraded) pair 와 읽은 입력 파일"""
    if cfg.corrector_source == "diffusion":
        return diffusion_pairs(cfg, manifest, patient_ids)
    clean = load_clean(cfg, manifest, patient_ids)
    if cfg.corrector_source == "real":
        motion = load_labelled(
            cfg, manifest, patient_ids, manifest.motion_labels
        )
        return build_real_pairs(clean, motion, cfg.register_max_shift), []
    wanted = [external_label(name) for name in cfg.external_sets]
    for patient_id in patient_ids:
        present = set(manifest.external_labels(patient_id))
        missing = sorted(set(wanted) - present)
        if missing:
            raise MissingArtifactError(
                f"corrector_source=external needs {missing} scans "
                f"for {patient_id}"
            )
    external = load_labelled(cfg, manifest, patient_ids, lambda _: wanted)
    return build_external_pairs(clean, external, cfg.external_sets), []


def corrector_tags(cfg: RunConfig) -> dict[str, str]:
    """corrector 학습 데이터 출처. evaluate 결과에도 그대로 붙는다."""
    tags = {"source": cfg.corrector_source}
    if cfg.corrector_source == "external":
        tags["external_sets"] = cfg.external_sets
    return tags


def run_train_corrector(cfg: RunConfig) -> Path:
    manifest = load_dataset(cfg)
    plan = make_plan(cfg, manifest)
    train_set, inputs = corrector_pairs(cfg, manifest, plan.unet_train)
    if cfg.validation_same_as_train:
        val_set = train_set
    else:
        val_set, val_inputs = corrector_pairs(cfg, manifest, plan.unet_val)
        inputs += val_inputs
    init_seed = cfg.seed_for("corrector_init")
    unet = build_unet(cfg.corrector_unet, RngStream(init_seed))
    ckpt = train(
        CorrectorTask(unet, cfg.metrics),
        train_set,
        val_set,
        cfg.trainer_for("corrector"),
        init_seed=init_seed,
        progress=_progress(),
        allow_patient_overlap=cfg.validation_same_as_train,
    )
    out = stage_dir(cfg, "corrector")
    ckpt_path = save_checkpoint(ckpt, out / CORRECTOR_CHECKPOINT)
    return write_run_manifest(
        out,
        "train-corrector",
        cfg,
        [cfg.manifest_path, *inputs],
        [ckpt_path],
        tags=corrector_tags(cfg),
    )


# ----------------------------------------------------------------------
# 평가 / 리포트
# ----------------------------------------------------------------------


def run_evaluate(cfg: RunConfig) -> Path:
    """test 환자의 motion 스캔 전부: 입력 vs clean, 보정 결과 vs clean.

    motion 스캔이 여러 개면 레코드는 같은 (환자, 슬라이스) 로 함께 쌓인다.
    """
    corrector_dir = stage_dir(cfg, "corrector")
    ckpt_path = verify_artifact(
        corrector_dir / CORRECTOR_CHECKPOINT, corrector_dir, cfg.out
    )
    manifest = load_dataset(cfg)
    plan = make_plan(cfg, manifest)
    unet = load_checkpoint(ckpt_path).unet()
    trained_with = load_run_manifest(corrector_dir).tags

    inputs_report = MetricsReport()
    corrected_report = MetricsReport()
    for patient_id in plan.test:
        clean = load_clean(cfg, manifest, [patient_id])
        motion = load_labelled(
            cfg, manifest, [patient_id], manifest.motion_labels
        )
        pairs = build_real_pairs(clean, motion, cfg.register_max_shift)
        if not pairs:
            continue
        degraded = np.stack([p.degraded.pixels for p in pairs])
        corrected = correct_slices(unet, degraded)
        for pair, output in zip(pairs, corrected):
            reference = pair.clean.pixels
            patient, plane, index = pair.key
            inputs_report.add_pair(
                patient,
                plane,
                index,
                pair.degraded.pixels,
                reference,
                cfg.metrics,
            )
            corrected_report.add_pair(
                patient, plane, index, output, reference, cfg.metrics
            )
    if not corrected_report.records:
        raise MissingArtifactError(
            "no motion-affected test slices to evaluate"
        )

    out = stage_dir(cfg, "evaluate")
    outputs = [
        *inputs_report.write(out / INPUT_REPORT),
        *corrected_report.write(out / CORRECTED_REPORT),
    ]
    reports = (("input", inputs_report), ("corrected", corrected_report))
    for name, report in reports:
        logger.info(
            "evaluate %s: SSIM %.4f ± %.4f, NMSE %.4f ± %.4f",
            name,
            *report.overall("ssim"),
            *report.overall("nmse"),
        )
    return write_run_manifest(
        out,
        "evaluate",
        cfg,
        [cfg.manifest_path, ckpt_path],
        outputs,
        tags={
            "pair": cfg.simulation.pair,
            "patients": len(plan.unet_train),
            "plane": cfg.plane,
            "source": trained_with.get("source", ""),
            **trained_with,
        },
    )


def report_sources(run_dirs: Sequence[Path]) -> list[ReportSource]:
    """각 run 의 evaluate 결과 CSV (summary 제외) 에 run tag 를 붙인다."""
    sources = []
    for run_dir in run_dirs:
        evaluate_dir = run_dir / "evaluate"
        manifest = load_run_manifest(evaluate_dir)
        for name in (INPUT_REPORT, CORRECTED_REPORT):
            path = verify_artifact(evaluate_dir / name, evaluate_dir, run_dir)
            tags = dict(manifest.tags, file=path.stem, run=run_dir.name)
            sources.append(ReportSource(path=path, tags=tags))
    return sources


def run_report(cfg: RunConfig) -> Path:
    run_dirs = [Path(p) for p in cfg.report.inputs] or [cfg.out]
    sources = report_sources(run_dirs)
    out = stage_dir(cfg, "report")
    outputs = emit_report(sources, cfg.report.group_by, out)
    return write_run_manifest(
        out, "report", cfg, [s.path for s in sources], outputs
    )


COMMANDS: dict[str, Callable[[RunConfig], Path]] = {
    "phantom": run_phantom,
    "train-ddpm": run_train_ddpm,
    "simulate": run_simulate,
    "train-corrector": run_train_corrector,
    "evaluate": run_evaluate,
    "report": run_report,
}
