"""desk-scale 합성 phantom 코퍼스.

clean 볼륨은 경계가 부드러운 타원체들의 합이고, motion 스캔은 phase-encode
축 방향 ghost replica + in-plane Gaussian blur 로 만든다. 실제 k-space 모션을
물리적으로 재현하는 모델은 아니다.

볼륨 축은 (X, Y, Z) = (depth, size, size). sagittal 슬라이스가 size x size 이고
ghost 는 Y 축(슬라이스의 첫 번째 축)을 따라 생긴다.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.ndimage import shift as nd_shift
from scipy.special import expit
from tqdm import tqdm

from common.models import SerializableMixin
from dataprep.manifest import (
    CLEAN_LABEL,
    EXTERNAL_SETS,
    MOTION_PREFIX,
    DatasetManifest,
    PatientEntry,
    ScanEntry,
    external_label,
    save_manifest,
)
from dataprep.schemas import MIN_VOLUME_DIM, PatientVolume
from dataprep.volumes import save_volume
from modules.autograd import RngStream
from utils.utils import sha256_file

logger = logging.getLogger("pipeline")

GHOST_AXIS = 1
IN_PLANE_AXES = (1, 2)
EDGE_SOFTNESS = 0.05
# jitter 를 적용한 뒤에도 replica 가 원본보다 밝지 않게
MAX_AMPLITUDE = 0.99
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class PhantomSpec(SerializableMixin):
    size: int = 64
    depth: int = 8
    ellipse_min: int = 3
    ellipse_max: int = 6
    ghost_count: int = 2
    ghost_spacing: int = 8
    # 0 은 null artifact 검증용으로 허용
    ghost_amplitude: float = 0.3
    amplitude_jitter: float = 0.2
    blur_sigma: float = 1.0
    corpus_size: int = 50
    motion_scans: int = 2
    # motion 스캔의 정수 in-plane 어긋남 최대값 (registration 확인용)
    misalignment: int = 0
    # true 면 세트 A-D 의 k-space segment 스캔 (sim-A ... sim-D) 도 쓴다
    external_scans: bool = False
    external_shift: int = 3
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.size < MIN_VOLUME_DIM or self.depth < MIN_VOLUME_DIM:
            raise ValueError(
                f"size and depth must be >= {MIN_VOLUME_DIM} "
                f"(got {self.size}, {self.depth})"
            )
        if not 1 <= self.ellipse_min <= self.ellipse_max:
            raise ValueError("need 1 <= ellipse_min <= ellipse_max")
        if not 0.0 <= self.ghost_amplitude < 1.0:
            raise ValueError(
                f"ghost_amplitude must be in [0, 1) "
                f"(got {self.ghost_amplitude})"
            )
        if not 0.0 <= self.amplitude_jitter < 1.0:
            raise ValueError("amplitude_jitter must be in [0, 1)")
        if self.ghost_spacing < 1 or self.ghost_count < 0:
            raise ValueError("ghost_spacing >= 1 and ghost_count >= 0")
        if min(self.blur_sigma, self.misalignment, self.external_shift) < 0:
            raise ValueError(
                "blur_sigma, misalignment and external_shift must be >= 0"
            )
        if self.corpus_size < 1 or self.motion_scans < 1:
            raise ValueError("corpus_size and motion_scans must be >= 1")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.depth, self.size, self.size)


@dataclass(frozen=True)
class ArtifactParams(SerializableMixin):
    """motion 스캔 하나의 ground-truth degradation 파라미터"""

    ghost_count: int
    ghost_spacing: int
    ghost_amplitude: float
    blur_sigma: float
    shift: tuple[int, int] = (0, 0)


def ghost_replicas(
    image: np.ndarray,
    count: int,
    spacing: int,
    amplitude: float,
    axis: int = 0,
) -> np.ndarray:
    """image + amplitude * (axis 방향으로 이동한 복사본) 을 count 개 더한다.

    j 번째 replica 의 offset 은 +s, -s, +2s, -2s, ... (s = spacing).
    FOV 밖으로 나간 부분은 반대편으로 접힌다 (np.roll).
    """
    out = np.array(image, dtype=np.float64)
    if count == 0 or amplitude == 0:
        return out
    source = out.copy()
    for j in range(1, count + 1):
        offset = spacing * math.ceil(j / 2) * (1 if j % 2 else -1)
        out += amplitude * np.roll(source, offset, axis=axis)
    return out


def degrade(clean: np.ndarray, params: ArtifactParams) -> np.ndarray:
    """ghost → in-plane blur → 정수 이동 → [0, 1] clip"""
    out = ghost_replicas(
        clean,
        params.ghost_count,
        params.ghost_spacing,
        params.ghost_amplitude,
        axis=GHOST_AXIS,
    )
    if params.blur_sigma > 0:
        sigma = [0.0] * out.ndim
        for axis in IN_PLANE_AXES:
            sigma[axis] = params.blur_sigma
        out = gaussian_filter(out, sigma, mode="nearest")
    if any(params.shift):
        offsets = [0.0] * out.ndim
        for axis, d in zip(IN_PLANE_AXES, params.shift):
            offsets[axis] = float(d)
        out = nd_shift(out, offsets, order=0, mode="constant", cval=0.0)
    return np.clip(out, 0.0, 1.0)


def make_clean_volume(spec: PhantomSpec, rng: RngStream) -> np.ndarray:
    """무작위 회전 타원체들의 합, [0, 1] clip"""
    x = np.linspace(-1.0, 1.0, spec.depth)
    yz = np.linspace(-1.0, 1.0, spec.size)
    X, Y, Z = np.meshgrid(x, yz, yz, indexing="ij")
    volume = np.zeros(spec.shape)
    count = int(rng.integers(spec.ellipse_min, spec.ellipse_max + 1))
    for _ in range(count):
        cy, cz = rng.uniform(-0.5, 0.5, (2,))
        ry, rz = rng.uniform(0.15, 0.45, (2,))
        cx = float(rng.uniform(-0.3, 0.3))
        rx = float(rng.uniform(0.8, 1.6))
        angle = float(rng.uniform(0.0, math.pi))
        intensity = float(rng.uniform(0.2, 0.6))
        u = (Y - cy) * math.cos(angle) + (Z - cz) * math.sin(angle)
        w = -(Y - cy) * math.sin(angle) + (Z - cz) * math.cos(angle)
        r = np.sqrt(((X - cx) / rx) ** 2 + (u / ry) ** 2 + (w / rz) ** 2)
        volume += intensity * expit((1.0 - r) / EDGE_SOFTNESS)
    return np.clip(volume, 0.0, 1.0)


def artifact_params(spec: PhantomSpec, rng: RngStream) -> ArtifactParams:
    u = float(rng.uniform(-1.0, 1.0))
    amplitude = spec.ghost_amplitude * (1.0 + spec.amplitude_jitter * u)
    shift = (0, 0)
    if spec.misalignment > 0:
        m = spec.misalignment
        dy, dz = rng.integers(-m, m + 1, (2,))
        shift = (int(dy), int(dz))
    return ArtifactParams(
        ghost_count=spec.ghost_count,
        ghost_spacing=spec.ghost_spacing,
        ghost_amplitude=min(amplitude, MAX_AMPLITUDE),
        blur_sigma=spec.blur_sigma,
        shift=shift,
    )


def external_set_shift(base: int, index: int) -> int:
    """세트 index 의 Y 방향 이동량: +s, -s, +2s, -2s, ..."""
    magnitude = base * (index // 2 + 1)
    return magnitude if index % 2 == 0 else -magnitude


def kspace_motion(
    clean: np.ndarray, shift: int, rng: RngStream
) -> tuple[np.ndarray, dict[str, Any]]:
    """k-space segment 조합으로 만든 외부 시뮬레이션 스캔.

    phase-encode 라인 중 연속 구간 하나를 Y 방향으로 shift 만큼 움직인
    상태의 k-space 에서 가져오고, 나머지는 원래 상태에서 가져온다.
    """
    axes = IN_PLANE_AXES
    lines = clean.shape[GHOST_AXIS]
    still = np.fft.fftshift(np.fft.fft2(clean, axes=axes), axes=axes)
    moved_image = np.roll(clean, shift, axis=GHOST_AXIS)
    moved = np.fft.fftshift(np.fft.fft2(moved_image, axes=axes), axes=axes)

    length = int(rng.integers(lines // 4, lines // 2 + 1))
    start = int(rng.integers(0, lines - length + 1))
    composite = still.copy()
    index = [slice(None)] * clean.ndim
    index[GHOST_AXIS] = slice(start, start + length)
    composite[tuple(index)] = moved[tuple(index)]

    image = np.fft.ifft2(np.fft.ifftshift(composite, axes=axes), axes=axes)
    params = {
        "kind": "kspace-segment",
        "shift": shift,
        "segment": [start, start + length],
    }
    return np.clip(np.abs(image), 0.0, 1.0), params


def _write_scan(
    root: Path,
    patient_id: str,
    label: str,
    voxels: np.ndarray,
    params: dict[str, Any],
) -> ScanEntry:
    relative = f"{patient_id}/{label}.raw"
    path = root / relative
    volume = PatientVolume(
        patient_id=patient_id,
        scan_label=label,
        voxels=voxels,
        source_path=str(path),
    )
    save_volume(volume, path)
    return ScanEntry(
        label=label, path=relative, sha256=sha256_file(path), params=params
    )


def generate_phantom(
    spec: PhantomSpec,
    out_dir: str | Path,
    seed: int = 0,
    progress: bool = False,
) -> DatasetManifest:
    """clean + motion{1..} (+ sim-A ... sim-D) 볼륨과 manifest 를 쓴다.

    환자 i 는 RngStream(seed).split(i) 만 쓰므로 corpus_size 를 늘려도
    앞쪽 환자는 그대로다. spec.seed 가 있으면 seed 인자보다 우선한다.
    """
    root = Path(out_dir)
    base = RngStream(spec.seed if spec.seed is not None else seed)
    patients = []
    ids = range(spec.corpus_size)
    for i in tqdm(ids, desc="phantom", disable=not progress):
        patient_id = f"phantom-{i:03d}"
        rng = base.split(i)
        clean = make_clean_volume(spec, rng)
        scans = [_write_scan(root, patient_id, CLEAN_LABEL, clean, {})]
        for m in range(1, spec.motion_scans + 1):
            params = artifact_params(spec, rng)
            scans.append(
                _write_scan(
                    root,
                    patient_id,
                    f"{MOTION_PREFIX}{m}",
                    degrade(clean, params),
                    params.to_json_dict(),
                )
            )
        if spec.external_scans:
            for index, name in enumerate(EXTERNAL_SETS):
                shift = external_set_shift(spec.external_shift, index)
                voxels, params = kspace_motion(clean, shift, rng)
                params["set"] = name
                scans.append(
                    _write_scan(
                        root, patient_id, external_label(name), voxels, params
                    )
                )
        patients.append(PatientEntry(patient_id=patient_id, scans=scans))

    manifest = DatasetManifest(
        name="phantom",
        patients=patients,
        meta={"spec": spec.to_json_dict(), "seed": base.seed},
        root=root,
    )
    save_manifest(manifest, root / MANIFEST_NAME)
    logger.info(
        "phantom corpus written to %s (%d patients, %d motion scans each)",
        root,
        spec.corpus_size,
        spec.motion_scans,
    )
    return manifest
