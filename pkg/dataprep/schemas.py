from dataclasses import dataclass, field
from typing import Any

import numpy as np

from common.models import SerializableMixin
from dataprep.exceptions import InvalidVolumeError, PairingError

PLANES = ("sagittal", "transversal", "coronal")
# X=sagittal, Y=coronal, Z=transversal (저장된 축 순서 기준)
PLANE_AXIS = {"sagittal": 0, "coronal": 1, "transversal": 2}

PROVENANCE_REAL = "real"
PROVENANCE_DIFFUSION = "diffusion-simulated"
PROVENANCE_EXTERNAL = "external-simulated"
PROVENANCES = (PROVENANCE_REAL, PROVENANCE_DIFFUSION, PROVENANCE_EXTERNAL)

MIN_VOLUME_DIM = 8


@dataclass(frozen=True, eq=False)
class PatientVolume:
    patient_id: str
    scan_label: str
    voxels: np.ndarray
    source_path: str = ""
    # normalize 이전 원래 min/max (정규화 전이면 None)
    norm_min: float | None = None
    norm_max: float | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.voxels.ndim != 3:
            raise InvalidVolumeError(
                f"{self.patient_id}/{self.scan_label}: expected 3D volume, "
                f"got shape {self.voxels.shape}"
            )
        if min(self.voxels.shape) < MIN_VOLUME_DIM:
            raise InvalidVolumeError(
                f"{self.patient_id}/{self.scan_label}: all dims must be "
                f">= {MIN_VOLUME_DIM} (got {self.voxels.shape})"
            )
        if not np.all(np.isfinite(self.voxels)):
            raise InvalidVolumeError(
                f"{self.patient_id}/{self.scan_label}: non-finite voxels"
            )

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.voxels.shape)  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class ImageSlice:
    pixels: np.ndarray
    plane: str
    patient_id: str
    scan_label: str
    index: int
    norm_min: float | None = None
    norm_max: float | None = None

    @property
    def key(self) -> tuple[str, str, int]:
        """(patient, plane, index) : pair 양쪽이 공유해야 하는 식별자"""
        return (self.patient_id, self.plane, self.index)

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(self.pixels.shape)  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class PairedSample:
    clean: ImageSlice
    degraded: ImageSlice
    provenance: str
    variant: int = 0

    def __post_init__(self) -> None:
        if self.clean.key != self.degraded.key:
            raise PairingError(
                f"pair sides differ: {self.clean.key} vs {self.degraded.key}"
            )
        if self.clean.shape != self.degraded.shape:
            raise PairingError(
                f"{self.clean.key}: shape {self.clean.shape} vs "
                f"{self.degraded.shape}"
            )
        if self.provenance not in PROVENANCES:
            raise PairingError(f"unknown provenance: {self.provenance}")

    @property
    def patient_id(self) -> str:
        return self.clean.patient_id

    @property
    def key(self) -> tuple[str, str, int]:
        return self.clean.key


SPLIT_NAMES = ("ddpm_train", "ddpm_val", "unet_train", "unet_val", "test")


@dataclass
class SplitPlan(SerializableMixin):
    ddpm_train: list[str] = field(default_factory=list)
    ddpm_val: list[str] = field(default_factory=list)
    unet_train: list[str] = field(default_factory=list)
    unet_val: list[str] = field(default_factory=list)
    test: list[str] = field(default_factory=list)
    seed: int = 0

    def sets(self) -> dict[str, list[str]]:
        return {name: getattr(self, name) for name in SPLIT_NAMES}

    def is_disjoint(self) -> bool:
        seen: set[str] = set()
        for ids in self.sets().values():
            if seen & set(ids):
                return False
            seen |= set(ids)
        return True

    def split_of(self, patient_id: str) -> str | None:
        for name, ids in self.sets().items():
            if patient_id in ids:
                return name
        return None
