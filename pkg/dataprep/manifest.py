"""데이터셋 manifest: 환자 → scan 파일 → label.

{"name": ..., "patients": [{"patient_id": ..., "scans": [
    {"label": "clean", "path": "p000/clean.raw", "sha256": ..., "params": {}}
]}]}

path 는 manifest 파일 기준 상대 경로.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from common.models import SerializableMixin
from dataprep.exceptions import DataPrepError
from dataprep.schemas import PatientVolume
from dataprep.volumes import load_volume
from utils.utils import canonical_json, sha256_file

logger = logging.getLogger("dataprep")

CLEAN_LABEL = "clean"
MOTION_PREFIX = "motion"
EXTERNAL_PREFIX = "sim-"
# 따로 시뮬레이션된 motion 세트 이름 (sim-A ... sim-D)
EXTERNAL_SETS = "ABCD"


def external_label(name: str) -> str:
    return f"{EXTERNAL_PREFIX}{name}"


@dataclass
class ScanEntry(SerializableMixin):
    label: str
    path: str
    sha256: str = ""
    # phantom 의 ground-truth degradation 파라미터 등
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class PatientEntry(SerializableMixin):
    patient_id: str
    scans: list[ScanEntry] = field(default_factory=list)

    def labels(self) -> list[str]:
        return [scan.label for scan in self.scans]

    def scan(self, label: str) -> ScanEntry:
        for scan in self.scans:
            if scan.label == label:
                return scan
        raise DataPrepError(f"{self.patient_id}: no scan labelled {label}")


@dataclass
class DatasetManifest(SerializableMixin):
    name: str = ""
    patients: list[PatientEntry] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)
    # 로드한 manifest 파일 위치 (직렬화하지 않음)
    root: Path = field(default=Path("."), repr=False, compare=False)

    def to_json_dict(self) -> dict[str, Any]:
        data = self.to_dict()
        data.pop("root", None)
        return json.loads(json.dumps(data))

    def patient_ids(self) -> list[str]:
        return [p.patient_id for p in self.patients]

    def patient(self, patient_id: str) -> PatientEntry:
        for p in self.patients:
            if p.patient_id == patient_id:
                return p
        raise DataPrepError(f"unknown patient: {patient_id}")

    def labels_with_prefix(self, patient_id: str, prefix: str) -> list[str]:
        return sorted(
            label
            for label in self.patient(patient_id).labels()
            if label.startswith(prefix)
        )

    def motion_labels(self, patient_id: str) -> list[str]:
        return self.labels_with_prefix(patient_id, MOTION_PREFIX)

    def external_labels(self, patient_id: str) -> list[str]:
        return self.labels_with_prefix(patient_id, EXTERNAL_PREFIX)

    def scan_path(self, patient_id: str, label: str) -> Path:
        return self.root / self.patient(patient_id).scan(label).path

    def load(self, patient_id: str, label: str) -> PatientVolume:
        return load_volume(
            self.scan_path(patient_id, label),
            patient_id=patient_id,
            scan_label=label,
        )

    def verify(self) -> list[str]:
        """sha256 가 기록된 scan 중 내용이 바뀐 파일 목록"""
        mismatched = []
        for p in self.patients:
            for scan in p.scans:
                path = self.root / scan.path
                if scan.sha256 and sha256_file(path) != scan.sha256:
                    mismatched.append(str(path))
        return mismatched


def save_manifest(manifest: DatasetManifest, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        canonical_json(manifest.to_json_dict()) + "\n", encoding="utf-8"
    )
    return path


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except (ValueError, UnicodeDecodeError) as e:
        raise DataPrepError(f"{path}: invalid manifest JSON ({e})") from e
    manifest = DatasetManifest.from_dict(data)
    manifest.root = path.parent
    ids = manifest.patient_ids()
    if len(set(ids)) != len(ids):
        raise DataPrepError(f"{path}: duplicate patient ids")
    logger.info("loaded manifest %s (%d patients)", path, len(ids))
    return manifest
