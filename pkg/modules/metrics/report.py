"""슬라이스별 지표 레코드와 mean ± std 집계, CSV 직렬화.

집계는 두 단계다: 환자별로 슬라이스 평균/표준편차를 낸 뒤, 환자 평균들의
평균/표준편차를 전체(overall) 값으로 쓴다. 합은 math.fsum 으로 계산해서
레코드 순서와 무관하게 같은 값이 나온다. 표준편차는 표본(n-1) 기준이다.
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from common.models import SerializableMixin
from modules.metrics.errors import nmse, psnr
from modules.metrics.exceptions import ReportSchemaError, ZeroReferenceError
from modules.metrics.schemas import MetricConfig
from modules.metrics.ssim import DEFAULT_CONFIG, ssim

RECORD_COLUMNS = ("patient", "plane", "slice", "ssim", "nmse", "psnr")
SUMMARY_COLUMNS = ("scope", "metric", "mean", "std")
METRICS = ("ssim", "nmse", "psnr")


def format_float(value: float) -> str:
    """CSV 용 고정 표현 (재실행 시 바이트 동일)"""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".10g")


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """(평균, 표본 표준편차). 유한값만 쓰고, 원소가 하나면 std 0.

    PSNR 의 inf(완전 일치)와 NMSE 의 inf(기준 에너지 0)는 제외한다. 유한값이 하나도 없으면 (inf, 0).
    """
    finite = [float(v) for v in values if math.isfinite(v)]
    if not finite:
        return (math.inf if values else math.nan), 0.0
    n = len(finite)
    mean = math.fsum(finite) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in finite) / (n - 1)
    return mean, math.sqrt(var)


def nmse_or_inf(output: Any, reference: Any, convention: str) -> float:
    """기준 에너지가 0 인 슬라이스(배경만 있는 슬라이스)는 inf 로 기록.

    inf 는 mean_std 에서 빠지므로 집계에는 들어가지 않는다.
    """
    try:
        return nmse(output, reference, convention)
    except ZeroReferenceError:
        return math.inf


@dataclass(frozen=True)
class MetricRecord(SerializableMixin):
    patient: str
    plane: str
    slice: int
    ssim: float
    nmse: float
    psnr: float

    def value(self, metric: str) -> float:
        return float(getattr(self, metric))


@dataclass(frozen=True)
class SummaryRow(SerializableMixin):
    scope: str
    metric: str
    mean: float
    std: float


@dataclass
class MetricsReport:
    records: list[MetricRecord] = field(default_factory=list)

    def add(self, record: MetricRecord) -> None:
        self.records.append(record)

    def add_pair(
        self,
        patient: str,
        plane: str,
        index: int,
        output: Any,
        reference: Any,
        cfg: MetricConfig = DEFAULT_CONFIG,
    ) -> MetricRecord:
        """(출력, 기준) 한 쌍의 세 지표를 계산해 레코드로 추가"""
        record = MetricRecord(
            patient=patient,
            plane=plane,
            slice=int(index),
            ssim=ssim(output, reference, cfg),
            nmse=nmse_or_inf(output, reference, cfg.nmse_convention),
            psnr=psnr(output, reference, cfg),
        )
        self.add(record)
        return record

    def patient_ids(self) -> list[str]:
        return sorted({r.patient for r in self.records})

    def summary(self) -> list[SummaryRow]:
        """환자별 행 + overall 행. 순서: 환자 id 정렬, metric 고정 순서."""
        rows: list[SummaryRow] = []
        per_patient: dict[str, dict[str, float]] = {}
        for patient in self.patient_ids():
            records = [r for r in self.records if r.patient == patient]
            per_patient[patient] = {}
            for metric in METRICS:
                mean, std = mean_std([r.value(metric) for r in records])
                per_patient[patient][metric] = mean
                rows.append(
                    SummaryRow(f"patient:{patient}", metric, mean, std)
                )
        for metric in METRICS:
            mean, std = mean_std([m[metric] for m in per_patient.values()])
            rows.append(SummaryRow("overall", metric, mean, std))
        return rows

    def overall(self, metric: str) -> tuple[float, float]:
        for row in self.summary():
            if row.scope == "overall" and row.metric == metric:
                return row.mean, row.std
        raise KeyError(metric)

    # ------------------------------------------------------------------
    # CSV
    # ------------------------------------------------------------------

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(RECORD_COLUMNS)
            for r in self.records:
                writer.writerow(
                    [
                        r.patient,
                        r.plane,
                        r.slice,
                        format_float(r.ssim),
                        format_float(r.nmse),
                        format_float(r.psnr),
                    ]
                )
        return path

    def write_summary_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(SUMMARY_COLUMNS)
            for row in self.summary():
                writer.writerow(
                    [
                        row.scope,
                        row.metric,
                        format_float(row.mean),
                        format_float(row.std),
                    ]
                )
        return path

    def write(self, path: str | Path) -> tuple[Path, Path]:
        """`<name>.csv` 와 `<name>_summary.csv` 를 함께 쓴다."""
        path = Path(path)
        summary_path = path.with_name(f"{path.stem}_summary.csv")
        return self.write_csv(path), self.write_summary_csv(summary_path)

    @classmethod
    def read_csv(cls, path: str | Path) -> "MetricsReport":
        rows = read_rows(path, RECORD_COLUMNS)
        try:
            records = [
                MetricRecord(
                    patient=row["patient"],
                    plane=row["plane"],
                    slice=int(row["slice"]),
                    ssim=float(row["ssim"]),
                    nmse=float(row["nmse"]),
                    psnr=float(row["psnr"]),
                )
                for row in rows
            ]
        except ValueError as e:
            raise ReportSchemaError(f"{path}: bad value ({e})") from e
        return cls(records=records)

    @classmethod
    def from_records(cls, records: Iterable[MetricRecord]) -> "MetricsReport":
        return cls(records=list(records))


def read_rows(
    path: str | Path, required: Sequence[str]
) -> list[dict[str, str]]:
    """CSV 를 dict 행으로 읽고 필수 컬럼이 모두 있는지 검사"""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise ReportSchemaError(f"{path}: missing columns {missing}")
        return list(reader)
