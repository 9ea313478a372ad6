"""여러 metrics CSV 를 그룹별로 모아 summary.csv / plotdata.csv 를 만든다.

그룹 키는 CSV 컬럼(plane, patient 등) 또는 파일에 붙인 tag(file, pair,
patients, source, run) 중에서 고른다. summary 는 그룹당 한 행이고 지표별
평균과 표본 표준편차(n-1)를 슬라이스 레코드 단위로 계산한다.
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from modules.metrics.exceptions import ReportSchemaError
from modules.metrics.report import (
    METRICS,
    RECORD_COLUMNS,
    format_float,
    mean_std,
    read_rows,
)

logger = logging.getLogger("pipeline")

SUMMARY_NAME = "summary.csv"
PLOTDATA_NAME = "plotdata.csv"


@dataclass(frozen=True)
class ReportSource:
    path: Path
    tags: dict[str, Any] = field(default_factory=dict)


def _header(path: Path) -> tuple[str, ...]:
    with open(path, newline="", encoding="utf-8") as f:
        return tuple(next(csv.reader(f), []))


def _sort_key(value: str) -> tuple[int, Any]:
    # "10" < "30" < "50" 처럼 숫자 tag 는 숫자로 정렬
    try:
        return (0, float(value))
    except ValueError:
        return (1, value)


def _group_value(
    key: str, row: dict[str, str], tags: dict[str, Any], path: Path
) -> str:
    if key in tags:
        return str(tags[key])
    if key in row:
        return row[key]
    raise ReportSchemaError(f"{path}: no column or tag named {key!r}")


def collect(
    sources: Sequence[ReportSource], group_by: Sequence[str]
) -> dict[tuple[str, ...], list[dict[str, float]]]:
    """그룹 키 → 레코드(지표 값) 목록. 모든 CSV 의 header 가 같아야 한다."""
    if not sources:
        raise ReportSchemaError("emit_report needs at least one metrics CSV")
    groups: dict[tuple[str, ...], list[dict[str, float]]] = {}
    expected: tuple[str, ...] | None = None
    for source in sources:
        header = _header(source.path)
        if expected is None:
            expected = header
        elif header != expected:
            raise ReportSchemaError(
                f"{source.path}: columns {list(header)} differ from "
                f"{list(expected)}"
            )
        for row in read_rows(source.path, RECORD_COLUMNS):
            key = tuple(
                _group_value(k, row, source.tags, source.path)
                for k in group_by
            )
            try:
                values = {m: float(row[m]) for m in METRICS}
            except ValueError as e:
                raise ReportSchemaError(
                    f"{source.path}: bad value ({e})"
                ) from e
            groups.setdefault(key, []).append(values)
    return dict(
        sorted(
            groups.items(),
            key=lambda item: tuple(_sort_key(v) for v in item[0]),
        )
    )


def emit_report(
    sources: Sequence[ReportSource],
    group_by: Sequence[str],
    out_dir: str | Path,
) -> tuple[Path, Path]:
    group_by = list(group_by)
    groups = collect(sources, group_by)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    summary_path = out_dir / SUMMARY_NAME
    with open(summary_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        stats = [f"{m}_{s}" for m in METRICS for s in ("mean", "std")]
        writer.writerow([*group_by, "n", *stats])
        for key, records in groups.items():
            row = [*key, len(records)]
            for metric in METRICS:
                mean, std = mean_std([r[metric] for r in records])
                row += [format_float(mean), format_float(std)]
            writer.writerow(row)

    plot_path = out_dir / PLOTDATA_NAME
    with open(plot_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([*group_by, "metric", "value"])
        for key, records in groups.items():
            for metric in METRICS:
                for r in records:
                    writer.writerow([*key, metric, format_float(r[metric])])

    logger.info(
        "report: %d groups from %d CSV files → %s",
        len(groups),
        len(sources),
        out_dir,
    )
    return summary_path, plot_path
