"""(clean, degraded) 학습 pair 구성.

- diffusion-simulated: clean 슬라이스 하나당 k 번 시뮬레이션
- real: 등록(registration)한 실제 motion 스캔과 clean 스캔
- external-simulated: manifest 의 sim-* 스캔과 clean 스캔
"""

import dataclasses
import logging
import multiprocessing
from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence

import numpy as np
from tqdm import tqdm

from dataprep.exceptions import PairingError, SimulationFailedError
from dataprep.manifest import external_label
from dataprep.registration import DEFAULT_MAX_SHIFT, register_rigid
from dataprep.schemas import (
    PROVENANCE_DIFFUSION,
    PROVENANCE_EXTERNAL,
    PROVENANCE_REAL,
    ImageSlice,
    PairedSample,
)
from diffusion.predictors import NoisePredictor
from diffusion.sampler import simulate_batch
from diffusion.schemas import SimulationParams, VarianceSchedule
from modules.autograd import RngStream
from utils.utils import split_list

logger = logging.getLogger("dataprep")

DEFAULT_VARIANTS = 2
DEFAULT_BATCH_SIZE = 16


class MotionSimulator(Protocol):
    """variant 번째 설정으로 (N, H, W) 배치를 시뮬레이션한다."""

    def simulate(
        self,
        images: np.ndarray,
        variant: int,
        rngs: Sequence[RngStream],
    ) -> np.ndarray: ...


@dataclass
class DiffusionSimulator:
    """학습된 DDPM 으로 partial diffusion 시뮬레이션.

    params 가 [J, Z] 이면 variant 0 은 J, variant 1 은 Z 로 만든다.
    variant 수가 params 보다 많으면 순환한다.
    """

    predictor: NoisePredictor
    schedule: VarianceSchedule
    params: list[SimulationParams]
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.params:
            raise ValueError("DiffusionSimulator needs at least one preset")

    def params_for(self, variant: int) -> SimulationParams:
        return self.params[variant % len(self.params)]

    def simulate(
        self,
        images: np.ndarray,
        variant: int,
        rngs: Sequence[RngStream],
    ) -> np.ndarray:
        return simulate_batch(
            images,
            self.params_for(variant),
            self.predictor,
            self.schedule,
            rngs,
            **self.options,
        )


@dataclass
class _Chunk:
    variant: int
    positions: list[int]
    images: np.ndarray
    rngs: list[RngStream]
    keys: list[tuple[str, str, int]]


def _run_chunk(
    simulator: MotionSimulator, chunk: _Chunk
) -> tuple[_Chunk, np.ndarray]:
    try:
        out = simulator.simulate(chunk.images, chunk.variant, chunk.rngs)
    except Exception as e:
        raise SimulationFailedError(
            f"simulation failed for variant {chunk.variant}: {e}",
            chunk.keys,
        ) from e
    return chunk, np.asarray(out, dtype=np.float64)


def _run_chunks(
    simulator: MotionSimulator, chunks: list[_Chunk]
) -> list[tuple[_Chunk, np.ndarray]]:
    # worker 프로세스 하나가 chunk 묶음 하나를 순서대로 처리
    return [_run_chunk(simulator, chunk) for chunk in chunks]


def _make_chunks(
    clean: Sequence[ImageSlice], k: int, rng: RngStream, batch_size: int
) -> list[_Chunk]:
    """같은 variant, 같은 shape 끼리 batch_size 단위로 묶는다."""
    groups: dict[tuple[int, tuple[int, int]], list[int]] = {}
    for i, item in enumerate(clean):
        for v in range(k):
            groups.setdefault((v, item.shape), []).append(i)
    chunks = []
    for (v, _), positions in groups.items():
        for start in range(0, len(positions), batch_size):
            part = positions[start : start + batch_size]
            chunks.append(
                _Chunk(
                    variant=v,
                    positions=part,
                    images=np.stack([clean[i].pixels for i in part]),
                    # (slice, variant) 마다 독립 스트림: 배치 구성과 무관
                    rngs=[rng.split(i * k + v) for i in part],
                    keys=[clean[i].key for i in part],
                )
            )
    return chunks


def build_pairs(
    clean: Sequence[ImageSlice],
    simulator: MotionSimulator,
    k: int = DEFAULT_VARIANTS,
    rng: RngStream | None = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
    workers: int = 1,
    progress: bool = False,
) -> list[PairedSample]:
    """clean 슬라이스마다 k 개의 diffusion-simulated pair.

    출력 순서는 (슬라이스 순서, variant) 로 고정이며 workers 수와 무관하다.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1 (got {k})")
    if not clean:
        return []
    rng = rng or RngStream(0)
    chunks = _make_chunks(clean, k, rng, batch_size)

    results: list[tuple[_Chunk, np.ndarray]] = []
    if workers > 1 and len(chunks) > 1:
        parts = [p for p in split_list(chunks, workers) if p]
        logger.info(
            "simulating %d slices x %d variants on %d processes",
            len(clean),
            k,
            len(parts),
        )
        with multiprocessing.Pool(processes=len(parts)) as pool:
            for done in pool.starmap(
                _run_chunks, [(simulator, part) for part in parts]
            ):
                results.extend(done)
    else:
        for chunk in tqdm(chunks, desc="build pairs", disable=not progress):
            results.append(_run_chunk(simulator, chunk))
            logger.debug(
                "simulated batch of %d (variant %d)",
                len(chunk.positions),
                chunk.variant,
            )

    degraded: dict[tuple[int, int], np.ndarray] = {}
    for chunk, out in results:
        for j, i in enumerate(chunk.positions):
            degraded[(i, chunk.variant)] = out[j]

    pairs = [
        PairedSample(
            clean=item,
            degraded=dataclasses.replace(
                item, pixels=degraded[(i, v)], scan_label=f"dima-{v}"
            ),
            provenance=PROVENANCE_DIFFUSION,
            variant=v,
        )
        for i, item in enumerate(clean)
        for v in range(k)
    ]
    logger.info("built %d diffusion-simulated pairs", len(pairs))
    return pairs


def _match(
    clean: Sequence[ImageSlice],
    degraded: Sequence[ImageSlice],
) -> list[tuple[ImageSlice, ImageSlice, int]]:
    """degraded 슬라이스마다 같은 key 의 clean 을 찾는다.

    variant 는 같은 key 안에서 scan label 정렬 순서.
    """
    by_key = {item.key: item for item in clean}
    labels: dict[tuple[str, str, int], list[str]] = {}
    for item in degraded:
        labels.setdefault(item.key, []).append(item.scan_label)
    matched = []
    for item in degraded:
        if item.key not in by_key:
            raise PairingError(f"no clean slice for {item.key}")
        variant = sorted(labels[item.key]).index(item.scan_label)
        matched.append((by_key[item.key], item, variant))
    return matched


def build_real_pairs(
    clean: Sequence[ImageSlice],
    motion: Sequence[ImageSlice],
    max_shift: int | None = DEFAULT_MAX_SHIFT,
) -> list[PairedSample]:
    """실제 motion 스캔 pair. max_shift=None 이면 registration 생략."""
    pairs = []
    for fixed, moving, variant in _match(clean, motion):
        if max_shift is not None:
            moving, _ = register_rigid(moving, fixed, max_shift)
        pairs.append(
            PairedSample(
                clean=fixed,
                degraded=moving,
                provenance=PROVENANCE_REAL,
                variant=variant,
            )
        )
    logger.info("built %d real pairs", len(pairs))
    return pairs


def build_external_pairs(
    clean: Sequence[ImageSlice],
    simulated: Sequence[ImageSlice],
    sets: str | None = None,
) -> list[PairedSample]:
    """외부 시뮬레이터가 만든 스캔(sim-*) pair. 이미 정렬돼 있다고 본다.

    sets 가 "BC" 처럼 주어지면 sim-B, sim-C 스캔만 쓴다.
    """
    if sets is not None:
        wanted = {external_label(name) for name in sets}
        simulated = [s for s in simulated if s.scan_label in wanted]
        missing = wanted - {s.scan_label for s in simulated}
        if missing:
            raise PairingError(f"no external scans for {sorted(missing)}")
    pairs = [
        PairedSample(
            clean=fixed,
            degraded=moving,
            provenance=PROVENANCE_EXTERNAL,
            variant=variant,
        )
        for fixed, moving, variant in _match(clean, simulated)
    ]
    logger.info("built %d external-simulated pairs", len(pairs))
    return pairs
