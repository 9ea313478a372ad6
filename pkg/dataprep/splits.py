import logging
from typing import Sequence

from dataprep.exceptions import InsufficientPatientsError
from dataprep.schemas import SPLIT_NAMES, SplitPlan
from modules.autograd import RngStream

logger = logging.getLogger("dataprep")

# ddpm_train, ddpm_val, unet_train, unet_val, test
DEFAULT_COUNTS = (30, 15, 30, 15, 54)


def split_by_patient(
    patient_ids: Sequence[str],
    counts: Sequence[int] = DEFAULT_COUNTS,
    seed: int = 0,
) -> SplitPlan:
    """seed 로 섞은 뒤 앞에서부터 counts 만큼 잘라 다섯 집합에 배정.

    입력 순서와 무관하도록 정렬한 다음 섞는다. 남는 환자는 어디에도 안 들어간다.
    """
    if len(counts) != len(SPLIT_NAMES):
        raise ValueError(
            f"counts needs {len(SPLIT_NAMES)} entries {SPLIT_NAMES}, "
            f"got {len(counts)}"
        )
    if any(c < 0 for c in counts):
        raise ValueError(f"counts must be non-negative: {tuple(counts)}")
    ids = sorted(set(patient_ids))
    if len(ids) != len(patient_ids):
        raise ValueError("patient ids must be unique")
    if sum(counts) > len(ids):
        raise InsufficientPatientsError(
            f"requested {sum(counts)} patients {tuple(counts)}, "
            f"only {len(ids)} available"
        )
    order = RngStream(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    assigned: dict[str, list[str]] = {}
    start = 0
    for name, count in zip(SPLIT_NAMES, counts):
        assigned[name] = shuffled[start : start + count]
        start += count
    plan = SplitPlan(seed=seed, **assigned)
    logger.info(
        "split %d patients (seed=%d): %s",
        len(ids),
        seed,
        {name: len(v) for name, v in assigned.items()},
    )
    return plan
