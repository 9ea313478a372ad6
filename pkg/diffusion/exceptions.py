class DiffusionError(Exception):
    """diffusion(스케줄, 샘플링, 모션 시뮬레이션) 관련 기본 예외 클래스"""

    pass


class InvalidScheduleError(DiffusionError):
    """T 또는 beta 범위가 유효하지 않을 때"""

    pass


class TimestepOutOfRangeError(DiffusionError):
    """timestep t 또는 partial step n 이 스케줄 범위를 벗어날 때"""

    pass


class UnnormalizedInputError(DiffusionError):
    """입력 이미지가 [0, 1] (허용 오차 1e-6) 범위를 벗어날 때"""

    pass


class EmptyBatchError(DiffusionError):
    """ddpm_loss 에 빈 배치가 들어왔을 때"""

    pass
