class DataPrepError(Exception):
    """볼륨/슬라이스 전처리 및 데이터셋 구성 관련 기본 예외 클래스"""

    pass


class InvalidVolumeError(DataPrepError):
    """볼륨 차원이 너무 작거나 값이 유한하지 않을 때"""

    pass


class InsufficientPatientsError(DataPrepError):
    """요청한 split 크기 합이 환자 수보다 클 때"""

    pass


class PairingError(DataPrepError):
    """clean / degraded 슬라이스의 (환자, plane, index) 가 맞지 않을 때"""

    pass


class SimulationFailedError(DataPrepError):
    """pair 생성 중 시뮬레이터가 실패했을 때 (실패한 슬라이스 정보 포함)"""

    def __init__(self, message: str, slices: list[tuple[str, str, int]]):
        # args 에 둘 다 넣어야 worker 프로세스에서 pickle 로 넘어온다
        super().__init__(message, slices)
        self.message = message
        self.slices = slices

    def __str__(self) -> str:
        return f"{self.message} (slices: {self.slices})"
