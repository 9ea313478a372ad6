class NetworkError(Exception):
    """U-Net 구성/학습/체크포인트 관련 기본 예외 클래스"""

    pass


class InvalidConfigError(NetworkError):
    """UNetConfig / TrainerConfig 값이 유효하지 않을 때"""

    pass


class CheckpointFormatError(NetworkError):
    """체크포인트 파일 구조나 파라미터 registry 가 config 와 맞지 않을 때"""

    pass


class PatientOverlapError(NetworkError):
    """train / validation 세트가 같은 환자를 공유할 때"""

    pass


class DivergenceError(NetworkError):
    """학습 중 loss 또는 gradient 가 유한하지 않게 됐을 때"""

    def __init__(self, message: str, epoch: int, step: int):
        self.epoch = epoch
        self.step = step
        super().__init__(f"{message} (epoch {epoch}, step {step})")
