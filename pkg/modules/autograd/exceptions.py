class AutogradError(Exception):
    """autograd 관련 기본 예외 클래스"""

    pass


class ShapeMismatchError(AutogradError):
    """연산 입력 shape 이 연산 시그니처와 맞지 않을 때 발생하는 예외"""

    def __init__(
        self, op: str, shapes: list[tuple[int, ...]], detail: str = ""
    ):
        self.op = op
        self.shapes = shapes
        message = f"shape mismatch in {op}: {shapes}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class NonFiniteError(AutogradError):
    """연산 결과(또는 gradient)에 NaN/Inf 가 생겼을 때 발생하는 예외"""

    def __init__(self, where: str):
        self.where = where
        super().__init__(f"non-finite value produced by {where}")


class UnsupportedOpError(AutogradError):
    """gradient 가 정의되지 않은 연산이 역전파 경로에 있을 때 발생하는 예외"""

    pass


class UnboundLeafError(AutogradError):
    """평가에 필요한 leaf(param/input)가 bindings 에 없을 때 발생하는 예외"""

    pass


class NonScalarRootError(AutogradError):
    """gradient 의 root 가 scalar 가 아닐 때 발생하는 예외"""

    pass
