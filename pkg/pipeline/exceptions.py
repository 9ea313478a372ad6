class PipelineError(Exception):
    """CLI 단계 실행 관련 기본 예외 클래스"""

    pass


class ConfigError(PipelineError):
    """RunConfig 파일이나 --set override 가 유효하지 않을 때"""

    pass


class MissingArtifactError(PipelineError):
    """앞 단계 산출물(체크포인트, pair, split 등)이 없을 때"""

    pass


class ManifestMismatchError(PipelineError):
    """입력 파일 해시가 run manifest 에 기록된 값과 다를 때"""

    pass
