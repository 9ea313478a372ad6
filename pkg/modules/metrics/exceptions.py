class MetricError(Exception):
    """이미지 품질 지표 관련 기본 예외 클래스"""

    pass


class MetricShapeError(MetricError):
    """두 이미지 shape 이 다르거나 SSIM window 가 이미지보다 클 때"""

    pass


class ZeroReferenceError(MetricError):
    """NMSE 기준 이미지의 norm(또는 분산)이 0 일 때"""

    pass


class ReportSchemaError(MetricError):
    """metrics CSV 헤더/컬럼이 기대한 스키마와 다를 때"""

    pass
