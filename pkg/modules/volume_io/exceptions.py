class VolumeFormatError(Exception):
    """볼륨 파일(NIfTI / raw tensor) 형식 관련 기본 예외 클래스"""

    pass


class BadMagicError(VolumeFormatError):
    """magic bytes 가 기대한 값이 아닐 때"""

    pass


class UnsupportedDatatypeError(VolumeFormatError):
    """지원하지 않는 voxel datatype / dtype"""

    pass


class TruncatedDataError(VolumeFormatError):
    """헤더가 선언한 크기보다 파일이 짧을 때"""

    pass
