import gzip
import os
import shutil
from logging.handlers import TimedRotatingFileHandler


# https://docs.python.org/3/howto/logging-cookbook.html 참조
class GzipTimedRotatingFileHandler(TimedRotatingFileHandler):
    """자정 로테이션 시 이전 학습/시뮬레이션 로그를 gzip 으로 압축하는 핸들러.

    --out 으로 run 디렉토리를 바꿔 가며 실행하므로 로그 파일의 상위 디렉토리가
    없으면 먼저 만든다.
    """

    def __init__(self, filename: str, *args, **kwargs):
        parent = os.path.dirname(os.path.abspath(filename))
        os.makedirs(parent, exist_ok=True)
        super().__init__(filename, *args, **kwargs)
        self.namer = self._gzip_namer
        self.rotator = self._gzip_rotator

    @staticmethod
    def _gzip_namer(name: str) -> str:
        return name + ".gz"

    @staticmethod
    def _gzip_rotator(source: str, dest: str) -> None:
        with open(source, "rb") as f_in:
            with gzip.open(dest, "wb") as f_out:
                shutil.copyfileobj(f_in, f_out)
        os.remove(source)
