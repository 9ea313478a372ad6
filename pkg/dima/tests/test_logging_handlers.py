import gzip
import os
import tempfile

from dima.logging_handlers import GzipTimedRotatingFileHandler


class TestGzipTimedRotatingFileHandler:
    def test_gzip_namer_appends_gz_extension(self):
        result = GzipTimedRotatingFileHandler._gzip_namer(
            "training.log.2026-02-22"
        )
        assert result == "training.log.2026-02-22.gz"

    def test_gzip_rotator_compresses_and_removes_source(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            source = os.path.join(tmpdir, "training.log")
            dest = os.path.join(tmpdir, "training.log.2026-02-22.gz")
            original_content = b"epoch=1 train_loss=0.5\n" * 100

            with open(source, "wb") as f:
                f.write(original_content)

            GzipTimedRotatingFileHandler._gzip_rotator(source, dest)

            assert not os.path.exists(source)
            with gzip.open(dest, "rb") as f:
                assert f.read() == original_content

    def test_handler_creates_missing_parent_directory(self):
        """run 디렉토리 하위 로그 경로가 없어도 핸들러가 만든다."""
        with tempfile.TemporaryDirectory() as tmpdir:
            log_file = os.path.join(tmpdir, "run-1", "logs", "pipeline.log")
            handler = GzipTimedRotatingFileHandler(filename=log_file)

            assert os.path.isdir(os.path.dirname(log_file))
            assert handler.namer is not None
            assert handler.rotator is not None
            handler.close()
