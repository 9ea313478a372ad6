import importlib
import logging
import os
from unittest.mock import patch

import pytest
import sentry_sdk

import dima.settings as dima_settings


class TestSentryGuard:
    def test_sentry_not_initialised_without_dsn(self):
        """DSN 이 없으면 init_sentry 는 아무것도 하지 않는다."""
        with patch.object(dima_settings, "SENTRY_DSN", ""):
            assert dima_settings.init_sentry() is False

    def test_sentry_not_initialised_in_test_environment(self):
        """test/local 환경에서는 DSN 이 있어도 Sentry 를 켜지 않는다."""
        with (
            patch.object(dima_settings, "SENTRY_DSN", "https://k@x.io/1"),
            patch.object(dima_settings, "SENTRY_ENVIRONMENT", "test"),
            patch.object(sentry_sdk, "init") as init,
        ):
            assert dima_settings.init_sentry() is False
        init.assert_not_called()

    def test_sentry_initialised_in_prod(self):
        with (
            patch.object(dima_settings, "SENTRY_DSN", "https://k@x.io/1"),
            patch.object(dima_settings, "SENTRY_ENVIRONMENT", "prod"),
            patch.object(sentry_sdk, "init") as init,
        ):
            assert dima_settings.init_sentry() is True
        init.assert_called_once()


class TestEnvConfig:
    def test_blank_integer_env_uses_defaults(self):
        """DIMA_WORKERS='' 로 주입돼도 기본값을 사용한다."""
        with patch.dict(os.environ, {"DIMA_WORKERS": ""}):
            reloaded = importlib.reload(dima_settings)
        try:
            assert reloaded.DimaConfig.WORKERS == 1
        finally:
            importlib.reload(dima_settings)

    def test_invalid_integer_env_raises_value_error(self):
        """숫자가 아닌 정수 env 는 조용히 기본값으로 숨기지 않는다."""
        with patch.dict(os.environ, {"DIMA_WORKERS": "many"}):
            with pytest.raises(ValueError):
                importlib.reload(dima_settings)
        importlib.reload(dima_settings)


class TestLoggingConfig:
    def test_every_area_logger_has_console_and_file_handler(self, tmp_path):
        config = dima_settings.build_logging(str(tmp_path))
        for name in dima_settings.LOGGER_NAMES:
            handlers = config["loggers"][name]["handlers"]
            assert f"{name}_console" in handlers
            assert f"{name}_file" in handlers

    def test_file_handlers_use_gzip_handler(self, tmp_path):
        config = dima_settings.build_logging(str(tmp_path))
        for name, handler in config["handlers"].items():
            if name.endswith("_file"):
                assert (
                    handler["class"]
                    == "dima.logging_handlers.GzipTimedRotatingFileHandler"
                )

    def test_configure_logging_writes_json_lines(self, tmp_path):
        dima_settings.configure_logging(str(tmp_path))
        logger = logging.getLogger("training")
        logger.info("epoch %d done", 3)
        for handler in logger.handlers:
            handler.flush()
        content = (tmp_path / "training.log").read_text(encoding="utf-8")
        assert '"logger":"training"' in content
        assert "epoch 3 done" in content
        for name in dima_settings.LOGGER_NAMES:
            area_logger = logging.getLogger(name)
            for handler in list(area_logger.handlers):
                handler.close()
            area_logger.handlers.clear()
            area_logger.propagate = True
