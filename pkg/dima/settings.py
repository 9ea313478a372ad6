"""DIMA 프로세스 공통 설정.

- 환경 변수는 django-environ 으로 읽는다 (`.env` 가 있으면 로드, 없으면 OS env)
- run 단위 설정(RunConfig JSON)은 pipeline.config 가 담당하고, 여기에는
  로그/Sentry/워커 수처럼 프로세스에 묶인 값만 둔다
"""

import logging.config
import os
from pathlib import Path

import environ
import sentry_sdk

env = environ.Env()

BASE_DIR = Path(__file__).resolve().parent.parent

_env_path = os.path.join(BASE_DIR, ".env")
if os.path.exists(_env_path):
    environ.Env.read_env(_env_path)


def _env_int(name: str, default: int) -> int:
    # GitHub Actions 빈 secret 처럼 '' 로 주입되면 기본값, 비숫자는 ValueError
    value = env(name, default=None)
    if value in (None, ""):
        return default
    return int(value)


class DimaConfig:
    """DIMA CLI 프로세스 공통 설정."""

    PROCESS_NAME = "dima"
    LOG_LEVEL = env("DIMA_LOG_LEVEL", default="INFO")
    LOG_DIR = env("DIMA_LOG_DIR", default=str(BASE_DIR / "logs"))
    # 슬라이스 단위 시뮬레이션 병렬도. 1 이면 현재 프로세스에서 순차 실행.
    WORKERS = _env_int("DIMA_WORKERS", default=1)
    PROGRESS = env.bool("DIMA_PROGRESS", default=True)


SENTRY_DSN = env("SENTRY_DSN", default="").strip()
SENTRY_ENVIRONMENT = env("SENTRY_ENVIRONMENT", default="local").strip()
SENTRY_TRACES_SAMPLE_RATE = env.float("SENTRY_TRACES_SAMPLE_RATE", default=1.0)

LOGGER_NAMES = ("pipeline", "training", "diffusion", "dataprep")


def build_logging(log_dir: str, level: str = "INFO") -> dict:
    """logger 별 console + gzip 파일 핸들러 dictConfig 를 만든다."""
    handlers: dict[str, dict] = {}
    loggers: dict[str, dict] = {}
    for name in LOGGER_NAMES:
        handlers[f"{name}_console"] = {
            "level": level,
            "class": "logging.StreamHandler",
            "formatter": "default_formatter",
        }
        handlers[f"{name}_file"] = {
            "level": level,
            "class": "dima.logging_handlers.GzipTimedRotatingFileHandler",
            "when": "midnight",
            "utc": True,
            "interval": 1,
            "backupCount": 7,
            "formatter": "default_formatter",
            "encoding": "utf-8",
            "filename": os.path.join(log_dir, f"{name}.log"),
        }
        loggers[name] = {
            "handlers": [f"{name}_console", f"{name}_file"],
            "level": level,
            "propagate": False,
        }
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "default_formatter": {
                "format": '{"timestamp":"%(asctime)s","level":"%(levelname)s","logger":"%(name)s","module":"%(module)s","func":"%(funcName)s","line":%(lineno)d,"path":"%(pathname)s","process":%(process)d,"thread":%(thread)d,"message":"%(message)s"}',
                "datefmt": "%Y-%m-%d %H:%M:%S.%f%z",
                "style": "%",
            },
        },
        "handlers": handlers,
        "loggers": loggers,
    }


def configure_logging(log_dir: str | None = None) -> None:
    """CLI 진입점에서 1회 호출. 로그 디렉토리가 없으면 만든다."""
    log_dir = log_dir or DimaConfig.LOG_DIR
    os.makedirs(log_dir, exist_ok=True)
    logging.config.dictConfig(build_logging(log_dir, DimaConfig.LOG_LEVEL))


def init_sentry() -> bool:
    """DSN 이 있고 local/test 환경이 아닐 때만 Sentry 를 켠다."""
    if not SENTRY_DSN or SENTRY_ENVIRONMENT in ("local", "test"):
        return False
    sentry_sdk.init(
        dsn=SENTRY_DSN,
        environment=SENTRY_ENVIRONMENT,
        traces_sample_rate=SENTRY_TRACES_SAMPLE_RATE,
    )
    return True
