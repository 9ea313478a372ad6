"""`dima` 커맨드라인 진입점.

- dima phantom --out runs/desk
- dima train-ddpm --config configs/desk.json --set ddpm_trainer.max_epochs=20
- dima simulate --config configs/desk.json --seed 3
- poetry run dima evaluate --config configs/desk.json

exit code: 0 성공, 2 설정 오류, 3 앞 단계 산출물 없음/해시 불일치,
4 학습 발산, 1 그 밖의 실패 (Sentry 로 보고)
"""

import argparse
import logging
import sys
from typing import Sequence

import sentry_sdk

from dima.settings import configure_logging, init_sentry
from networks.exceptions import DivergenceError
from pipeline.commands import COMMANDS
from pipeline.config import load_config
from pipeline.exceptions import (
    ConfigError,
    ManifestMismatchError,
    MissingArtifactError,
)

logger = logging.getLogger("pipeline")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_MISSING_ARTIFACT = 3
EXIT_DIVERGENCE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dima",
        description="diffusion-simulated motion artifact pipeline",
    )
    parser.add_argument("command", choices=list(COMMANDS))
    parser.add_argument(
        "--config",
        default=None,
        help="RunConfig JSON file (defaults when omitted)",
    )
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted override, value parsed as JSON (repeatable)",
    )
    parser.add_argument("--seed", type=int, default=None, help="global seed")
    parser.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """커맨드라인 인자를 파싱하고 단계 하나를 실행한 뒤 exit code 를 돌려준다"""
    args = build_parser().parse_args(argv)
    configure_logging()
    init_sentry()

    try:
        cfg = load_config(args.config, args.overrides, args.seed, args.out)
        logger.info(
            "%s start (config %s, seed %d, out %s)",
            args.command,
            cfg.config_hash()[:12],
            cfg.seed,
            cfg.output_dir,
        )
        COMMANDS[args.command](cfg)
    except ConfigError as e:
        logger.error("%s: invalid config: %s", args.command, e)
        return EXIT_CONFIG
    except (MissingArtifactError, ManifestMismatchError) as e:
        logger.error("%s: upstream artifact problem: %s", args.command, e)
        return EXIT_MISSING_ARTIFACT
    except DivergenceError as e:
        logger.error("%s: training diverged: %s", args.command, e)
        return EXIT_DIVERGENCE
    except Exception as e:
        logger.exception("%s failed: %s", args.command, e)
        sentry_sdk.capture_exception(e)
        return EXIT_FAILURE

    logger.info("%s finished", args.command)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
