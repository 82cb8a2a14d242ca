import argparse
import os
import sys
import time
from typing import Optional, Sequence

from dotenv import load_dotenv

from csaeo.harness import (
    channel_probe_handler,
    compare_csa_handler,
    confusion_handler,
    ser_curve_handler,
    sweep_handler,
    train_handler,
)
from csaeo.models.config import AppConfig
from csaeo.utils.config import apply_overrides, load_config
from csaeo.utils.errors import ArtifactExistsError, ConfigError, CsaeoError
from csaeo.utils.i18n import t
from csaeo.utils.logger import logger

COMMANDS = {
    "train": train_handler,
    "sweep": sweep_handler,
    "ser-curve": ser_curve_handler,
    "compare-csa": compare_csa_handler,
    "channel-probe": channel_probe_handler,
    "confusion": confusion_handler,
}

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with 1 instead of argparse's 2"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="csaeo", description="CSA EO semantic communication simulator")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", help="TOML run configuration (defaults when omitted)")
        sub.add_argument("--seed", type=int, help="master seed, overrides harness.seed")
        sub.add_argument("--jobs", type=int, help="worker processes, overrides harness.jobs")
        sub.add_argument("--out", help="output directory, overrides harness.output_dir")
        sub.add_argument("--overwrite", action="store_true", help="replace existing artifacts")
    return parser


def print_startup_info(command: str, cfg: AppConfig, config_path: Optional[str]):
    logger.info("=" * 60)
    logger.info(t("csaeo_starting"))
    logger.info("=" * 60)

    logger.info(f"{t('command')}: {command}")
    logger.info(f"{t('config_file')}: {config_path or t('builtin_defaults')}")
    logger.info(f"{t('master_seed')}: {cfg.harness.seed}")
    logger.info(f"{t('worker_jobs')}: {cfg.harness.jobs}")
    logger.info(f"{t('output_directory')}: {cfg.harness.output_dir}")
    logger.info(f"{t('overwrite')}: {t('enabled') if cfg.harness.overwrite else t('disabled')}")
    logger.debug(f"Effective configuration: {cfg.model_dump()}")

    logger.info("=" * 60)


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv(os.path.join(os.path.dirname(__file__), "..", "..", ".env"))

    args = build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config), seed=args.seed, jobs=args.jobs, out=args.out,
                              overwrite=args.overwrite)
        print_startup_info(args.command, cfg, args.config)

        start = time.monotonic()
        COMMANDS[args.command](cfg)
        logger.info(t("command_finished", command=args.command, seconds=time.monotonic() - start))
        return EXIT_OK
    except ArtifactExistsError as e:
        logger.error(t("artifact_exists", path=e.path))
        return EXIT_USAGE
    except ConfigError as e:
        logger.error(t("config_error", error=e))
        return EXIT_USAGE
    except CsaeoError as e:
        logger.error(t("runtime_error", error=e), exc_info=True)
        return EXIT_RUNTIME
    except Exception as e:
        logger.error(t("unexpected_error", error=e), exc_info=True)
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(main())
