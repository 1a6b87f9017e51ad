"""Command-line entry point: homoglab <command> --config PATH [--out DIR] [--seed N] [--threads N]."""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .config import check_preconditions, load_settings, parse_config
from .errors import ConfigError, HomoglabError

logger = logging.getLogger("homoglab")

COMMANDS = ["correctors", "growth", "excess", "thmT", "corC", "lemmaL"]
EXIT_CERTIFICATION_FAILED = 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="homoglab", description="Quantitative homogenization experiments")
    parser.add_argument("command", choices=COMMANDS, help="Experiment to run")
    parser.add_argument("--config", required=True, help="Path to a key = value config file")
    parser.add_argument("--out", help="Output directory (default: config 'out' or HOMOGLAB_OUT_DIR)")
    parser.add_argument("--seed", type=int, help="Override the config seed")
    parser.add_argument("--threads", type=int, help="Worker threads (default: HOMOGLAB_THREADS)")
    parser.add_argument("--log-level", help="Logging level (default: HOMOGLAB_LOG_LEVEL or INFO)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = load_settings()
    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    # imported late so that --help stays fast
    from .run import run

    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        logger.error("cannot read config %s: %s", args.config, exc)
        return ConfigError.exit_code

    try:
        config = parse_config(text, args.command)
        overrides = {"command": args.command}
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("VALIDATION_ERROR", "seed must be non-negative", field="seed")
            overrides["seed"] = args.seed
        config = config.model_copy(update=overrides)
        check_preconditions(config)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("VALIDATION_ERROR", "threads must be >= 1", field="threads")
        manifest = run(config, out_dir=args.out, threads=args.threads, settings=settings,
                       progress=sys.stderr.isatty())
    except HomoglabError as exc:
        stage = exc.context.get("stage")
        logger.error("%s%s", f"stage {stage} failed: " if stage else "", exc)
        return exc.exit_code

    if not manifest.passed:
        failed = [name for name, ok in manifest.certifications.items() if not ok]
        logger.error("certification failed: %s", ", ".join(failed))
        return EXIT_CERTIFICATION_FAILED
    return 0


if __name__ == "__main__":
    sys.exit(main())
