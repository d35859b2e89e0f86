"""Command-line entry point: afm simulate|fit|eval|mc|transform|serve."""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from afm.config.config import settings
from afm.controllers.run_controller import cmd_eval, cmd_fit, cmd_mc, cmd_simulate, cmd_transform
from afm.models.run_model import RunConfig
from afm.utils.errors import AFMError, ConfigError, DataError

logger = logging.getLogger(__name__)

COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "eval": cmd_eval,
    "mc": cmd_mc,
    "transform": cmd_transform,
}


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="afm", description="Additive factor model estimation and simulation")
    parser.add_argument("command", choices=[*COMMANDS, "serve"])
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--workers", type=int, help="worker processes for mc")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--log-level", default=None, help="logging level (default from AFM_LOG_LEVEL)")
    return parser


def load_run_config(path: Optional[str], seed=None, workers=None, out=None) -> RunConfig:
    """Read a RunConfig document and apply command-line overrides."""
    document = {}
    if path:
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise ConfigError(f"{path}: config file not found") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: malformed JSON at line {e.lineno}: {e.msg}") from e
    overrides = {"seed": seed, "workers": workers, "out_dir": out}
    document.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**document)
    except ValidationError as e:
        raise ConfigError(f"{path or '<defaults>'}: invalid configuration\n{e}") from e


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=(args.log_level or settings.LOG_LEVEL).upper(),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "serve":
            import uvicorn
            uvicorn.run("afm.main:app", host=settings.HOST, port=settings.PORT)
            return 0
        config = load_run_config(args.config, args.seed, args.workers, args.out)
        result = COMMANDS[args.command](config)
        if args.command == "eval":
            print(json.dumps(result, indent=2, sort_keys=True))
        return 0
    except AFMError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"afm {args.command}: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        print(f"afm {args.command}: invalid input\n{e}", file=sys.stderr)
        return ConfigError.exit_code
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"afm {args.command}: {e}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
