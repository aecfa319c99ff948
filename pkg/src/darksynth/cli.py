"""``darksynth`` command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import COMMANDS, RunConfig, build_config, read_config_file, validate
from .errors import ConfigError, DarkSynthError
from .manifest import build_manifest, write_manifest
from .pipeline import COMMAND_TABLE

logger = logging.getLogger("darksynth")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML/JSON key-value file or a previous run's manifest.json")
    p.add_argument("--seed", type=int)
    p.add_argument("--sensor", help="sensor profile name")
    p.add_argument("--base-iso", type=int)
    p.add_argument("--qe-lo", type=float)
    p.add_argument("--qe-hi", type=float)
    p.add_argument("--qe-hypothesis", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="darksynth", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"darksynth {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("calibrate-shading", help="average dark frames into a dark shading map")
    _common(p)
    p.add_argument("--dark-dir")
    p.add_argument("--iso")
    p.add_argument("--subset", type=int, help="use only this many randomly chosen frames")
    p.add_argument("--out")

    p = sub.add_parser("synthesize", help="synthesize noisy/clean training pairs")
    _common(p)
    p.add_argument("--clean-dir")
    p.add_argument("--dark-dir")
    p.add_argument("--iso")
    p.add_argument("--patch", help="HxW, e.g. 512x512")
    p.add_argument("--policy", help="exhaustive | random:N")
    p.add_argument("--qe", type=float, help="fixed QE hypothesis")
    p.add_argument("--qe-jitter", action="store_true", default=None, help="draw a QE per pair")
    p.add_argument("--no-flip", action="store_true", default=None)
    p.add_argument("--shading", help="precomputed .dshd map (default: average the whole group)")
    p.add_argument("--out-dir")

    p = sub.add_parser("profile", help="fit a Tukey-Lambda or GMM noise model to dark frames")
    _common(p)
    p.add_argument("--dark-dir")
    p.add_argument("--iso")
    p.add_argument("--model", choices=("tukey", "gmm"))
    p.add_argument("--components", type=int)
    p.add_argument("--fit-frames", type=int)
    p.add_argument("--crop", type=int, help="center crop side in pixels")
    p.add_argument("--max-samples", type=int)
    p.add_argument("--out")

    p = sub.add_parser("qq", help="quantile-quantile comparison of a fitted model against dark data")
    _common(p)
    p.add_argument("--fit")
    p.add_argument("--against", choices=("train", "holdout"))
    p.add_argument("--quantiles", type=int)
    p.add_argument("--dark-dir")
    p.add_argument("--iso")
    p.add_argument("--max-samples", type=int)
    p.add_argument("--out")

    p = sub.add_parser("hbnr", help="expand dark frames to high bit depth")
    _common(p)
    p.add_argument("--dark-dir")
    p.add_argument("--iso")
    p.add_argument("--family", choices=("auto", "gaussian", "uniform", "tukey"))
    p.add_argument("--out-dir")

    p = sub.add_parser("ptc", help="calibrate the system gain from flat-field pairs")
    _common(p)
    p.add_argument("--flat-dir")
    p.add_argument("--iso")
    p.add_argument("--shading")
    p.add_argument("--out")

    p = sub.add_parser("preview", help="render a RAW frame to an sRGB PNG")
    _common(p)
    p.add_argument("--input")
    p.add_argument("--digital-gain", type=float)
    p.add_argument("--out")
    return parser


def manifest_path(cfg: RunConfig) -> Path:
    if cfg.out_dir and cfg.command in ("synthesize", "hbnr"):
        return Path(cfg.out_dir) / "manifest.json"
    return Path(f"{cfg.out}.manifest.json")


def run(command: str, config: RunConfig) -> int:
    """Validate ``config``, execute ``command`` and write its manifest."""
    try:
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        config.command = command
        validate(config)
        inputs, seeds, outputs, base = COMMAND_TABLE[command](config)
        manifest = build_manifest(config, inputs, seeds, outputs, Path(base))
        write_manifest(manifest, manifest_path(config))
    except ConfigError as exc:
        print(f"darksynth: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DarkSynthError, OSError, ValueError) as exc:
        # KeyError subclasses would otherwise print their message quoted
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"darksynth {command}: {message}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    flags = {
        k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose") and v is not None
    }
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(args.command, file_values, flags)
    except ConfigError as exc:
        print(f"darksynth: configuration error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    return run(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
