"""Run manifests: enough to replay a command and check its inputs are unchanged."""

from __future__ import annotations

import hashlib
from pathlib import Path

from . import __version__
from .config import RunConfig, dump_json
from .errors import ConfigError

_BLOCK = 1 << 20


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(_BLOCK), b""):
            h.update(block)
    return h.hexdigest()


def build_manifest(cfg: RunConfig, inputs, seeds: dict, outputs, base: Path) -> dict:
    config = cfg.to_dict()
    for key in ("clean_dir", "dark_dir", "flat_dir", "shading", "fit", "input"):
        if config.get(key):
            config[key] = str(Path(config[key]).resolve())
    # outputs live next to the manifest; record them relative to it
    if config.get("out"):
        config["out"] = Path(config["out"]).name
    if config.get("out_dir"):
        config["out_dir"] = "."
    return {
        "tool": {"name": "darksynth", "version": __version__},
        "command": cfg.command,
        "config": config,
        "inputs": {str(Path(p).resolve()): file_digest(p) for p in sorted(set(map(str, inputs)))},
        "seeds": seeds,
        "outputs": {
            str(Path(p).relative_to(base)): file_digest(p) for p in sorted(set(map(str, outputs)))
        },
    }


def write_manifest(manifest: dict, path) -> None:
    dump_json(manifest, path)


def verify_inputs(manifest: dict) -> None:
    """Fail if any recorded input is missing or no longer matches its digest."""
    for path, digest in manifest.get("inputs", {}).items():
        if not Path(path).exists():
            raise ConfigError(f"manifest input {path} is missing")
        if file_digest(path) != digest:
            raise ConfigError(f"manifest input {path} changed since the recorded run")
