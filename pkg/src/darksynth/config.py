"""Run configuration: defaults < config file < command-line flags."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError, InvariantViolation
from .frames import SensorProfile

COMMANDS = ("calibrate-shading", "synthesize", "profile", "qq", "hbnr", "ptc", "preview")
SEED_REQUIRED = {"synthesize", "profile", "hbnr"}

_REQUIRED = {
    "calibrate-shading": ("dark_dir", "iso", "out"),
    "synthesize": ("clean_dir", "dark_dir", "iso", "out_dir"),
    "profile": ("dark_dir", "iso", "out"),
    "qq": ("fit", "out"),
    "hbnr": ("dark_dir", "iso", "out_dir"),
    "ptc": ("flat_dir", "iso", "out"),
    "preview": ("input", "out"),
}
_INPUT_DIRS = ("clean_dir", "dark_dir", "flat_dir")
_INPUT_FILES = ("shading", "fit", "input")
SENSOR_KEYS = ("sensor", "base_iso", "qe_lo", "qe_hi", "qe_hypothesis")


@dataclass
class RunConfig:
    command: str
    sensor: SensorProfile = field(default_factory=SensorProfile)
    seed: int | None = None
    iso: str | None = None
    clean_dir: str | None = None
    dark_dir: str | None = None
    flat_dir: str | None = None
    out_dir: str | None = None
    out: str | None = None
    # synthesize
    patch: str = "512x512"
    policy: str = "exhaustive"
    qe: float | None = None
    qe_jitter: bool = False
    no_flip: bool = False
    shading: str | None = None
    # calibrate-shading
    subset: int | None = None
    # profile / qq
    model: str = "tukey"
    components: int = 100
    fit_frames: int = 50
    crop: int = 512
    max_samples: int = 200_000
    fit: str | None = None
    against: str = "holdout"
    quantiles: int = 512
    # hbnr
    family: str = "auto"
    # preview
    input: str | None = None
    digital_gain: float = 1.0

    def patch_shape(self) -> tuple[int, int]:
        try:
            h, _, w = str(self.patch).lower().partition("x")
            return int(h), int(w or h)
        except ValueError:
            raise ConfigError(f"bad --patch {self.patch!r}; expected HxW") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sensor"] = {k: (int(v) if k == "cfa" else v) for k, v in asdict(self.sensor).items()}
        d["sensor"]["cfa"] = self.sensor.cfa.name
        return d


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def read_config_file(path) -> dict:
    """Load a YAML/JSON key-value file, or the ``config`` block of a manifest."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a key-value document")
    if "config" in data and "tool" in data:
        return _from_manifest(data, path)
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def _from_manifest(manifest: dict, path: Path) -> dict:
    from .manifest import verify_inputs

    verify_inputs(manifest)
    cfg = dict(manifest["config"])
    sensor = cfg.pop("sensor", {}) or {}
    cfg.update({"sensor": sensor.get("name", "generic")})
    for key in ("base_iso", "qe_lo", "qe_hi", "qe_hypothesis"):
        if key in sensor:
            cfg[key] = sensor[key]
    # outputs are recorded relative to the manifest; they are not replayed
    for key in ("out", "out_dir", "command"):
        cfg.pop(key, None)
    return cfg


def build_config(command: str, file_values: dict, flag_values: dict) -> RunConfig:
    merged = {**file_values, **{k: v for k, v in flag_values.items() if v is not None}}
    unknown = set(merged) - _FIELD_NAMES - set(SENSOR_KEYS)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    sensor_args = {}
    if "sensor" in merged:
        sensor_args["name"] = str(merged.pop("sensor"))
    for key in SENSOR_KEYS[1:]:
        if key in merged:
            sensor_args[key] = merged.pop(key)
    try:
        sensor = SensorProfile(**_coerce_sensor(sensor_args))
    except (InvariantViolation, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid sensor profile: {exc}") from None
    if merged.get("iso") is not None:
        merged["iso"] = str(merged["iso"])
    if merged.get("seed") is not None:
        try:
            merged["seed"] = int(merged["seed"])
        except (TypeError, ValueError):
            raise ConfigError(f"seed must be an integer, got {merged['seed']!r}") from None
    return RunConfig(command=command, sensor=sensor, **merged)


def _coerce_sensor(args: dict) -> dict:
    out = dict(args)
    if "base_iso" in out:
        out["base_iso"] = int(out["base_iso"])
    for key in ("qe_lo", "qe_hi", "qe_hypothesis"):
        if key in out:
            out[key] = float(out[key])
    return out


def validate(cfg: RunConfig) -> None:
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}")
    missing = [k for k in _REQUIRED[cfg.command] if getattr(cfg, k) in (None, "")]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise ConfigError(f"{cfg.command}: missing required option(s) {flags}")
    if cfg.command in SEED_REQUIRED and cfg.seed is None:
        raise ConfigError(f"{cfg.command}: --seed is mandatory")
    for key in _INPUT_DIRS:
        value = getattr(cfg, key)
        if value is not None and key in _REQUIRED[cfg.command] and not Path(value).is_dir():
            raise ConfigError(f"--{key.replace('_', '-')} {value} is not a directory")
    for key in _INPUT_FILES:
        value = getattr(cfg, key)
        if value is not None and not Path(value).is_file():
            raise ConfigError(f"--{key} {value} does not exist")
    if cfg.qe is not None and cfg.qe_jitter:
        raise ConfigError("--qe and --qe-jitter are mutually exclusive")
    if cfg.digital_gain <= 0:
        raise ConfigError("--digital-gain must be positive")
    if cfg.model not in ("tukey", "gmm"):
        raise ConfigError(f"--model must be tukey or gmm, got {cfg.model!r}")
    if cfg.against not in ("train", "holdout"):
        raise ConfigError(f"--against must be train or holdout, got {cfg.against!r}")
    if cfg.family not in ("auto", "gaussian", "uniform", "tukey"):
        raise ConfigError(f"--family must be auto|gaussian|uniform|tukey, got {cfg.family!r}")
    if cfg.command == "synthesize":
        cfg.patch_shape()
        from .pairing import parse_policy

        parse_policy(cfg.policy)


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(value):
    import numpy as np

    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")
