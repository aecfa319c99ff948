"""Command implementations behind the CLI.

Each ``cmd_*`` function takes a validated :class:`RunConfig`, writes its
artifacts and returns ``(inputs, seeds, outputs, base)`` for the manifest.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .config import RunConfig, dump_json
from .dark_bank import DarkBank, calibrate_shading, corrected, key_iso, load_bank, recalibrate_online
from .errors import ConfigError, GeometryMismatch
from .frames import LinearFrame, RawFrame, to_linear
from .hbnr import expand_bit_depth, fit_hbnr
from .isp import render_preview
from .pairing import enumerate_pairs, synthesize_pair, write_recipe
from .profiling import disentangle, fit_from_dict, fit_gmm, fit_tukey_lambda, qq_compare, resample
from .ptc import compare_k, discover_pairs, ptc_from_flatfields
from .rawio import MAGIC_FLOAT, is_frame_file, read_dshd, read_frame, read_rawf, write_dshd, write_rawb, write_rawf
from .rng import Rng

logger = logging.getLogger(__name__)


def _bank_inputs(bank: DarkBank, key: str) -> list:
    return [m for m in bank.groups[key] if not isinstance(m, RawFrame)]


def _group(cfg: RunConfig) -> tuple[DarkBank, str]:
    bank = load_bank(cfg.dark_dir, cfg.sensor)
    key = str(cfg.iso)
    bank.size(key)
    return bank, key


def _out_file(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_calibrate_shading(cfg: RunConfig):
    bank, key = _group(cfg)
    seeds = {}
    if cfg.subset is not None:
        seed = 0 if cfg.seed is None else cfg.seed
        shading = recalibrate_online(bank, key, int(cfg.subset), Rng(seed))
        seeds["subset"] = seed
    else:
        shading = calibrate_shading(bank, key)
    out = _out_file(cfg)
    write_dshd(shading, out)
    logger.info("dark shading for %s from %d frames -> %s", key, shading.frame_count, out)
    return _bank_inputs(bank, key), seeds, [out], out.parent


def _clean_files(directory) -> list[Path]:
    files = sorted(p for p in Path(directory).iterdir() if p.is_file() and is_frame_file(p))
    if not files:
        raise ConfigError(f"no clean RAWB frames in {directory}")
    return files


def cmd_synthesize(cfg: RunConfig):
    bank, key = _group(cfg)
    clean_files = _clean_files(cfg.clean_dir)
    ids = [p.stem for p in clean_files]
    if len(set(ids)) != len(ids):
        raise ConfigError("clean frame names must be unique")
    inputs = clean_files + _bank_inputs(bank, key)

    if cfg.shading:
        shading = read_dshd(cfg.shading)
        inputs.append(Path(cfg.shading))
    else:
        shading = calibrate_shading(bank, key)

    master = Rng(cfg.seed)
    recipes = enumerate_pairs(
        ids, bank, key, cfg.policy, cfg.patch_shape(), master,
        qe=cfg.qe, qe_jitter=cfg.qe_jitter, flip=not cfg.no_flip,
    )
    out = _out_dir(cfg)
    by_id = dict(zip(ids, clean_files))
    cache: dict[str, LinearFrame] = {}
    outputs = []
    for index, recipe in enumerate(recipes):
        clean = cache.get(recipe.clean_id)
        if clean is None:
            clean = to_linear(read_frame(by_id[recipe.clean_id]))
            if clean.shape != bank.geometry(key):
                raise GeometryMismatch(
                    f"clean frame {recipe.clean_id} is {clean.shape}, dark frames are {bank.geometry(key)}"
                )
            cache[recipe.clean_id] = clean
        noisy, clean_patch = synthesize_pair(clean, recipe, bank, shading)
        stem = f"{index:06d}"
        paths = [out / f"{stem}_noisy.rawb", out / f"{stem}_clean.rawb", out / f"{stem}.recipe.json"]
        write_rawb(noisy, paths[0])
        write_rawf(clean_patch, paths[1])
        write_recipe(recipe, paths[2])
        outputs += paths
    logger.info("synthesized %d pairs into %s", len(recipes), out)
    seeds = {"master": cfg.seed, "recipes": [r.seed for r in recipes]}
    return inputs, seeds, outputs, out


def _center_crop(shape, size: int) -> tuple[int, int, int, int]:
    h = min(size, shape[0]) // 2 * 2
    w = min(size, shape[1]) // 2 * 2
    y = (shape[0] - h) // 4 * 2
    x = (shape[1] - w) // 4 * 2
    return y, x, h, w


def _iid_samples(bank: DarkBank, key: str, indices, crop) -> np.ndarray:
    shading = calibrate_shading(bank, key)
    y, x, h, w = crop
    frames = []
    for i in indices:
        frame = bank.frame(key, i)
        frames.append(LinearFrame(corrected(frame, shading)[y:y + h, x:x + w], **frame.meta()))
    return disentangle(frames).iid_samples


def _subsample(x: np.ndarray, limit: int, rng: Rng) -> np.ndarray:
    if limit and x.size > limit:
        return x[np.sort(rng.choice(x.size, size=limit, replace=False))]
    return x


def _split(size: int, fit_frames: int) -> tuple[list[int], list[int]]:
    n_fit = min(max(int(fit_frames), 1), size)
    return list(range(n_fit)), list(range(n_fit, size))


def cmd_profile(cfg: RunConfig):
    bank, key = _group(cfg)
    fit_idx, eval_idx = _split(bank.size(key), cfg.fit_frames)
    crop = _center_crop(bank.geometry(key), cfg.crop)
    root = Rng(cfg.seed)
    samples = _iid_samples(bank, key, fit_idx, crop)
    if cfg.model == "tukey":
        fit = fit_tukey_lambda(samples)
    else:
        fit = fit_gmm(_subsample(samples, cfg.max_samples, root.child(0)), cfg.components, root.child(1))
    names = bank.frame_names(key)
    doc = fit.to_dict()
    doc["source"] = {
        "dark_dir": str(Path(cfg.dark_dir).resolve()),
        "iso": key,
        "crop": list(crop),
        "fit_frames": [names[i] for i in fit_idx],
        "eval_frames": [names[i] for i in eval_idx],
        "n_samples": int(samples.size),
        "max_samples": cfg.max_samples,
        "seed": cfg.seed,
    }
    out = _out_file(cfg)
    dump_json(doc, out)
    return _bank_inputs(bank, key), {"root": cfg.seed}, [out], out.parent


def cmd_qq(cfg: RunConfig):
    doc = json.loads(Path(cfg.fit).read_text())
    fit = fit_from_dict(doc)
    source = doc.get("source") or {}
    dark_dir = cfg.dark_dir or source.get("dark_dir")
    if not dark_dir:
        raise ConfigError("fit file has no source dark_dir; pass --dark-dir")
    bank = load_bank(dark_dir, cfg.sensor)
    key = str(cfg.iso or source["iso"])
    names = bank.frame_names(key)
    wanted = source["fit_frames"] if cfg.against == "train" else source["eval_frames"]
    indices = [names.index(n) for n in wanted if n in names]
    if not indices:
        raise ConfigError(f"no {cfg.against} frames available for the Q-Q comparison")
    seed = cfg.seed if cfg.seed is not None else int(source.get("seed") or 0)
    root = Rng(seed)
    crop = tuple(source.get("crop") or _center_crop(bank.geometry(key), cfg.crop))
    data = _subsample(_iid_samples(bank, key, indices, crop), cfg.max_samples, root.child(0))
    model_samples = resample(fit, data.size, root.child(1))
    report = qq_compare(data, model_samples, cfg.quantiles)
    out = _out_file(cfg)
    report.write_csv(out)
    logger.info("qq %s: max |dev| %.4g DN, rmse %.4g DN", cfg.against, report.max_abs_dev, report.rmse)
    inputs = [Path(cfg.fit)] + _bank_inputs(bank, key)
    return inputs, {"root": seed}, [out], out.parent


def cmd_hbnr(cfg: RunConfig):
    bank, key = _group(cfg)
    shading = calibrate_shading(bank, key)
    frames = bank.frames(key)
    lin = [LinearFrame(corrected(f, shading), **f.meta()) for f in frames]
    model = fit_hbnr(lin, None if cfg.family == "auto" else cfg.family)
    out = _out_dir(cfg)
    root = Rng(cfg.seed)
    outputs, seeds = [], []
    names = bank.frame_names(key)
    for i, frame in enumerate(frames):
        child = root.child(i)
        seeds.append(child.seed)
        path = out / f"{Path(names[i]).stem}_hbnr.rawf"
        write_rawf(expand_bit_depth(frame, shading, model, child), path)
        outputs.append(path)
    model_path = out / "hbnr_model.json"
    dump_json(model.to_dict(), model_path)
    outputs.append(model_path)
    logger.info("hbnr: %s model, %d frames expanded", model.family.value, len(frames))
    return _bank_inputs(bank, key), {"root": cfg.seed, "frames": seeds}, outputs, out


def cmd_ptc(cfg: RunConfig):
    pairs_found = discover_pairs(cfg.flat_dir)
    shading = read_dshd(cfg.shading) if cfg.shading else None
    pairs, inputs = [], []
    for _, a_path, b_path in pairs_found:
        a, b = read_frame(a_path), read_frame(b_path)
        la, lb = to_linear(a), to_linear(b)
        if shading is not None:
            la = la.with_values(corrected(a, shading))
            lb = lb.with_values(corrected(b, shading))
        pairs.append((la, lb))
        inputs += [a_path, b_path]
    fit = ptc_from_flatfields(pairs)
    doc = fit.to_dict()
    doc["levels"] = [lvl for lvl, _, _ in pairs_found]
    doc["comparison"] = compare_k(cfg.sensor, key_iso(cfg.iso), fit)
    out = _out_file(cfg)
    dump_json(doc, out)
    if cfg.shading:
        inputs.append(Path(cfg.shading))
    return inputs, {}, [out], out.parent


def _read_any(path: Path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
    return read_rawf(path) if magic == MAGIC_FLOAT else read_frame(path)


def cmd_preview(cfg: RunConfig):
    src = Path(cfg.input)
    out = _out_file(cfg)
    render_preview(_read_any(src), cfg.digital_gain, out)
    return [src], {}, [out], out.parent


COMMAND_TABLE = {
    "calibrate-shading": cmd_calibrate_shading,
    "synthesize": cmd_synthesize,
    "profile": cmd_profile,
    "qq": cmd_qq,
    "hbnr": cmd_hbnr,
    "ptc": cmd_ptc,
    "preview": cmd_preview,
}
