"""Noisy/clean pair synthesis from clean frames and a dark bank.

noisy = quantize(shot_noise(clean_patch) + shading-corrected dark patch)

Each pair is fully described by a :class:`SynthesisRecipe`; replaying a recipe
gives the same noisy frame bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dark_bank import DarkBank, DarkShading, key_iso, sample_dark
from .errors import BadCrop, ConfigError, GeometryMismatch
from .frames import LinearFrame, RawFrame, crop_linear, quantize
from .rng import Rng, splitmix64
from .shot_noise import GainHypothesis, add_shot_noise, hypothesize_k


@dataclass(frozen=True)
class SynthesisRecipe:
    clean_id: str
    gain: GainHypothesis
    iso: int | str
    dark_frame_index: int
    crop: tuple[int, int, int, int]
    flips: tuple[bool, bool]
    seed: int

    def to_dict(self) -> dict:
        return {
            "clean_id": self.clean_id,
            "gain": self.gain.to_dict(),
            "iso": self.iso,
            "dark_frame_index": self.dark_frame_index,
            "crop": list(self.crop),
            "flips": list(self.flips),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthesisRecipe":
        g = d["gain"]
        return cls(
            clean_id=str(d["clean_id"]),
            gain=GainHypothesis(float(g["analog_gain"]), float(g["qe"]), float(g["k"])),
            iso=d["iso"],
            dark_frame_index=int(d["dark_frame_index"]),
            crop=tuple(int(v) for v in d["crop"]),
            flips=tuple(bool(v) for v in d["flips"]),
            seed=int(d["seed"]),
        )


def write_recipe(recipe: SynthesisRecipe, path) -> None:
    Path(path).write_text(json.dumps(recipe.to_dict(), indent=2, sort_keys=True) + "\n")


def read_recipe(path) -> SynthesisRecipe:
    return SynthesisRecipe.from_dict(json.loads(Path(path).read_text()))


def parse_policy(policy) -> tuple[str, int]:
    """``"exhaustive"`` or ``"random:N"`` (also ``("random", N)``)."""
    if isinstance(policy, tuple):
        name, n = policy
        return str(name), int(n)
    text = str(policy).strip().lower()
    if text == "exhaustive":
        return "exhaustive", 0
    if text.startswith("random"):
        _, _, n = text.partition(":")
        try:
            count = int(n)
        except ValueError:
            raise ConfigError(f"bad policy {policy!r}; expected random:N") from None
        if count < 0:
            raise ConfigError("random policy needs N >= 0")
        return "random", count
    raise ConfigError(f"unknown pairing policy {policy!r}")


def _draw_crop(rng: Rng, shape, patch, allow_flip: bool):
    H, W = shape
    h, w = patch
    y = 2 * int(rng.integers(0, (H - h) // 2 + 1))
    x = 2 * int(rng.integers(0, (W - w) // 2 + 1))
    vflip, hflip = (bool(b) for b in rng.integers(0, 2, size=2))
    # a flipped axis needs one spare row/column; full-extent axes are never flipped
    vflip = vflip and allow_flip and h < H
    hflip = hflip and allow_flip and w < W
    return (y, x, h, w), (vflip, hflip)


def enumerate_pairs(
    clean_ids: Sequence[str],
    bank: DarkBank,
    iso,
    policy,
    patch: tuple[int, int],
    rng: Rng,
    *,
    qe: float | None = None,
    qe_jitter: bool = False,
    flip: bool = True,
) -> list[SynthesisRecipe]:
    """List the (clean, dark frame) pairings to synthesize.

    ``exhaustive`` yields every clean id crossed with every frame of the
    group; ``random:N`` draws N cells uniformly with replacement. Recipe ``i``
    gets seed ``splitmix64(rng.seed, i)`` and its crop, flips and (with
    ``qe_jitter``) QE come from that seed alone.
    """
    kind, n = parse_policy(policy)
    size = bank.size(iso)
    H, W = bank.geometry(iso)
    h, w = (int(v) for v in patch)
    if h % 2 or w % 2 or h <= 0 or w <= 0 or h > H or w > W:
        raise BadCrop(f"patch {h}x{w} must be even and fit in {H}x{W}")
    if kind == "exhaustive":
        cells = [(c, j) for c in clean_ids for j in range(size)]
    else:
        if n and not clean_ids:
            raise ConfigError("random policy needs at least one clean id")
        ci = rng.integers(0, max(len(clean_ids), 1), size=n)
        dj = rng.integers(0, size, size=n)
        cells = [(clean_ids[int(a)], int(b)) for a, b in zip(ci, dj)]

    iso_value = key_iso(iso) if isinstance(iso, str) else int(iso)
    recipes = []
    for index, (clean_id, frame_index) in enumerate(cells):
        seed = splitmix64(rng.seed, index)
        aug = Rng(seed).child(0)
        crop, flips = _draw_crop(aug, (H, W), (h, w), flip)
        gain = hypothesize_k(bank.profile, iso_value, qe, aug if (qe_jitter and qe is None) else None)
        recipes.append(
            SynthesisRecipe(
                clean_id=str(clean_id),
                gain=gain,
                iso=iso,
                dark_frame_index=frame_index,
                crop=crop,
                flips=flips,
                seed=seed,
            )
        )
    return recipes


def synthesize_pair(
    clean: LinearFrame,
    recipe: SynthesisRecipe,
    bank: DarkBank,
    shading: DarkShading,
) -> tuple[RawFrame, LinearFrame]:
    """Realize one recipe; returns the quantized noisy patch and the clean patch."""
    if clean.shape != shading.shape:
        raise GeometryMismatch(f"clean {clean.shape} vs shading {shading.shape}")
    clean_patch = crop_linear(clean, recipe.crop, recipe.flips)
    shot = add_shot_noise(clean_patch, recipe.gain, Rng(recipe.seed))
    dark = sample_dark(
        bank, recipe.iso, shading, recipe.crop, recipe.flips, frame_index=recipe.dark_frame_index
    )
    noisy = quantize(LinearFrame(shot.values + dark.values, **dark.meta()))
    return noisy, clean_patch


def apply_inference_correction(noisy: RawFrame, shading: DarkShading) -> LinearFrame:
    """Remove black level and dark shading from a captured (or synthesized) noisy frame."""
    if noisy.shape != shading.shape:
        raise GeometryMismatch(f"noisy {noisy.shape} vs shading {shading.shape}")
    values = (noisy.pixels.astype(np.float64) - noisy.black_level) - shading.mean_map
    return LinearFrame(values, **noisy.meta())
