"""High-bit-depth noise recovery (HBNR) for dark frames.

Quantized dark frames are expanded to real values: each pixel is redrawn
from a fitted noise model restricted to the pixel's own quantization bin, by
inverse-CDF sampling between the CDF values at the bin edges. Re-quantizing
an expanded frame therefore gives back the original frame exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .dark_bank import DarkShading
from .errors import DegenerateSamples, GeometryMismatch
from .frames import LinearFrame, RawFrame
from .profiling.tukey import fit_tukey_lambda, tukey_cdf, tukey_pdf, tukey_ppf
from .rng import Rng, counter_states, counter_uniform

# values are kept this far inside their bin so that adding the black level
# back and rounding can never land on a bin edge
BIN_MARGIN = 1e-6
MAX_SCORE_SAMPLES = 200_000


class Family(str, enum.Enum):
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"
    TUKEY = "tukey"


@dataclass(frozen=True)
class HbnrModel:
    """A symmetric noise model: ``loc`` is the centre, ``scale`` the spread.

    For ``uniform`` the scale is the half-width; for ``tukey`` ``shape`` is lambda.
    """

    family: Family
    loc: float
    scale: float
    shape: float | None = None
    selection_score: float = float("nan")

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not self.scale > 0:
            raise DegenerateSamples(f"{self.family.value} model needs scale > 0, got {self.scale}")

    def cdf(self, x):
        z = (np.asarray(x, dtype=np.float64) - self.loc) / self.scale
        if self.family is Family.GAUSSIAN:
            return ndtr(z)
        if self.family is Family.UNIFORM:
            return np.clip(0.5 * (z + 1.0), 0.0, 1.0)
        return tukey_cdf(z, self.shape)

    def ppf(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self.family is Family.GAUSSIAN:
            z = ndtri(u)
        elif self.family is Family.UNIFORM:
            z = 2.0 * u - 1.0
        else:
            z = tukey_ppf(u, self.shape)
        return self.loc + self.scale * z

    def logpdf(self, x) -> np.ndarray:
        z = (np.asarray(x, dtype=np.float64) - self.loc) / self.scale
        if self.family is Family.GAUSSIAN:
            return -0.5 * (np.log(2.0 * np.pi) + z * z) - np.log(self.scale)
        if self.family is Family.UNIFORM:
            inside = np.abs(z) <= 1.0
            return np.where(inside, -np.log(2.0 * self.scale), -np.inf)
        with np.errstate(divide="ignore"):
            return np.log(tukey_pdf(z, self.shape)) - np.log(self.scale)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "loc": self.loc,
            "scale": self.scale,
            "shape": self.shape,
            "selection_score": self.selection_score,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HbnrModel":
        shape = d.get("shape")
        return cls(
            Family(d["family"]),
            float(d["loc"]),
            float(d["scale"]),
            None if shape is None else float(shape),
            float(d.get("selection_score", float("nan"))),
        )


def _candidates(x: np.ndarray) -> list[HbnrModel]:
    out = [HbnrModel(Family.GAUSSIAN, float(x.mean()), float(x.std()))]
    lo, hi = float(x.min()), float(x.max())
    out.append(HbnrModel(Family.UNIFORM, 0.5 * (lo + hi), 0.5 * (hi - lo)))
    if x.size >= 1000:
        fit = fit_tukey_lambda(x)
        if fit.sigma > 0:
            out.append(HbnrModel(Family.TUKEY, fit.mu, fit.sigma, fit.lam))
    return out


def fit_hbnr(frames: Sequence[LinearFrame], family: str | Family | None = None) -> HbnrModel:
    """Fit every candidate family to the pooled samples; keep the most likely.

    ``selection_score`` is the mean negative log-likelihood per sample
    (``inf`` when samples fall outside a bounded model's support). Passing
    ``family`` forces that family instead of selecting.
    """
    if not frames:
        raise DegenerateSamples("need at least one frame")
    x = np.concatenate([np.asarray(f.values, dtype=np.float64).ravel() for f in frames])
    if x.size < 2 or x.min() == x.max():
        raise DegenerateSamples("dark samples have zero variance")
    models = _candidates(x)
    if family is not None:
        wanted = Family(family)
        models = [m for m in models if m.family is wanted]
        if not models:
            raise DegenerateSamples(f"too few samples to fit a {wanted.value} model")

    stride = max(1, x.size // MAX_SCORE_SAMPLES)
    probe = x[::stride]
    scored = []
    for m in models:
        with np.errstate(divide="ignore", invalid="ignore"):
            nll = -float(np.mean(m.logpdf(probe)))
        if np.isnan(nll):
            nll = float("inf")
        scored.append(HbnrModel(m.family, m.loc, m.scale, m.shape, nll))
    return min(scored, key=lambda m: m.selection_score)


def expand_bit_depth(frame: RawFrame, shading: DarkShading, model: HbnrModel, rng: Rng) -> LinearFrame:
    """Redraw every pixel inside its quantization bin under ``model``.

    The output is black-level-removed linear DN (shading still included), so
    ``quantize`` maps it back to ``frame`` exactly.
    """
    if frame.shape != shading.shape:
        raise GeometryMismatch(f"frame {frame.shape} vs shading {shading.shape}")
    level = frame.pixels.astype(np.float64) - frame.black_level
    s = shading.mean_map
    lo = level - 0.5 - s
    hi = level + 0.5 - s

    # sample in the lower half of the model and mirror, which keeps the CDF
    # differences away from 1 where they would lose precision
    upper = 0.5 * (lo + hi) > model.loc
    lo_r = np.where(upper, 2.0 * model.loc - hi, lo)
    hi_r = np.where(upper, 2.0 * model.loc - lo, hi)
    f_lo = model.cdf(lo_r)
    f_hi = model.cdf(hi_r)

    w = counter_uniform(counter_states(rng.next_key(), level.size), 0).reshape(level.shape)
    mass = f_hi - f_lo
    with np.errstate(invalid="ignore", divide="ignore"):
        c = model.ppf(f_lo + w * mass)
    dither = lo_r + w * (hi_r - lo_r)
    ok = (mass > 1e-300) & np.isfinite(c) & (c >= lo_r) & (c <= hi_r)
    c = np.where(ok, c, dither)
    c = np.where(upper, 2.0 * model.loc - c, c)

    x = np.clip(c + s, level - 0.5 + BIN_MARGIN, level + 0.5 - BIN_MARGIN)
    return LinearFrame(x, **frame.meta())
