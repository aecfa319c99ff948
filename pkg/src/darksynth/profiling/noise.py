"""Noise disentanglement, model resampling and quantile-quantile comparison."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..frames import LinearFrame
from ..rng import Rng
from .gmm import GmmFit
from .tukey import TukeyLambdaFit, tukey_ppf


@dataclass(frozen=True, eq=False)
class DisentangledNoise:
    """Row-banding and i.i.d. parts of shading-corrected dark frames."""

    iid_samples: np.ndarray
    row_means: list
    source: list
    shapes: list = field(default_factory=list)

    def iid_grids(self) -> list[np.ndarray]:
        grids, start = [], 0
        for h, w in self.shapes:
            grids.append(self.iid_samples[start:start + h * w].reshape(h, w))
            start += h * w
        return grids

    def reconstruct(self, shading: np.ndarray | None = None) -> list[np.ndarray]:
        out = []
        for grid, rows in zip(self.iid_grids(), self.row_means):
            frame = grid + rows[:, None]
            out.append(frame if shading is None else frame + shading)
        return out


def disentangle(frames: Sequence[LinearFrame], source: Sequence[str] | None = None) -> DisentangledNoise:
    """Split each frame into per-row means and the residual about them."""
    if not frames:
        raise ValueError("need at least one frame")
    iid, rows, shapes = [], [], []
    for f in frames:
        v = f.values
        m = v.mean(axis=1)
        rows.append(m)
        iid.append((v - m[:, None]).ravel())
        shapes.append(v.shape)
    names = list(source) if source is not None else [str(i) for i in range(len(frames))]
    return DisentangledNoise(np.concatenate(iid), rows, names, shapes)


def open_uniforms(rng: Rng, n: int) -> np.ndarray:
    """Uniforms on the open interval (0, 1)."""
    bits = rng.generator.integers(0, 1 << 53, size=n, dtype=np.int64)
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


def resample(model: TukeyLambdaFit | GmmFit, n: int, rng: Rng) -> np.ndarray:
    if n < 0:
        raise ValueError("n must be >= 0")
    if isinstance(model, TukeyLambdaFit):
        return model.mu + model.sigma * tukey_ppf(open_uniforms(rng, n), model.lam)
    if isinstance(model, GmmFit):
        comp = rng.choice(model.n_components, size=n, p=model.weights / model.weights.sum())
        if model.means.ndim == 1:
            return model.means[comp] + np.sqrt(model.variances[comp]) * rng.normal(size=n)
        d = model.means.shape[1]
        chol = np.linalg.cholesky(model.variances)
        z = rng.normal(size=(n, d))
        return model.means[comp] + np.einsum("nij,nj->ni", chol[comp], z)
    raise TypeError(f"cannot resample from {type(model).__name__}")


@dataclass(frozen=True, eq=False)
class QqReport:
    probabilities: np.ndarray
    sample_q: np.ndarray
    model_q: np.ndarray
    max_abs_dev: float
    rmse: float

    def deviations(self) -> np.ndarray:
        return self.model_q - self.sample_q

    def region_max_dev(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """Largest |deviation| over probabilities in [lo, hi]."""
        mask = (self.probabilities >= lo) & (self.probabilities <= hi)
        return float(np.abs(self.deviations()[mask]).max()) if mask.any() else 0.0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["p", "sample_q", "model_q"])
            for row in zip(self.probabilities, self.sample_q, self.model_q):
                writer.writerow([repr(float(v)) for v in row])


def read_qq_csv(path) -> np.ndarray:
    return np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)


def qq_compare(samples_a, samples_b, n_quantiles: int = 512) -> QqReport:
    """Pair empirical quantiles of ``a`` (sample) and ``b`` (model) at (i+0.5)/n."""
    a = np.asarray(samples_a, dtype=np.float64).ravel()
    b = np.asarray(samples_b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    if n_quantiles < 2:
        raise ValueError("need at least 2 quantiles")
    p = (np.arange(n_quantiles) + 0.5) / n_quantiles
    qa = np.quantile(a, p)
    qb = np.quantile(b, p)
    dev = qb - qa
    return QqReport(p, qa, qb, float(np.abs(dev).max()), float(np.sqrt(np.mean(dev * dev))))
