"""Tukey-Lambda distribution and PPCC shape fitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateSamples, TooFewSamples

LAMBDA_BRACKET = (-2.0, 2.0)
GRID_STEP = 0.01
# PPCC values closer than this are treated as ties (lambda=1 and lambda=2 are
# both exactly uniform); ties resolve to the smaller |lambda|
TIE_TOL = 1e-5
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def tukey_ppf(p, lam: float) -> np.ndarray:
    """Standard Tukey-Lambda quantile function ``(p**lam - (1-p)**lam) / lam``."""
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore"):
        lp, lq = np.log(p), np.log1p(-p)
        if lam == 0.0:
            return lp - lq
        return (np.expm1(lam * lp) - np.expm1(lam * lq)) / lam


def tukey_ppf_slope(p, lam: float) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return p ** (lam - 1.0) + (1.0 - p) ** (lam - 1.0)


def tukey_cdf(x, lam: float, iterations: int = 64) -> np.ndarray:
    """Standard Tukey-Lambda CDF by bisection on the quantile function."""
    x = np.asarray(x, dtype=np.float64)
    if lam == 0.0:
        return 0.5 * (1.0 + np.tanh(0.5 * x))
    lo = np.zeros(x.shape)
    hi = np.ones(x.shape)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        below = tukey_ppf(mid, lam) < x
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    if lam > 0:
        bound = 1.0 / lam
        out = np.where(x <= -bound, 0.0, out)
        out = np.where(x >= bound, 1.0, out)
    return out


def tukey_pdf(x, lam: float) -> np.ndarray:
    p = tukey_cdf(x, lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = 1.0 / tukey_ppf_slope(p, lam)
    return np.where((p > 0) & (p < 1), dens, 0.0)


@dataclass(frozen=True)
class TukeyLambdaFit:
    lam: float
    mu: float
    sigma: float
    ppcc: float

    def ppf(self, p):
        return self.mu + self.sigma * tukey_ppf(p, self.lam)

    def cdf(self, x):
        return tukey_cdf((np.asarray(x, dtype=np.float64) - self.mu) / self.sigma, self.lam)

    def pdf(self, x):
        return tukey_pdf((np.asarray(x, dtype=np.float64) - self.mu) / self.sigma, self.lam) / self.sigma

    def to_dict(self) -> dict:
        return {"model": "tukey", "lambda": self.lam, "mu": self.mu, "sigma": self.sigma, "ppcc": self.ppcc}

    @classmethod
    def from_dict(cls, d: dict) -> "TukeyLambdaFit":
        return cls(float(d["lambda"]), float(d["mu"]), float(d["sigma"]), float(d["ppcc"]))


def order_statistic_medians(n: int) -> np.ndarray:
    """Filliben's approximation to the medians of uniform order statistics."""
    m = (np.arange(1, n + 1) - 0.3175) / (n + 0.365)
    m[-1] = 0.5 ** (1.0 / n)
    m[0] = 1.0 - m[-1]
    return m


def _corr(q: np.ndarray, xc: np.ndarray, xnorm: float) -> float:
    qc = q - q.mean()
    denom = np.sqrt(np.dot(qc, qc)) * xnorm
    return float(np.dot(qc, xc) / denom) if denom > 0 else -1.0


def ppcc(samples, lam: float) -> float:
    """Probability-plot correlation coefficient of ``samples`` at shape ``lam``."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    xc = x - x.mean()
    return _corr(tukey_ppf(order_statistic_medians(x.size), lam), xc, float(np.sqrt(np.dot(xc, xc))))


def fit_tukey_lambda(samples, max_points: int = 20000) -> TukeyLambdaFit:
    """Fit the shape by maximizing the PPCC over [-2, 2].

    A 0.01-step grid locates the peak and a golden-section search refines it.
    Samples larger than ``max_points`` are represented by evenly spaced order
    statistics (extremes included) paired with their full-sample plotting
    positions.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size
    if n < 1000:
        raise TooFewSamples(f"need at least 1000 samples, got {n}")
    if not np.isfinite(x).all():
        raise DegenerateSamples("samples contain non-finite values")
    if x[0] == x[-1]:
        raise DegenerateSamples("samples have zero variance")

    m = order_statistic_medians(n)
    if n > max_points:
        idx = np.unique(np.round(np.linspace(0, n - 1, max_points)).astype(np.int64))
        x, m = x[idx], m[idx]
    xc = x - x.mean()
    xnorm = float(np.sqrt(np.dot(xc, xc)))

    def score(lam: float) -> float:
        return _corr(tukey_ppf(m, lam), xc, xnorm)

    lo, hi = LAMBDA_BRACKET
    grid = np.round(np.arange(lo, hi + GRID_STEP / 2, GRID_STEP), 10)
    scores = np.array([score(g) for g in grid])
    best = scores.max()
    peak = np.r_[True, scores[1:] >= scores[:-1]] & np.r_[scores[:-1] >= scores[1:], True]
    candidates = np.flatnonzero(peak & (scores >= best - TIE_TOL))
    start = candidates[np.argmin(np.abs(grid[candidates]))]

    a = max(lo, grid[start] - GRID_STEP)
    b = min(hi, grid[start] + GRID_STEP)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = score(c), score(d)
    while b - a > 1e-7:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = score(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = score(d)
    lam = 0.5 * (a + b)
    if score(grid[start]) > score(lam):
        lam = float(grid[start])

    q = tukey_ppf(m, lam)
    sigma, mu = np.polyfit(q, x, 1)
    return TukeyLambdaFit(lam=float(lam), mu=float(mu), sigma=float(sigma), ppcc=score(lam))
