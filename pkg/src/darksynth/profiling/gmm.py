"""Gaussian mixture fitting by expectation-maximization.

1-D samples get scalar variances; ``(n, d)`` samples (d <= 8) get full
covariance matrices. Responsibilities are never materialized for the whole
sample: the E-step runs over fixed-size chunks and accumulates sufficient
statistics in chunk order, so results do not depend on memory limits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import TooFewSamples
from ..rng import Rng

MAX_ITER = 500
REL_TOL = 1e-7
VAR_FLOOR = 1e-6
MAX_DIM = 8
CHUNK = 8192
_LOG2PI = np.log(2.0 * np.pi)
_EXP_FLOOR = -60.0


@dataclass(frozen=True, eq=False)
class GmmFit:
    n_components: int
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    final_loglik: float
    converged: bool
    n_iter: int = 0
    loglik_history: tuple = field(default=(), repr=False)

    @property
    def dim(self) -> int:
        return 1 if self.means.ndim == 1 else self.means.shape[1]

    def to_dict(self) -> dict:
        return {
            "model": "gmm",
            "n_components": self.n_components,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "final_loglik": self.final_loglik,
            "converged": self.converged,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GmmFit":
        return cls(
            n_components=int(d["n_components"]),
            weights=np.asarray(d["weights"], dtype=np.float64),
            means=np.asarray(d["means"], dtype=np.float64),
            variances=np.asarray(d["variances"], dtype=np.float64),
            final_loglik=float(d["final_loglik"]),
            converged=bool(d["converged"]),
            n_iter=int(d.get("n_iter", 0)),
        )

    def loglik(self, samples) -> float:
        x = _as_2d(samples)
        return sum(_chunk_logprob(x[s:s + CHUNK], self._params())[1].sum() for s in range(0, len(x), CHUNK))

    def _params(self):
        cov = self.variances.reshape(self.n_components, 1, 1) if self.means.ndim == 1 else self.variances
        return self.weights, self.means.reshape(self.n_components, -1), cov


def _as_2d(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        return x[:, None]
    if x.ndim != 2:
        raise ValueError("samples must be 1-D or (n, d)")
    return x


def _chunk_logprob(x: np.ndarray, params) -> tuple[np.ndarray, np.ndarray]:
    """Per-component joint log densities and per-sample log-likelihoods."""
    weights, means, cov = params
    k, d = means.shape
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    if d == 1:
        var = cov[:, 0, 0]
        mu = means[:, 0]
        # expanded quadratic: one fused pass over the (n, k) grid
        quad = -0.5 / var
        lin = mu / var
        const = -0.5 * (_LOG2PI + np.log(var) + mu * mu / var) + logw
        xv = x[:, 0:1]
        joint = (xv * quad[None, :] + lin[None, :]) * xv + const[None, :]
        return joint, _logsumexp_rows(joint)
    else:
        logp = np.empty((len(x), k))
        for j in range(k):
            chol = np.linalg.cholesky(cov[j])
            z = np.linalg.solve(chol, (x - means[j]).T)
            logdet = 2.0 * np.log(np.diag(chol)).sum()
            logp[:, j] = -0.5 * (d * _LOG2PI + logdet + (z * z).sum(axis=0))
    joint = logp + logw[None, :]
    return joint, _logsumexp_rows(joint)


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    top = a.max(axis=1)
    top = np.where(np.isfinite(top), top, 0.0)
    return top + np.log(_exp_clipped(a - top[:, None]).sum(axis=1))


def _exp_clipped(a: np.ndarray) -> np.ndarray:
    # terms below e**-60 cannot move a sum dominated by a term of 1; clipping
    # keeps exp off its (very slow) underflow path
    return np.exp(np.maximum(a, _EXP_FLOOR))


def _kmeanspp(x: np.ndarray, k: int, rng: Rng) -> np.ndarray:
    n = len(x)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[int(rng.integers(0, n))]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(0, n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[j] = x[idx]
        d2 = np.minimum(d2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def _nearest(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    labels = np.empty(len(x), dtype=np.int64)
    for s in range(0, len(x), CHUNK):
        c = x[s:s + CHUNK]
        d2 = ((c[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels[s:s + CHUNK] = d2.argmin(axis=1)
    return labels


def _init_params(x: np.ndarray, k: int, rng: Rng, var_floor: float):
    n, d = x.shape
    centers = _kmeanspp(x, k, rng)
    labels = _nearest(x, centers)
    global_cov = np.atleast_2d(np.cov(x, rowvar=False)) + var_floor * np.eye(d)
    weights = np.empty(k)
    means = np.empty((k, d))
    cov = np.empty((k, d, d))
    for j in range(k):
        members = x[labels == j]
        weights[j] = max(len(members), 1)
        if len(members) >= 2 * d:
            means[j] = members.mean(axis=0)
            cov[j] = np.atleast_2d(np.cov(members, rowvar=False, bias=True)) + var_floor * np.eye(d)
        else:
            means[j] = centers[j]
            cov[j] = global_cov
    return weights / weights.sum(), means, cov


def fit_gmm(
    samples,
    n_components: int,
    rng: Rng,
    *,
    max_iter: int = MAX_ITER,
    rel_tol: float = REL_TOL,
    var_floor: float = VAR_FLOOR,
) -> GmmFit:
    """EM fit with k-means++ seeding.

    Stops once an iteration raises the log-likelihood by less than
    ``rel_tol * |loglik|`` or after ``max_iter`` iterations.
    """
    x = _as_2d(samples)
    n, d = x.shape
    if d > MAX_DIM:
        raise ValueError(f"at most {MAX_DIM} dimensions are supported, got {d}")
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    if n < 10 * n_components:
        raise TooFewSamples(f"{n} samples is fewer than 10 x {n_components} components")

    weights, means, cov = _init_params(x, n_components, rng, var_floor)
    history: list[float] = []
    converged = False
    eye = np.eye(d)
    for _ in range(max_iter):
        nk = np.zeros(n_components)
        sx = np.zeros((n_components, d))
        sxx = np.zeros((n_components, d, d))
        total = 0.0
        for s in range(0, n, CHUNK):
            c = x[s:s + CHUNK]
            joint, ll = _chunk_logprob(c, (weights, means, cov))
            resp = _exp_clipped(joint - ll[:, None])
            total += float(ll.sum())
            nk += resp.sum(axis=0)
            sx += resp.T @ c
            if d == 1:
                sxx[:, 0, 0] += resp.T @ (c[:, 0] * c[:, 0])
            else:
                sxx += np.einsum("nk,ni,nj->kij", resp, c, c)
        history.append(total)
        if len(history) > 1 and history[-1] - history[-2] < rel_tol * abs(history[-1]):
            converged = True
            break

        # M-step; components that lost all mass keep their previous shape
        alive = nk > 1e-12
        nk_safe = np.where(alive, nk, 1.0)
        new_means = np.where(alive[:, None], sx / nk_safe[:, None], means)
        second = sxx / nk_safe[:, None, None]
        new_cov = second - np.einsum("ki,kj->kij", new_means, new_means)
        new_cov = 0.5 * (new_cov + np.transpose(new_cov, (0, 2, 1)))
        if d == 1:
            new_cov = np.maximum(new_cov, var_floor)
        else:
            min_eig = np.linalg.eigvalsh(new_cov)[:, 0]
            new_cov = new_cov + np.maximum(var_floor - min_eig, 0.0)[:, None, None] * eye
        cov = np.where(alive[:, None, None], new_cov, cov)
        means = new_means
        weights = nk / nk.sum()

    if not converged:
        history.append(
            sum(float(_chunk_logprob(x[s:s + CHUNK], (weights, means, cov))[1].sum()) for s in range(0, n, CHUNK))
        )

    flat_means = means[:, 0] if d == 1 else means
    flat_cov = cov[:, 0, 0] if d == 1 else cov
    return GmmFit(
        n_components=n_components,
        weights=weights,
        means=flat_means,
        variances=flat_cov,
        final_loglik=history[-1],
        converged=converged,
        n_iter=len(history),
        loglik_history=tuple(history),
    )
