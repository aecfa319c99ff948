"""Hypothesized system gain and scaled-Poisson shot noise.

A clean linear image ``I`` (DN) is turned into a shot-noisy one by drawing
``Poisson(I / k)`` photoelectrons per pixel and scaling back by ``k``; the
result keeps mean ``I`` and has variance ``k * I`` whatever ``k`` is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InvalidLambda, InvariantViolation, NonPositiveGain, QeOutOfRange
from .frames import LinearFrame, SensorProfile
from .rng import Rng, counter_states, counter_uniform

#: below this mean the sampler inverts the CDF, above it uses PTRS
INVERSION_CUTOFF = 10.0
_MAX_INVERSION_STEPS = 256
_MAX_REJECTION_ROUNDS = 4096


@dataclass(frozen=True)
class GainHypothesis:
    analog_gain: float
    qe: float
    k: float

    def __post_init__(self):
        if self.k != self.qe * self.analog_gain:
            raise InvariantViolation(f"k={self.k} is not qe*analog_gain={self.qe * self.analog_gain}")

    @classmethod
    def from_qe(cls, analog_gain: float, qe: float) -> "GainHypothesis":
        analog_gain, qe = float(analog_gain), float(qe)
        return cls(analog_gain=analog_gain, qe=qe, k=qe * analog_gain)

    def to_dict(self) -> dict:
        return {"analog_gain": self.analog_gain, "qe": self.qe, "k": self.k}


def hypothesize_k(
    profile: SensorProfile,
    iso: int,
    qe_override: float | None = None,
    rng: Rng | None = None,
) -> GainHypothesis:
    """Pick a system gain for ``iso`` without flat-field calibration.

    The analog gain is taken as linear in ISO through ``profile.base_iso``.
    The QE is ``qe_override`` when given, otherwise a uniform draw over the
    profile's QE band when ``rng`` is given, otherwise the profile's fixed
    hypothesis.
    """
    if iso <= 0:
        raise InvariantViolation(f"iso must be positive, got {iso}")
    if qe_override is not None:
        if not profile.qe_lo <= qe_override <= profile.qe_hi:
            raise QeOutOfRange(
                f"qe {qe_override} outside [{profile.qe_lo}, {profile.qe_hi}] for {profile.name}"
            )
        qe = float(qe_override)
    elif rng is not None:
        qe = float(rng.uniform(profile.qe_lo, profile.qe_hi))
        qe = min(max(qe, profile.qe_lo), profile.qe_hi)
    else:
        qe = profile.qe_hypothesis
    return GainHypothesis.from_qe(iso / profile.base_iso, qe)


def _poisson_inversion(lam: np.ndarray, states: np.ndarray) -> np.ndarray:
    u = counter_uniform(states, 0)
    p = np.exp(-lam)
    cdf = p.copy()
    out = np.zeros(lam.shape, dtype=np.int64)
    active = u > cdf
    k = 0
    while k < _MAX_INVERSION_STEPS:
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        k += 1
        p[idx] *= lam[idx] / k
        cdf[idx] += p[idx]
        out[idx] = k
        active[idx] = u[idx] > cdf[idx]
    return out


def _poisson_ptrs(lam: np.ndarray, states: np.ndarray) -> np.ndarray:
    # Hoermann (1993) transformed rejection with squeeze
    slam = np.sqrt(lam)
    loglam = np.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    log_invalpha = np.log(1.1239 + 1.1328 / (b - 3.4))
    vr = 0.9277 - 3.6224 / (b - 2.0)

    out = np.zeros(lam.shape, dtype=np.int64)
    pending = np.arange(lam.size)
    for attempt in range(_MAX_REJECTION_ROUNDS):
        if pending.size == 0:
            break
        st = states[pending]
        U = counter_uniform(st, 2 * attempt) - 0.5
        V = counter_uniform(st, 2 * attempt + 1)
        a_, b_, lam_ = a[pending], b[pending], lam[pending]
        us = 0.5 - np.abs(U)
        k = np.floor((2.0 * a_ / us + b_) * U + lam_ + 0.43)

        accept = (us >= 0.07) & (V <= vr[pending])
        reject = (k < 0) | ((us < 0.013) & (V > us))
        test = ~accept & ~reject
        if test.any():
            kt = k[test]
            lhs = np.log(V[test]) + log_invalpha[pending][test] - np.log(a_[test] / (us[test] ** 2) + b_[test])
            rhs = -lam_[test] + kt * loglam[pending][test] - gammaln(kt + 1.0)
            accept[np.flatnonzero(test)[lhs <= rhs]] = True
        out[pending[accept]] = k[accept].astype(np.int64)
        pending = pending[~accept]
    if pending.size:
        raise RuntimeError("Poisson rejection sampler failed to converge")
    return out


def poisson_counter(lam: np.ndarray, key: int) -> np.ndarray:
    """Exact Poisson draws, element ``i`` driven only by ``(key, i)``."""
    lam = np.asarray(lam, dtype=np.float64)
    flat = lam.ravel()
    if flat.size and (not np.all(np.isfinite(flat)) or flat.min() < 0):
        raise InvalidLambda("Poisson means must be finite and non-negative")
    states = counter_states(key, flat.size)
    out = np.zeros(flat.size, dtype=np.int64)
    small = flat < INVERSION_CUTOFF
    if small.any():
        out[small] = _poisson_inversion(flat[small], states[small])
    if (~small).any():
        out[~small] = _poisson_ptrs(flat[~small], states[~small])
    return out.reshape(lam.shape)


def poisson_samples(lam, rng: Rng) -> np.ndarray:
    return poisson_counter(lam, rng.next_key())


def poisson_sample(lam: float, rng: Rng) -> int:
    if not (isinstance(lam, (int, float, np.floating, np.integer)) and math.isfinite(lam) and lam >= 0):
        raise InvalidLambda(f"invalid Poisson mean {lam!r}")
    return int(poisson_counter(np.array([float(lam)]), rng.next_key())[0])


def add_shot_noise(clean: LinearFrame, gain: GainHypothesis, rng: Rng) -> LinearFrame:
    """Return ``k * Poisson(max(I, 0) / k)`` per pixel, unquantized."""
    k = gain.k
    if not k > 0:
        raise NonPositiveGain(f"system gain must be positive, got {k}")
    lam = np.maximum(clean.values, 0.0) / k
    counts = poisson_counter(lam, rng.next_key())
    return clean.with_values(counts * k)
