"""Seeded randomness.

Two kinds of draws are supported:

* sequential draws (crop positions, k-means++ seeding, resampling) come from a
  numpy ``PCG64`` generator owned by an :class:`Rng`;
* per-pixel draws come from a stateless counter-based hash, so a pixel's noise
  depends only on ``(key, pixel index, draw index)`` and never on traversal
  order.

Child seeds are derived with the SplitMix64 step::

    child(seed, i) = mix64(seed + (i + 1) * 0x9E3779B97F4A7C15  mod 2**64)

where ``mix64`` is the SplitMix64 output finalizer.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_KEY_SALT = 0xD1B54A32D192ED03

_U_GOLDEN = np.uint64(GOLDEN)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def splitmix64(seed: int, index: int) -> int:
    """Derive the ``index``-th child seed of ``seed``."""
    return mix64((seed + (index + 1) * GOLDEN) & MASK64)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def counter_states(key: int, n: int) -> np.ndarray:
    """Per-element stream states for elements ``0..n-1`` under ``key``."""
    idx = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix_array(np.uint64(key & MASK64) + idx * _U_GOLDEN)


def counter_uniform(states: np.ndarray, draw: int) -> np.ndarray:
    """The ``draw``-th uniform on the open interval (0, 1) for each state."""
    step = np.uint64(((draw + 1) * GOLDEN) & MASK64)
    with np.errstate(over="ignore"):
        bits = _mix_array(states + step) >> _S11
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


class Rng:
    """Single-owner random source. Never share one between concurrent tasks."""

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))
        self._keys = 0

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed})"

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def child(self, index: int) -> "Rng":
        return Rng(splitmix64(self.seed, index))

    def next_key(self) -> int:
        """Key for a fresh counter-based stream; advances the call sequence."""
        key = splitmix64(self.seed ^ _KEY_SALT, self._keys)
        self._keys += 1
        return key

    def random(self, size=None):
        return self._gen.random(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def choice(self, a, size=None, replace=True, p=None):
        return self._gen.choice(a, size=size, replace=replace, p=p)
