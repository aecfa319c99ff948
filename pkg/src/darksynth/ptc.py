"""Photon transfer curve (PTC) estimation of the system gain from flat-field pairs."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateFit, GeometryMismatch, SaturatedRoi, TooFewLevels
from .frames import LinearFrame, SensorProfile

SATURATION_FRACTION = 0.9
_PAIR_NAME = re.compile(r"^(?P<level>.+)_(?P<side>[ab])\.rawb$", re.IGNORECASE)


@dataclass(frozen=True)
class PtcFit:
    k_hat: float
    read_var: float
    r2: float
    points: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "k_hat": self.k_hat,
            "read_var": self.read_var,
            "r2": self.r2,
            "points": [[m, v] for m, v in self.points],
        }


def central_roi(shape, area_fraction: float = 0.25) -> tuple[slice, slice]:
    """Centered window covering ``area_fraction`` of the frame."""
    h, w = shape
    side = np.sqrt(area_fraction)
    rh, rw = max(1, int(round(h * side))), max(1, int(round(w * side)))
    y0, x0 = (h - rh) // 2, (w - rw) // 2
    return slice(y0, y0 + rh), slice(x0, x0 + rw)


def pair_statistics(a: LinearFrame, b: LinearFrame, area_fraction: float = 0.25) -> tuple[float, float]:
    """(mean, temporal variance) of one flat pair over the central ROI.

    The difference of the two frames cancels any fixed pattern common to both.
    """
    if a.shape != b.shape:
        raise GeometryMismatch(f"flat pair shapes differ: {a.shape} vs {b.shape}")
    roi = central_roi(a.shape, area_fraction)
    va, vb = a.values[roi], b.values[roi]
    mean = float(np.mean(0.5 * (va + vb)))
    var = float(np.var((va - vb) / np.sqrt(2.0), ddof=1))
    return mean, var


def ptc_from_flatfields(
    pairs: Sequence[tuple[LinearFrame, LinearFrame]],
    area_fraction: float = 0.25,
) -> PtcFit:
    """Fit variance = k * mean + read_var by ordinary least squares."""
    if len(pairs) < 2:
        raise TooFewLevels(f"need at least 2 illumination levels, got {len(pairs)}")
    points = []
    for a, b in pairs:
        mean, var = pair_statistics(a, b, area_fraction)
        limit = SATURATION_FRACTION * (a.white_level - a.black_level)
        if mean > limit:
            raise SaturatedRoi(f"ROI mean {mean:.1f} DN exceeds {limit:.1f} DN")
        points.append((mean, var))
    m = np.array([p[0] for p in points])
    v = np.array([p[1] for p in points])
    if np.ptp(m) == 0:
        raise TooFewLevels("all flat pairs have the same mean level")
    if np.all(v <= 1e-12 * max(1.0, float(np.abs(m).max()))):
        raise DegenerateFit("flat pairs show no temporal noise; the PTC slope is undefined")
    slope, intercept = np.polyfit(m, v, 1)
    resid = v - (slope * m + intercept)
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else float("nan")
    return PtcFit(k_hat=float(slope), read_var=float(intercept), r2=r2, points=points)


def discover_pairs(directory) -> list[tuple[str, Path, Path]]:
    """Find ``<level>_a.rawb`` / ``<level>_b.rawb`` pairs, sorted by level name."""
    found: dict[str, dict[str, Path]] = {}
    for path in Path(directory).iterdir():
        match = _PAIR_NAME.match(path.name)
        if match:
            found.setdefault(match["level"], {})[match["side"].lower()] = path
    pairs = [(lvl, d["a"], d["b"]) for lvl, d in found.items() if {"a", "b"} <= d.keys()]
    return sorted(pairs, key=lambda p: p[0])


def compare_k(profile: SensorProfile, iso: int, ptc: PtcFit) -> dict:
    """Where a calibrated gain sits relative to the hypothesized QE band."""
    analog_gain = iso / profile.base_iso
    implied_qe = ptc.k_hat / analog_gain
    return {
        "iso": iso,
        "analog_gain": analog_gain,
        "k_hat": ptc.k_hat,
        "implied_qe": implied_qe,
        "qe_lo": profile.qe_lo,
        "qe_hi": profile.qe_hi,
        "in_band": bool(profile.qe_lo <= implied_qe <= profile.qe_hi),
    }
