import numpy as np
import pytest

from darksynth.errors import DegenerateFit, GeometryMismatch, SaturatedRoi, TooFewLevels
from darksynth.frames import LinearFrame, SensorProfile
from darksynth.ptc import PtcFit, central_roi, compare_k, discover_pairs, pair_statistics, ptc_from_flatfields
from darksynth.rng import Rng
from darksynth.shot_noise import GainHypothesis, add_shot_noise

LEVELS = (16, 32, 48, 64, 80, 96, 112, 128)


def synthetic_flats(k, levels=LEVELS, shape=(1024, 1024), read_sigma=2.0, seed=0, offset=None):
    g = np.random.default_rng(seed)
    gain = GainHypothesis(k, 1.0, k)
    pairs = []
    for i, level in enumerate(levels):
        clean = LinearFrame(np.full(shape, float(level)))
        pair = []
        for j in range(2):
            v = add_shot_noise(clean, gain, Rng(seed * 1000 + 2 * i + j)).values
            v = v + g.normal(0, read_sigma, shape)
            if offset is not None:
                v = v + offset
            pair.append(LinearFrame(v))
        pairs.append(tuple(pair))
    return pairs


def test_closed_loop_calibrated_k():
    fit = ptc_from_flatfields(synthetic_flats(8.74, seed=1))
    assert abs(fit.k_hat / 8.74 - 1) < 0.03
    assert abs(fit.read_var / 4.0 - 1) < 0.15
    assert fit.r2 > 0.99


@pytest.mark.parametrize("k", [0.5, 8.74, 25.6])
def test_closed_loop_k_range(k):
    levels = tuple(200 * (i + 1) for i in range(8))
    fit = ptc_from_flatfields(synthetic_flats(k, levels, shape=(256, 256), seed=2))
    assert abs(fit.k_hat / k - 1) < 0.03


def test_exact_line():
    # two flat pairs with (mean, difference variance) = (100, 1000) and (200, 2000)
    pts = np.array([[100.0, 1000.0], [200.0, 2000.0]])
    pairs = []
    for m, v in pts:
        s = np.sqrt(v)
        a = np.full((4, 4), m)
        d = np.array([[1, -1, 1, -1], [-1, 1, -1, 1]] * 2, dtype=float)
        # (a - b) / sqrt2 has values +-s with ddof=1 variance v * 16/15; rescale
        d *= s * np.sqrt(15 / 16) / np.sqrt(2)
        pairs.append((LinearFrame(a + d), LinearFrame(a - d)))
    res = ptc_from_flatfields(pairs, area_fraction=1.0)
    assert res.k_hat == pytest.approx(10.0, rel=1e-12)
    assert res.read_var == pytest.approx(0.0, abs=1e-8)


def test_noise_free_is_degenerate():
    pairs = [(LinearFrame(np.full((8, 8), m)), LinearFrame(np.full((8, 8), m))) for m in (10.0, 20.0, 30.0)]
    with pytest.raises(DegenerateFit):
        ptc_from_flatfields(pairs)
    assert issubclass(DegenerateFit, TooFewLevels)


def test_errors():
    pair = (LinearFrame(np.ones((4, 4))), LinearFrame(np.ones((4, 4))))
    with pytest.raises(TooFewLevels):
        ptc_from_flatfields([pair])
    bright = LinearFrame(np.full((4, 4), 16000.0), black_level=512, white_level=16383)
    with pytest.raises(SaturatedRoi):
        ptc_from_flatfields([pair, (bright, bright)])
    with pytest.raises(GeometryMismatch):
        pair_statistics(LinearFrame(np.ones((4, 4))), LinearFrame(np.ones((2, 2))))


def test_scale_equivariance():
    pairs = synthetic_flats(3.0, shape=(64, 64), seed=3)
    base = ptc_from_flatfields(pairs).k_hat
    c = 2.5
    scaled = [(LinearFrame(a.values * c), LinearFrame(b.values * c)) for a, b in pairs]
    assert ptc_from_flatfields(scaled).k_hat == pytest.approx(c * base, rel=1e-9)


def test_fixed_pattern_cancels():
    offset = np.random.default_rng(9).normal(0, 50, (64, 64))
    plain = synthetic_flats(3.0, shape=(64, 64), seed=4)
    shifted = [(LinearFrame(a.values + offset), LinearFrame(b.values + offset)) for a, b in plain]
    for (a, b), (c, d) in zip(plain, shifted):
        assert pair_statistics(a, b)[1] == pytest.approx(pair_statistics(c, d)[1], rel=1e-9)


def test_central_roi_quarter_area():
    ys, xs = central_roi((100, 200))
    assert (ys.stop - ys.start, xs.stop - xs.start) == (50, 100)
    assert (ys.start, xs.start) == (25, 50)


def test_compare_k_reference_gains():
    prof = SensorProfile(base_iso=400)
    r = compare_k(prof, 25600, PtcFit(25.6, 0, 1))
    assert r["implied_qe"] == pytest.approx(0.40) and r["in_band"]
    r = compare_k(prof, 25600, PtcFit(51.2, 0, 1))
    assert r["implied_qe"] == pytest.approx(0.80) and not r["in_band"]
    r = compare_k(prof, 6400, PtcFit(0.5 * 16, 0, 1))
    assert r["implied_qe"] == 0.5


def test_discover_pairs(tmp_path):
    for name in ("010_a.rawb", "010_b.rawb", "002_a.rawb", "002_b.rawb", "003_a.rawb", "notes.txt"):
        (tmp_path / name).write_bytes(b"")
    found = discover_pairs(tmp_path)
    assert [lvl for lvl, _, _ in found] == ["002", "010"]
