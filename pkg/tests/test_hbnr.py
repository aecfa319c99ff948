import numpy as np
import pytest
from scipy import stats

from darksynth.dark_bank import DarkShading
from darksynth.errors import DegenerateSamples, GeometryMismatch
from darksynth.frames import LinearFrame, quantize, to_linear
from darksynth.hbnr import Family, HbnrModel, expand_bit_depth, fit_hbnr
from darksynth.rng import Rng

from conftest import BLACK, WHITE, dark_frames


def _corrected(frames):
    return [to_linear(f) for f in frames]


def _ks(x, cdf):
    x = np.sort(x)
    f = cdf(x)
    n = x.size
    return max(np.max(np.arange(1, n + 1) / n - f), np.max(f - np.arange(n) / n))


def test_gaussian_selected():
    frames = dark_frames(4, (500, 500), sigma=3.0, seed=1)
    assert fit_hbnr(_corrected(frames)).family is Family.GAUSSIAN


def test_uniform_selected():
    g = np.random.default_rng(2)
    frames = [LinearFrame(g.uniform(-2, 2, (500, 500))) for _ in range(4)]
    m = fit_hbnr(frames)
    assert m.family is Family.UNIFORM
    assert abs(m.loc) < 0.01 and abs(m.scale - 2) < 0.01


def test_constant_frames_degenerate():
    with pytest.raises(DegenerateSamples):
        fit_hbnr([LinearFrame(np.full((8, 8), 3.0))] * 3)
    with pytest.raises(DegenerateSamples):
        fit_hbnr([])


def test_forced_family_and_serialization():
    frames = _corrected(dark_frames(2, (64, 64), sigma=2.0, seed=3))
    m = fit_hbnr(frames, "tukey")
    assert m.family is Family.TUKEY and m.shape is not None
    assert HbnrModel.from_dict(m.to_dict()) == m


@pytest.mark.parametrize("family", list(Family))
def test_model_cdf_ppf_consistency(family):
    m = HbnrModel(family, 0.5, 2.0, 0.2 if family is Family.TUKEY else None)
    u = np.linspace(0.01, 0.99, 99)
    np.testing.assert_allclose(m.cdf(m.ppf(u)), u, atol=1e-9)


def test_gaussian_model_matches_reference():
    m = HbnrModel(Family.GAUSSIAN, 1.0, 3.0)
    x = np.linspace(-10, 10, 41)
    np.testing.assert_allclose(m.cdf(x), stats.norm.cdf(x, 1, 3), atol=1e-14)
    np.testing.assert_allclose(m.logpdf(x), stats.norm.logpdf(x, 1, 3), atol=1e-12)


def test_round_trip_and_bin_membership():
    g = np.random.default_rng(4)
    model = HbnrModel(Family.GAUSSIAN, 0.0, 3.0)
    for i in range(100):
        shading = DarkShading(g.normal(0, 2, (16, 16)), iso=6400, frame_count=10,
                              black_level=BLACK, white_level=WHITE)
        frame = dark_frames(1, (16, 16), sigma=float(g.uniform(0.5, 20)), pattern=shading.mean_map, seed=i)[0]
        out = expand_bit_depth(frame, shading, model, Rng(i))
        assert quantize(out) == frame
        v = frame.pixels.astype(float) - BLACK
        assert np.all(np.abs(out.values - v) < 0.5)


def test_round_trip_at_clipping_edges():
    frame = quantize(LinearFrame(np.array([[-1e6, 1e6], [0.0, -0.49]]), black_level=BLACK, white_level=WHITE))
    sh = DarkShading.zeros((2, 2), black_level=BLACK, white_level=WHITE)
    out = expand_bit_depth(frame, sh, HbnrModel(Family.UNIFORM, 0.0, 1.0), Rng(0))
    assert quantize(out) == frame


def test_geometry_mismatch():
    frame = dark_frames(1, (4, 4))[0]
    with pytest.raises(GeometryMismatch):
        expand_bit_depth(frame, DarkShading.zeros((2, 2)), HbnrModel(Family.GAUSSIAN, 0, 1), Rng(0))


def _expanded_ks(noise, seed):
    frames = dark_frames(4, (500, 500), sigma=3.0, seed=seed, noise=noise)
    shading = DarkShading.zeros((500, 500), black_level=BLACK, white_level=WHITE)
    model = fit_hbnr(_corrected(frames), "gaussian")
    out = np.concatenate(
        [expand_bit_depth(f, shading, model, Rng(seed * 10 + i)).values.ravel() for i, f in enumerate(frames)]
    )
    return _ks(out, model.cdf)


def test_ks_correct_specification():
    assert _expanded_ks("normal", 5) < 0.005


def test_ks_misspecified_laplace():
    assert _expanded_ks("laplace", 6) > 0.02


def test_expansion_deterministic():
    frame = dark_frames(1, (32, 32), seed=7)[0]
    sh = DarkShading.zeros((32, 32), black_level=BLACK)
    m = HbnrModel(Family.GAUSSIAN, 0, 3)
    a = expand_bit_depth(frame, sh, m, Rng(3)).values
    b = expand_bit_depth(frame, sh, m, Rng(3)).values
    np.testing.assert_array_equal(a, b)
