import math

import numpy as np
import pytest

from darksynth.errors import InvalidLambda, NonPositiveGain, QeOutOfRange, InvariantViolation
from darksynth.frames import LinearFrame, SensorProfile
from darksynth.rng import Rng
from darksynth.shot_noise import GainHypothesis, add_shot_noise, hypothesize_k, poisson_sample, poisson_samples


def poisson_pmf(lam, n):
    # closed form, independent of the sampler and of scipy
    return math.exp(-lam + n * math.log(lam) - math.lgamma(n + 1))


@pytest.fixture
def base400():
    return SensorProfile(name="base400", base_iso=400)


def test_narrow_range_gain_rule(base400):
    g = hypothesize_k(base400, 25600, qe_override=0.40)
    assert g.analog_gain == 64.0
    assert g.k == pytest.approx(25.6, abs=1e-12)
    # narrow-range rule K = ISO/100 * 0.1
    assert g.k == pytest.approx(25600 / 100 * 0.1)


def test_qe_out_of_band(base400):
    with pytest.raises(QeOutOfRange):
        hypothesize_k(base400, 25600, qe_override=0.80)
    with pytest.raises(QeOutOfRange):
        hypothesize_k(base400, 25600, qe_override=0.29)


def test_midpoint_hypothesis(base400):
    g = hypothesize_k(base400, 400, qe_override=0.50)
    assert g.k == 0.5
    assert hypothesize_k(base400, 400).k == 0.5


def test_drawn_qe_stays_in_band(base400):
    rng = Rng(5)
    ks = np.array([hypothesize_k(base400, 6400, rng=rng).k for _ in range(20000)])
    ag = 6400 / 400
    assert ks.min() >= 0.30 * ag and ks.max() <= 0.70 * ag
    assert ks.max() / ks.min() <= 0.70 / 0.30 + 1e-9


def test_gain_invariant():
    with pytest.raises(InvariantViolation):
        GainHypothesis(analog_gain=2.0, qe=0.5, k=1.5)
    with pytest.raises(InvariantViolation):
        hypothesize_k(SensorProfile(), 0)


def test_zero_signal_is_exactly_zero():
    clean = LinearFrame(np.zeros((64, 64)))
    out = add_shot_noise(clean, GainHypothesis.from_qe(10.0, 0.5), Rng(1))
    assert (out.values == 0).all()


def test_negative_clean_floored():
    clean = LinearFrame(np.full((16, 16), -50.0))
    out = add_shot_noise(clean, GainHypothesis.from_qe(10.0, 0.5), Rng(1))
    assert (out.values == 0).all()


def test_non_positive_gain():
    clean = LinearFrame(np.ones((4, 4)))
    with pytest.raises(NonPositiveGain):
        add_shot_noise(clean, GainHypothesis.from_qe(0.0, 0.5), Rng(1))


def test_moments_at_calibrated_k():
    clean = LinearFrame(np.full((1000, 1000), 1000.0))
    out = add_shot_noise(clean, GainHypothesis(analog_gain=8.74, qe=1.0, k=8.74), Rng(2)).values
    assert abs(out.mean() - 1000) < 10
    assert abs(out.var() - 8740) < 0.02 * 8740


def test_unbiased_across_gain():
    clean = LinearFrame(np.full((1000, 1000), 1000.0))
    m4 = add_shot_noise(clean, GainHypothesis(4.0, 1.0, 4.0), Rng(3)).values.mean()
    m17 = add_shot_noise(clean, GainHypothesis(17.0, 1.0, 17.0), Rng(4)).values.mean()
    assert abs(m4 - m17) / 1000 < 0.005


def test_output_is_multiple_of_k():
    k = 2.5
    clean = LinearFrame(np.full((32, 32), 40.0))
    out = add_shot_noise(clean, GainHypothesis(k, 1.0, k), Rng(9)).values
    np.testing.assert_allclose(out / k, np.round(out / k), atol=1e-9)


def test_determinism():
    clean = LinearFrame(np.random.default_rng(0).uniform(0, 500, (40, 40)))
    g = GainHypothesis.from_qe(8.0, 0.5)
    a = add_shot_noise(clean, g, Rng(77)).values
    b = add_shot_noise(clean, g, Rng(77)).values
    c = add_shot_noise(clean, g, Rng(78)).values
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_poisson_zero_and_errors():
    assert poisson_sample(0.0, Rng(0)) == 0
    for bad in (-1.0, float("nan"), float("inf")):
        with pytest.raises(InvalidLambda):
            poisson_sample(bad, Rng(0))


@pytest.mark.parametrize("lam", [0.3, 4.5, 9.99, 10.0, 37.0])
def test_poisson_pmf_total_variation(lam):
    draws = poisson_samples(np.full(400_000, lam), Rng(11))
    assert draws.dtype.kind in "iu"
    top = int(draws.max()) + 1
    emp = np.bincount(draws, minlength=top) / draws.size
    exact = np.array([poisson_pmf(lam, n) for n in range(top)])
    tv = 0.5 * (np.abs(emp - exact).sum() + max(0.0, 1 - exact.sum()))
    assert tv < 0.006


def test_poisson_tv_million_at_4_5():
    draws = poisson_samples(np.full(1_000_000, 4.5), Rng(12))
    top = int(draws.max()) + 1
    emp = np.bincount(draws, minlength=top) / draws.size
    exact = np.array([poisson_pmf(4.5, n) for n in range(top)])
    assert 0.5 * (np.abs(emp - exact).sum() + (1 - exact.sum())) < 0.003


def test_poisson_large_lambda_moments():
    draws = poisson_samples(np.full(100_000, 1e4), Rng(13)).astype(float)
    assert abs(draws.mean() - 1e4) < 100
    assert abs(draws.var() - 1e4) < 300


def test_poisson_mixed_lambda_vector():
    lam = np.tile([0.0, 2.0, 50.0], 100_000)
    d = poisson_samples(lam, Rng(14)).reshape(-1, 3).astype(float)
    assert (d[:, 0] == 0).all()
    assert abs(d[:, 1].mean() - 2.0) < 0.03
    assert abs(d[:, 2].mean() - 50.0) < 0.2
