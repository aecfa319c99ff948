from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darksynth.dark_bank import (
    DarkBank,
    DarkShading,
    calibrate_shading,
    group_key,
    load_bank,
    recalibrate_online,
    sample_dark,
)
from darksynth.errors import BadCrop, EmptyBank, EmptySubset, MixedGeometry, NTooLarge, UnknownGain
from darksynth.frames import CFA, RawFrame
from darksynth.rawio import write_rawb
from darksynth.rng import Rng

from conftest import BLACK, constant_raw, dark_frames, write_frames


def test_24_isos_of_400(tmp_path, profile):
    isos = [100 * 2 ** (i / 3) for i in range(24)]
    isos = sorted({int(round(v)) for v in isos})
    assert len(isos) == 24
    tiny = np.full((2, 2), BLACK, np.uint16)
    for iso in isos:
        f = RawFrame(tiny, iso=iso, black_level=BLACK)
        for i in range(400):
            write_rawb(f, tmp_path / f"iso{iso}_{i:04d}.rawb")
    bank = load_bank(tmp_path, profile)
    assert len(bank.keys()) == 24
    assert all(bank.size(iso) == 400 for iso in isos)


def test_mixed_geometry(tmp_path, profile):
    write_rawb(constant_raw(512, (4, 4), iso=100), tmp_path / "a.rawb")
    write_rawb(constant_raw(512, (4, 6), iso=100), tmp_path / "b.rawb")
    with pytest.raises(MixedGeometry):
        load_bank(tmp_path, profile)


def test_empty_bank(tmp_path, profile):
    with pytest.raises(EmptyBank):
        load_bank(tmp_path, profile)


def test_filename_order_and_tags(tmp_path, profile):
    write_rawb(constant_raw(520, (2, 2), iso=800), tmp_path / "b.rawb")
    write_rawb(constant_raw(530, (2, 2), iso=800), tmp_path / "a.rawb")
    (tmp_path / "hot").mkdir()
    write_rawb(constant_raw(600, (2, 2), iso=800), tmp_path / "hot" / "x.rawb")
    bank = load_bank(tmp_path, profile)
    assert bank.frame_names(800) == ["a.rawb", "b.rawb"]
    assert bank.frame(800, 0).pixels[0, 0] == 530
    assert sorted(bank.keys()) == ["800", "800:hot"]
    assert bank.frame(group_key(800, "hot"), 0).pixels[0, 0] == 600


def test_symmetric_pair_mean_zero():
    bank = DarkBank.from_frames([constant_raw(510, iso=100), constant_raw(514, iso=100)])
    sh = calibrate_shading(bank, 100)
    assert (sh.mean_map == 0.0).all()
    assert sh.frame_count == 2


def test_single_frame_subset():
    frames = dark_frames(3, (8, 8), iso=100)
    bank = DarkBank.from_frames(frames)
    sh = calibrate_shading(bank, 100, [0])
    np.testing.assert_array_equal(sh.mean_map, frames[0].pixels.astype(float) - BLACK)


def test_unknown_gain_and_empty_subset():
    bank = DarkBank.from_frames(dark_frames(2, (4, 4), iso=100))
    with pytest.raises(UnknownGain):
        calibrate_shading(bank, 200)
    with pytest.raises(EmptySubset):
        calibrate_shading(bank, 100, [])
    with pytest.raises(NTooLarge):
        recalibrate_online(bank, 100, 3, Rng(0))


def test_clt_bound_on_pattern():
    shape = (8, 8)
    pattern = np.random.default_rng(1).integers(-20, 20, shape).astype(float)
    bound = 5 * 4 / np.sqrt(180)
    trials = 300
    passes = 0
    for t in range(trials):
        bank = DarkBank.from_frames(dark_frames(180, shape, iso=100, sigma=5.0, pattern=pattern, seed=100 + t))
        err = np.abs(calibrate_shading(bank, 100).mean_map - pattern).max()
        passes += err < bound
    assert passes / trials >= 0.99


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_residual_mean_exactly_zero_power_of_two(n):
    frames = dark_frames(n, (8, 8), iso=100, sigma=40.0, seed=n)
    bank = DarkBank.from_frames(frames)
    sh = calibrate_shading(bank, 100)
    resid = sum((f.pixels.astype(float) - BLACK) - sh.mean_map for f in frames)
    assert (resid == 0).all()


@pytest.mark.parametrize("n", [3, 7, 180])
def test_residual_mean_zero_general_n(n):
    # exact rational residual: only the final division may round, by at most half an ulp
    frames = dark_frames(n, (4, 4), iso=100, sigma=40.0, seed=n)
    bank = DarkBank.from_frames(frames)
    m = calibrate_shading(bank, 100).mean_map
    for (r, c), value in np.ndenumerate(m):
        resid = sum(Fraction(int(f.pixels[r, c]) - BLACK) - Fraction(value) for f in frames) / n
        assert abs(resid) <= Fraction(np.spacing(abs(value) or 1.0)) / 2


def test_shading_reproducible():
    frames = dark_frames(37, (8, 8), iso=100, sigma=9.0, seed=4)
    bank = DarkBank.from_frames(frames)
    a = calibrate_shading(bank, 100, [5, 2, 30])
    b = calibrate_shading(bank, 100, [30, 5, 2])
    np.testing.assert_array_equal(a.mean_map, b.mean_map)
    full = calibrate_shading(bank, 100)
    online = recalibrate_online(bank, 100, 37, Rng(3))
    np.testing.assert_array_equal(full.mean_map, online.mean_map)


def test_online_single_frame_is_a_frame():
    frames = dark_frames(6, (4, 4), iso=100, seed=9)
    bank = DarkBank.from_frames(frames)
    sh = recalibrate_online(bank, 100, 1, Rng(4))
    assert any(np.array_equal(sh.mean_map, f.pixels.astype(float) - BLACK) for f in frames)


def test_online_rms_scales_and_monotone():
    shape = (32, 32)
    sigma = 5.0
    pattern = np.random.default_rng(2).normal(0, 10, shape)
    bank = DarkBank.from_frames(dark_frames(200, shape, iso=100, sigma=sigma, pattern=pattern, seed=8))
    rms = {}
    for n in (1, 10, 100):
        errs = [
            np.sqrt(np.mean((recalibrate_online(bank, 100, n, Rng(s)).mean_map - pattern) ** 2))
            for s in range(10)
        ]
        rms[n] = float(np.mean(errs))
    for n, r in rms.items():
        # quantization adds 1/12 DN^2 of variance per frame
        expected = np.sqrt((sigma**2 + 1 / 12) / n)
        assert abs(r - expected) / expected < 0.2
    assert rms[1] > rms[10] > rms[100]


def test_perfect_correction_gives_zero():
    pattern = np.arange(16, dtype=float).reshape(4, 4)
    frames = dark_frames(1, (4, 4), iso=100, pattern=pattern, noise="zero")
    bank = DarkBank.from_frames(frames)
    sh = calibrate_shading(bank, 100)
    out = sample_dark(bank, 100, sh, (0, 0, 4, 4), rng=Rng(0))
    assert (out.values == 0).all()


def test_full_crop_equals_corrected():
    frames = dark_frames(1, (6, 6), iso=100, seed=3)
    bank = DarkBank.from_frames(frames)
    sh = DarkShading(np.random.default_rng(0).normal(size=(6, 6)), iso=100, frame_count=1)
    out = sample_dark(bank, 100, sh, (0, 0, 6, 6), rng=Rng(0))
    np.testing.assert_array_equal(out.values, frames[0].pixels.astype(float) - BLACK - sh.mean_map)


def test_bad_crop():
    bank = DarkBank.from_frames(dark_frames(1, (8, 8), iso=100))
    sh = calibrate_shading(bank, 100)
    with pytest.raises(BadCrop):
        sample_dark(bank, 100, sh, (1, 0, 2, 2), rng=Rng(0))
    with pytest.raises(BadCrop):
        sample_dark(bank, 100, sh, (0, 0, 10, 2), rng=Rng(0))


def test_sample_moments():
    bank = DarkBank.from_frames(dark_frames(20, (64, 64), iso=100, sigma=3.0, seed=5))
    sh = DarkShading.zeros((64, 64), iso=100, black_level=BLACK)
    rng = Rng(6)
    vals = []
    for _ in range(10_000):
        y, x = 2 * int(rng.integers(0, 31)), 2 * int(rng.integers(0, 31))
        vals.append(sample_dark(bank, 100, sh, (y, x, 2, 2), rng=rng).values.ravel())
    v = np.concatenate(vals)
    assert abs(v.mean()) < 0.1
    assert abs(v.std() - 3.0) < 0.1


def test_sampling_determinism():
    bank = DarkBank.from_frames(dark_frames(10, (16, 16), iso=100, seed=2))
    sh = calibrate_shading(bank, 100)
    a = sample_dark(bank, 100, sh, (2, 4, 8, 8), (True, False), Rng(42))
    b = sample_dark(bank, 100, sh, (2, 4, 8, 8), (True, False), Rng(42))
    np.testing.assert_array_equal(a.values, b.values)


@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from(list(CFA)),
    st.integers(0, 6), st.integers(0, 6), st.integers(1, 4), st.integers(1, 4),
    st.booleans(), st.booleans(),
)
def test_sampled_patch_keeps_cfa_phase(cfa, y2, x2, h2, w2, vf, hf):
    H = W = 20
    phase = (np.arange(H)[:, None] % 2) * 2 + (np.arange(W)[None, :] % 2)
    frame = RawFrame((phase + 1000).astype(np.uint16), cfa=cfa, black_level=0, white_level=16383, iso=100)
    bank = DarkBank.from_frames([frame])
    sh = DarkShading.zeros((H, W), iso=100)
    y, x, h, w = 2 * y2, 2 * x2, 2 * h2, 2 * w2
    out = sample_dark(bank, 100, sh, (y, x, h, w), (vf, hf), rng=Rng(0))
    assert out.cfa == cfa
    np.testing.assert_array_equal(out.values - 1000, phase[:h, :w])
