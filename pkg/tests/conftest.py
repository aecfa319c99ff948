import numpy as np
import pytest

from darksynth.frames import CFA, LinearFrame, RawFrame, SensorProfile, quantize
from darksynth.rawio import write_rawb

BLACK = 512
WHITE = 16383


def dark_frames(n, shape=(32, 32), iso=6400, sigma=3.0, pattern=None, seed=0, noise="normal", black=BLACK):
    """Quantized dark frames = black level + fixed pattern + i.i.d. noise."""
    g = np.random.default_rng(seed)
    if pattern is None:
        pattern = np.zeros(shape)
    frames = []
    for _ in range(n):
        if noise == "normal":
            eps = g.normal(0.0, sigma, shape)
        elif noise == "laplace":
            eps = g.laplace(0.0, sigma, shape)
        elif noise == "zero":
            eps = np.zeros(shape)
        else:
            raise ValueError(noise)
        lin = LinearFrame(pattern + eps, black_level=black, white_level=WHITE, iso=iso)
        frames.append(quantize(lin))
    return frames


def write_frames(directory, frames, prefix="dark"):
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, f in enumerate(frames):
        p = directory / f"{prefix}_{i:04d}.rawb"
        write_rawb(f, p)
        paths.append(p)
    return paths


def constant_raw(value, shape=(4, 4), **meta):
    meta.setdefault("bit_depth", 14)
    meta.setdefault("black_level", BLACK)
    meta.setdefault("white_level", WHITE)
    return RawFrame(np.full(shape, value, dtype=np.uint16), **meta)


@pytest.fixture
def profile():
    return SensorProfile(name="test", base_iso=400, black_level=BLACK, white_level=WHITE, cfa=CFA.RGGB)


@pytest.fixture
def rng_np():
    return np.random.default_rng(12345)


def clean_frames(n, shape=(32, 32), iso=6400, seed=100):
    g = np.random.default_rng(seed)
    return [
        quantize(LinearFrame(g.uniform(0, 800, shape), black_level=BLACK, white_level=WHITE, iso=iso))
        for _ in range(n)
    ]


def fixture_tree(root, n_clean=10, n_dark=10, shape=(32, 32), iso=6400):
    """clean/ and dark/ directories of RAWB frames for end-to-end runs."""
    write_frames(root / "clean", clean_frames(n_clean, shape, iso), prefix="scene")
    write_frames(root / "dark", dark_frames(n_dark, shape, iso=iso, sigma=3.0, seed=7))
    return root / "clean", root / "dark"


def tree_bytes(directory):
    return {p.relative_to(directory).as_posix(): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}
