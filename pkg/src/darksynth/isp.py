"""Minimal ISP used only for visual previews of RAW frames."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import convolve

from .frames import CFA, LinearFrame, RawFrame, to_linear

GAMMA = 1.0 / 2.2

_KERNEL_G = np.array([[0, 1, 0], [1, 4, 1], [0, 1, 0]], dtype=np.float64) / 4.0
_KERNEL_RB = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float64) / 4.0


def cfa_masks(shape, cfa: CFA) -> dict[str, np.ndarray]:
    masks = {c: np.zeros(shape, dtype=bool) for c in "RGB"}
    for (dy, dx), colour in zip(((0, 0), (0, 1), (1, 0), (1, 1)), CFA.parse(cfa).layout):
        masks[colour][dy::2, dx::2] = True
    return masks


def demosaic_bilinear(mosaic: np.ndarray, cfa: CFA) -> np.ndarray:
    """Bilinear demosaic by normalized convolution; returns (H, W, 3) RGB."""
    out = np.empty(mosaic.shape + (3,))
    masks = cfa_masks(mosaic.shape, cfa)
    for i, colour in enumerate("RGB"):
        kernel = _KERNEL_G if colour == "G" else _KERNEL_RB
        m = masks[colour].astype(np.float64)
        num = convolve(mosaic * m, kernel, mode="mirror")
        den = convolve(m, kernel, mode="mirror")
        out[..., i] = np.where(masks[colour], mosaic, num / den)
    return out


def apply_digital_gain(frame: RawFrame | LinearFrame, digital_gain: float) -> np.ndarray:
    """Black-level-removed DN times ``digital_gain``, clipped to [0, white - black]."""
    if not digital_gain > 0:
        raise ValueError("digital_gain must be positive")
    lin = to_linear(frame) if isinstance(frame, RawFrame) else frame
    return np.clip(lin.values * digital_gain, 0.0, float(lin.white_level - lin.black_level))


def gray_world(rgb: np.ndarray) -> np.ndarray:
    means = rgb.reshape(-1, 3).mean(axis=0)
    gains = np.where(means > 0, means[1] / np.where(means > 0, means, 1.0), 1.0)
    return rgb * gains


def render(frame: RawFrame | LinearFrame, digital_gain: float = 1.0) -> np.ndarray:
    """8-bit sRGB-ish preview as an (H, W, 3) uint8 array."""
    span = float(frame.white_level - frame.black_level)
    linear = apply_digital_gain(frame, digital_gain) / span
    rgb = np.clip(gray_world(demosaic_bilinear(linear, frame.cfa)), 0.0, 1.0)
    return np.round(255.0 * rgb**GAMMA).astype(np.uint8)


def render_preview(frame: RawFrame | LinearFrame, digital_gain: float, out) -> np.ndarray:
    img = render(frame, digital_gain)
    Image.fromarray(img).save(Path(out), format="PNG")
    return img
