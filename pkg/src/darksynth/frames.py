"""Frame containers, sensor constants and the linear/quantized conversions."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadCrop, InvariantViolation


class CFA(enum.IntEnum):
    RGGB = 0
    BGGR = 1
    GRBG = 2
    GBRG = 3

    @property
    def layout(self) -> tuple[str, str, str, str]:
        """Colours at (0,0), (0,1), (1,0), (1,1)."""
        return tuple(self.name)  # type: ignore[return-value]

    @classmethod
    def parse(cls, value) -> "CFA":
        if isinstance(value, CFA):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise InvariantViolation(f"unknown CFA pattern {value!r}") from None
        try:
            return cls(int(value))
        except ValueError:
            raise InvariantViolation(f"unknown CFA code {value!r}") from None


def _f32(x: float) -> float:
    # the container stores analog_gain as f32; keep frames exactly representable
    return float(np.float32(x))


@dataclass(frozen=True, eq=False)
class RawFrame:
    """Single-plane Bayer mosaic of unsigned 16-bit digital numbers."""

    pixels: np.ndarray
    cfa: CFA = CFA.RGGB
    bit_depth: int = 14
    black_level: int = 0
    white_level: int = 16383
    iso: int = 0
    analog_gain: float = 0.0

    def __post_init__(self):
        pix = np.asarray(self.pixels)
        if pix.ndim != 2:
            raise InvariantViolation(f"pixels must be 2-D, got shape {pix.shape}")
        if pix.dtype != np.uint16:
            if pix.size and (pix.min() < 0 or pix.max() > 0xFFFF):
                raise InvariantViolation("pixel values do not fit in u16")
            if np.issubdtype(pix.dtype, np.floating) and not np.array_equal(pix, np.round(pix)):
                raise InvariantViolation("pixels must be integral")
        pix = np.array(pix, dtype=np.uint16, copy=True)
        pix.setflags(write=False)
        object.__setattr__(self, "pixels", pix)
        object.__setattr__(self, "cfa", CFA.parse(self.cfa))
        object.__setattr__(self, "analog_gain", _f32(self.analog_gain))
        for name in ("bit_depth", "black_level", "white_level", "iso"):
            object.__setattr__(self, name, int(getattr(self, name)))

        if not 8 <= self.bit_depth <= 16:
            raise InvariantViolation(f"bit_depth {self.bit_depth} outside [8, 16]")
        top = (1 << self.bit_depth) - 1
        if not 0 <= self.black_level < self.white_level <= top:
            raise InvariantViolation(
                f"need 0 <= black_level < white_level <= {top}, "
                f"got {self.black_level}, {self.white_level}"
            )
        h, w = pix.shape
        if h % 2 or w % 2 or h == 0 or w == 0:
            raise InvariantViolation(f"frame must span whole CFA periods, got {h}x{w}")
        if pix.size and int(pix.max()) > top:
            raise InvariantViolation(f"pixel value {int(pix.max())} exceeds {top}")
        if self.iso < 0:
            raise InvariantViolation("iso must be >= 0")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def meta(self) -> dict:
        return dict(
            cfa=self.cfa,
            bit_depth=self.bit_depth,
            black_level=self.black_level,
            white_level=self.white_level,
            iso=self.iso,
            analog_gain=self.analog_gain,
        )

    def __eq__(self, other):
        if not isinstance(other, RawFrame):
            return NotImplemented
        return self.meta() == other.meta() and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True, eq=False)
class LinearFrame:
    """Real-valued DN raster, usually black-level (and maybe shading) removed."""

    values: np.ndarray
    cfa: CFA = CFA.RGGB
    bit_depth: int = 14
    black_level: int = 0
    white_level: int = 16383
    iso: int = 0
    analog_gain: float = 0.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True)
        if vals.ndim != 2:
            raise InvariantViolation(f"values must be 2-D, got shape {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "cfa", CFA.parse(self.cfa))
        object.__setattr__(self, "analog_gain", _f32(self.analog_gain))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def meta(self) -> dict:
        return dict(
            cfa=self.cfa,
            bit_depth=self.bit_depth,
            black_level=self.black_level,
            white_level=self.white_level,
            iso=self.iso,
            analog_gain=self.analog_gain,
        )

    def with_values(self, values: np.ndarray) -> "LinearFrame":
        return replace(self, values=values)


@dataclass(frozen=True)
class SensorProfile:
    name: str = "generic"
    base_iso: int = 100
    qe_lo: float = 0.30
    qe_hi: float = 0.70
    qe_hypothesis: float = 0.50
    bit_depth: int = 14
    black_level: int = 512
    white_level: int = 16383
    cfa: CFA = field(default=CFA.RGGB)

    def __post_init__(self):
        object.__setattr__(self, "cfa", CFA.parse(self.cfa))
        if not 0 < self.qe_lo <= self.qe_hypothesis <= self.qe_hi < 1:
            raise InvariantViolation(
                f"need 0 < qe_lo <= qe_hypothesis <= qe_hi < 1, got "
                f"{self.qe_lo}, {self.qe_hypothesis}, {self.qe_hi}"
            )
        if self.base_iso <= 0:
            raise InvariantViolation("base_iso must be positive")


def to_linear(frame: RawFrame) -> LinearFrame:
    """Subtract the black level; 0 DN then means zero collected charge."""
    values = frame.pixels.astype(np.float64) - frame.black_level
    return LinearFrame(values, **frame.meta())


def round_half_away(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def quantize(frame: LinearFrame) -> RawFrame:
    """Re-add the black level, round half away from zero and clamp to the ADC range."""
    dn = round_half_away(frame.values + frame.black_level)
    dn = np.clip(np.nan_to_num(dn, nan=0.0), 0, frame.white_level)
    return RawFrame(dn.astype(np.uint16), **frame.meta())


def _axis_window(start: int, length: int, size: int, flip: bool) -> slice:
    if not flip:
        return slice(start, start + length)
    # a reversed window must start on an even index to keep the CFA phase:
    # shift the window by one sample before reversing it
    if start + length + 1 <= size:
        lo = start + 1
    elif start >= 1:
        lo = start - 1
    else:
        raise BadCrop("a flipped crop needs one spare row/column of margin")
    hi = lo + length
    return slice(hi - 1, lo - 1 if lo > 0 else None, -1)


def check_crop(crop, shape) -> tuple[int, int, int, int]:
    y, x, h, w = (int(v) for v in crop)
    H, W = shape
    if h <= 0 or w <= 0:
        raise BadCrop(f"empty crop {crop}")
    if y % 2 or x % 2 or h % 2 or w % 2:
        raise BadCrop(f"crop {crop} is not CFA-aligned (all of y, x, h, w must be even)")
    if y < 0 or x < 0 or y + h > H or x + w > W:
        raise BadCrop(f"crop {crop} exceeds frame {H}x{W}")
    return y, x, h, w


def crop_flip(array: np.ndarray, crop, flips=(False, False)) -> np.ndarray:
    """Crop then flip (vertical, horizontal) without changing the CFA phase.

    A flipped axis reads a window shifted by one sample so the reversed patch
    still starts on an even row/column of the source frame.
    """
    y, x, h, w = check_crop(crop, array.shape)
    vflip, hflip = (bool(f) for f in flips)
    rows = _axis_window(y, h, array.shape[0], vflip)
    cols = _axis_window(x, w, array.shape[1], hflip)
    return np.ascontiguousarray(array[rows, cols])


def crop_linear(frame: LinearFrame, crop, flips=(False, False)) -> LinearFrame:
    return frame.with_values(crop_flip(frame.values, crop, flips))
