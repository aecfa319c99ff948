"""Dark-frame banks: grouping by gain, dark shading, and shading-corrected sampling."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    EmptyBank,
    EmptySubset,
    GeometryMismatch,
    InvariantViolation,
    MixedGeometry,
    NTooLarge,
    UnknownGain,
)
from .frames import CFA, LinearFrame, RawFrame, SensorProfile, check_crop, crop_flip
from .rawio import is_frame_file, read_frame, read_header
from .rng import Rng

logger = logging.getLogger(__name__)


def group_key(iso, tag: str | None = None) -> str:
    """Bank key for an ISO, e.g. ``"6400"`` or ``"6400:hot"`` for a tagged subset."""
    if isinstance(iso, str):
        if tag is not None and ":" not in iso:
            return f"{iso}:{tag}"
        return iso
    return f"{int(iso)}:{tag}" if tag else str(int(iso))


def key_iso(key: str) -> int:
    return int(str(key).split(":", 1)[0])


@lru_cache(maxsize=64)
def _load_cached(path: str, mtime_ns: int, size: int) -> RawFrame:
    return read_frame(path)


def _load(path) -> RawFrame:
    st = Path(path).stat()
    return _load_cached(str(path), st.st_mtime_ns, st.st_size)


@dataclass(frozen=True, eq=False)
class DarkShading:
    """Per-pixel mean of black-level-removed dark frames at one gain."""

    mean_map: np.ndarray
    iso: int
    frame_count: int
    cfa: CFA = CFA.RGGB
    bit_depth: int = 14
    black_level: int = 0
    white_level: int = 16383
    key: str = ""

    def __post_init__(self):
        m = np.array(self.mean_map, dtype=np.float64, copy=True)
        m.setflags(write=False)
        object.__setattr__(self, "mean_map", m)
        object.__setattr__(self, "cfa", CFA.parse(self.cfa))
        if not self.key:
            object.__setattr__(self, "key", str(int(self.iso)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.mean_map.shape

    def cropped(self, crop, flips=(False, False)) -> "DarkShading":
        """The map under the same crop/flip a synthesized patch received."""
        return replace(self, mean_map=crop_flip(self.mean_map, crop, flips))

    @classmethod
    def zeros(cls, shape, iso: int = 0, **meta) -> "DarkShading":
        return cls(np.zeros(shape), iso=iso, frame_count=0, **meta)


@dataclass(frozen=True, eq=False)
class DarkBank:
    """Dark frames grouped by gain key; list order is the sampling index order.

    Group members are either in-memory :class:`RawFrame` objects or paths that
    are read on first access.
    """

    groups: dict
    profile: SensorProfile = field(default_factory=SensorProfile)
    names: dict = field(default_factory=dict)

    def __post_init__(self):
        for key, members in self.groups.items():
            if not members:
                raise EmptyBank(f"group {key} has no frames")

    @classmethod
    def from_frames(cls, frames: Sequence[RawFrame], profile: SensorProfile | None = None, tag=None) -> "DarkBank":
        groups: dict[str, list] = {}
        for frame in frames:
            groups.setdefault(group_key(frame.iso, tag), []).append(frame)
        if not groups:
            raise EmptyBank("no dark frames given")
        for key, members in groups.items():
            _check_group(key, [(f.meta(), f.shape) for f in members])
        names = {k: [f"{k}_{i:05d}" for i in range(len(v))] for k, v in groups.items()}
        return cls(groups, profile or SensorProfile(), names)

    def keys(self) -> list[str]:
        return sorted(self.groups, key=lambda k: (key_iso(k), k))

    def _members(self, iso) -> list:
        key = group_key(iso)
        try:
            return self.groups[key]
        except KeyError:
            raise UnknownGain(f"no dark frames for gain key {key!r}; have {self.keys()}") from None

    def size(self, iso) -> int:
        return len(self._members(iso))

    def frame(self, iso, index: int) -> RawFrame:
        member = self._members(iso)[index]
        if isinstance(member, RawFrame):
            return member
        return _load(member)

    def frames(self, iso) -> list[RawFrame]:
        return [self.frame(iso, i) for i in range(self.size(iso))]

    def frame_names(self, iso) -> list[str]:
        key = group_key(iso)
        self._members(key)
        return list(self.names.get(key, []))

    def geometry(self, iso) -> tuple[int, int]:
        member = self._members(iso)[0]
        if isinstance(member, RawFrame):
            return member.shape
        _, h, w = read_header(member)
        return h, w

    def meta(self, iso) -> dict:
        member = self._members(iso)[0]
        if isinstance(member, RawFrame):
            return member.meta()
        meta, _, _ = read_header(member)
        return meta


def _check_group(key, headers) -> None:
    meta0, shape0 = headers[0]
    for meta, shape in headers[1:]:
        if shape != shape0:
            raise MixedGeometry(f"group {key}: frame sizes {shape0} and {shape} differ")
        for name in ("cfa", "bit_depth", "iso", "black_level"):
            if meta[name] != meta0[name]:
                raise MixedGeometry(f"group {key}: {name} differs ({meta0[name]} vs {meta[name]})")


def load_bank(directory, profile: SensorProfile | None = None) -> DarkBank:
    """Index the dark frames below ``directory`` by ISO.

    Files directly in ``directory`` are keyed by their ISO; files inside a
    sub-directory ``hot/`` are keyed ``"<iso>:hot"``. Within a group, frames
    are ordered by file name.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise EmptyBank(f"{directory} is not a directory")
    profile = profile or SensorProfile()
    found: dict[str, list[tuple[str, Path, dict, tuple]]] = {}
    candidates = [(None, p) for p in directory.iterdir() if p.is_file()]
    for sub in sorted(p for p in directory.iterdir() if p.is_dir()):
        candidates += [(sub.name, p) for p in sub.iterdir() if p.is_file()]
    for tag, path in candidates:
        if not is_frame_file(path):
            continue
        meta, h, w = read_header(path)
        key = group_key(meta["iso"], tag)
        found.setdefault(key, []).append((path.name, path, meta, (h, w)))
    if not found:
        raise EmptyBank(f"no RAWB frames found in {directory}")

    groups, names = {}, {}
    for key, entries in found.items():
        entries.sort(key=lambda e: e[0])
        _check_group(key, [(e[2], e[3]) for e in entries])
        groups[key] = [e[1] for e in entries]
        names[key] = [e[0] for e in entries]
        logger.info("dark group %s: %d frames", key, len(entries))
    return DarkBank(groups, profile, names)


def calibrate_shading(bank: DarkBank, iso, subset: Sequence[int] | None = None) -> DarkShading:
    """Average black-level-removed frames of one group into a dark shading map.

    Frames are accumulated in ascending index order with Kahan compensation,
    so the same set of frames always yields a bit-identical map.
    """
    size = bank.size(iso)
    if subset is None:
        indices = list(range(size))
    else:
        indices = sorted(int(i) for i in subset)
        if not indices:
            raise EmptySubset("subset selects no frames")
        if indices[0] < 0 or indices[-1] >= size:
            raise InvariantViolation(f"subset indices must lie in [0, {size})")

    first = bank.frame(iso, indices[0])
    total = np.zeros(first.shape, dtype=np.float64)
    comp = np.zeros_like(total)
    for i in indices:
        frame = bank.frame(iso, i)
        y = (frame.pixels.astype(np.float64) - frame.black_level) - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return DarkShading(
        mean_map=total / len(indices),
        iso=first.iso,
        frame_count=len(indices),
        cfa=first.cfa,
        bit_depth=first.bit_depth,
        black_level=first.black_level,
        white_level=first.white_level,
        key=group_key(iso),
    )


def recalibrate_online(bank: DarkBank, iso, n: int, rng: Rng) -> DarkShading:
    """Dark shading from ``n`` frames drawn without replacement."""
    size = bank.size(iso)
    if n < 1:
        raise EmptySubset(f"n must be >= 1, got {n}")
    if n > size:
        raise NTooLarge(f"n={n} exceeds the {size} frames of group {group_key(iso)}")
    subset = rng.choice(size, size=n, replace=False)
    return calibrate_shading(bank, iso, subset)


def corrected(frame: RawFrame, shading: DarkShading) -> np.ndarray:
    if frame.shape != shading.shape:
        raise GeometryMismatch(f"frame {frame.shape} vs shading {shading.shape}")
    return (frame.pixels.astype(np.float64) - frame.black_level) - shading.mean_map


def sample_dark(
    bank: DarkBank,
    iso,
    shading: DarkShading,
    crop,
    flips=(False, False),
    rng: Rng | None = None,
    frame_index: int | None = None,
) -> LinearFrame:
    """Shading-corrected dark patch from one frame of the group.

    The frame is ``frame_index`` when given, otherwise drawn uniformly with
    ``rng``. Cropping and flipping go through :func:`crop_flip`, so the patch
    keeps the sensor's CFA phase.
    """
    size = bank.size(iso)
    if frame_index is None:
        if rng is None:
            raise ValueError("either rng or frame_index is required")
        frame_index = int(rng.integers(0, size))
    frame = bank.frame(iso, frame_index)
    if frame.shape != shading.shape:
        raise GeometryMismatch(f"frame {frame.shape} vs shading {shading.shape}")
    check_crop(crop, frame.shape)
    pix = crop_flip(frame.pixels, crop, flips).astype(np.float64)
    shade = crop_flip(shading.mean_map, crop, flips)
    return LinearFrame((pix - frame.black_level) - shade, **frame.meta())
