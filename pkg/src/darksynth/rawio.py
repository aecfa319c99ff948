"""RAWB container I/O and its variants.

Layout (little-endian)::

    magic    4s   b"RAWB" | b"RAWF" | b"DSHD"
    version  u16  1
    cfa      u8   0=RGGB 1=BGGR 2=GRBG 3=GBRG
    bitdepth u8
    black    u16
    white    u16
    iso      u32
    again    f32
    height   u32
    width    u32
    payload  height*width u16 (RAWB) or f32 (RAWF, DSHD), row-major

DSHD files additionally end with a u32 frame count after the payload.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import BadMagic, InvariantViolation, TruncatedFile
from .frames import CFA, LinearFrame, RawFrame

HEADER = struct.Struct("<4sHBBHHIfII")
VERSION = 1
MAGIC_RAW = b"RAWB"
MAGIC_FLOAT = b"RAWF"
MAGIC_SHADING = b"DSHD"

_SIDECAR_KEYS = ("cfa", "bit_depth", "black_level", "white_level", "iso", "analog_gain", "height", "width")


def _pack_header(magic: bytes, meta: dict, height: int, width: int) -> bytes:
    return HEADER.pack(
        magic,
        VERSION,
        int(CFA.parse(meta["cfa"])),
        int(meta["bit_depth"]),
        int(meta["black_level"]),
        int(meta["white_level"]),
        int(meta["iso"]),
        float(meta["analog_gain"]),
        height,
        width,
    )


def _unpack(data: bytes, path, magic: bytes, itemsize: int, trailer: int = 0):
    if len(data) < 4 or data[:4] != magic:
        raise BadMagic(f"{path}: expected magic {magic!r}, found {bytes(data[:4])!r}")
    if len(data) < HEADER.size:
        raise TruncatedFile(f"{path}: header needs {HEADER.size} bytes, file has {len(data)}")
    _, version, cfa, bit_depth, black, white, iso, again, height, width = HEADER.unpack_from(data)
    if version != VERSION:
        raise InvariantViolation(f"{path}: unsupported container version {version}")
    need = HEADER.size + height * width * itemsize + trailer
    if len(data) < need:
        raise TruncatedFile(f"{path}: expected {need} bytes, file has {len(data)}")
    if len(data) > need:
        raise InvariantViolation(f"{path}: {len(data) - need} unexpected trailing bytes")
    meta = dict(
        cfa=CFA.parse(cfa),
        bit_depth=bit_depth,
        black_level=black,
        white_level=white,
        iso=iso,
        analog_gain=again,
    )
    return meta, height, width


def read_rawb(path) -> RawFrame:
    data = Path(path).read_bytes()
    meta, h, w = _unpack(data, path, MAGIC_RAW, 2)
    pixels = np.frombuffer(data, dtype="<u2", count=h * w, offset=HEADER.size).reshape(h, w)
    return RawFrame(pixels.astype(np.uint16), **meta)


def write_rawb(frame: RawFrame, path) -> None:
    header = _pack_header(MAGIC_RAW, frame.meta(), frame.height, frame.width)
    payload = np.ascontiguousarray(frame.pixels, dtype="<u2").tobytes()
    Path(path).write_bytes(header + payload)


def read_rawf(path) -> LinearFrame:
    data = Path(path).read_bytes()
    meta, h, w = _unpack(data, path, MAGIC_FLOAT, 4)
    values = np.frombuffer(data, dtype="<f4", count=h * w, offset=HEADER.size).reshape(h, w)
    return LinearFrame(values.astype(np.float64), **meta)


def write_rawf(frame: LinearFrame, path) -> None:
    header = _pack_header(MAGIC_FLOAT, frame.meta(), frame.height, frame.width)
    payload = np.ascontiguousarray(frame.values, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_dshd(path):
    """Read a persisted dark shading map; returns a ``DarkShading``."""
    from .dark_bank import DarkShading

    data = Path(path).read_bytes()
    meta, h, w = _unpack(data, path, MAGIC_SHADING, 4, trailer=4)
    values = np.frombuffer(data, dtype="<f4", count=h * w, offset=HEADER.size).reshape(h, w)
    (count,) = struct.unpack_from("<I", data, HEADER.size + h * w * 4)
    return DarkShading(
        mean_map=values.astype(np.float64),
        iso=meta["iso"],
        frame_count=count,
        cfa=meta["cfa"],
        bit_depth=meta["bit_depth"],
        black_level=meta["black_level"],
        white_level=meta["white_level"],
    )


def write_dshd(shading, path) -> None:
    meta = dict(
        cfa=shading.cfa,
        bit_depth=shading.bit_depth,
        black_level=shading.black_level,
        white_level=shading.white_level,
        iso=shading.iso,
        analog_gain=0.0,
    )
    h, w = shading.mean_map.shape
    header = _pack_header(MAGIC_SHADING, meta, h, w)
    payload = np.ascontiguousarray(shading.mean_map, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload + struct.pack("<I", shading.frame_count))


def read_raw_with_sidecar(path) -> RawFrame:
    """Ingest a bare 16-bit little-endian raster plus ``<stem>.json`` header keys."""
    path = Path(path)
    sidecar = path.with_suffix(".json")
    if not sidecar.exists():
        raise InvariantViolation(f"{path}: missing sidecar {sidecar.name}")
    meta = json.loads(sidecar.read_text())
    missing = [k for k in _SIDECAR_KEYS if k not in meta and k not in ("iso", "analog_gain")]
    if missing:
        raise InvariantViolation(f"{sidecar}: missing keys {missing}")
    h, w = int(meta["height"]), int(meta["width"])
    data = path.read_bytes()
    if len(data) < h * w * 2:
        raise TruncatedFile(f"{path}: expected {h * w * 2} bytes, file has {len(data)}")
    pixels = np.frombuffer(data, dtype="<u2", count=h * w).reshape(h, w)
    return RawFrame(
        pixels.astype(np.uint16),
        cfa=CFA.parse(meta["cfa"]),
        bit_depth=meta["bit_depth"],
        black_level=meta["black_level"],
        white_level=meta["white_level"],
        iso=meta.get("iso", 0),
        analog_gain=meta.get("analog_gain", 0.0),
    )


def read_header(path) -> tuple[dict, int, int]:
    """Metadata and geometry of a frame file without reading its payload."""
    path = Path(path)
    if path.suffix.lower() == ".raw":
        meta = json.loads(path.with_suffix(".json").read_text())
        out = dict(
            cfa=CFA.parse(meta["cfa"]),
            bit_depth=int(meta["bit_depth"]),
            black_level=int(meta["black_level"]),
            white_level=int(meta["white_level"]),
            iso=int(meta.get("iso", 0)),
            analog_gain=float(np.float32(meta.get("analog_gain", 0.0))),
        )
        return out, int(meta["height"]), int(meta["width"])
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
    if head[:4] != MAGIC_RAW:
        raise BadMagic(f"{path}: expected magic {MAGIC_RAW!r}, found {head[:4]!r}")
    if len(head) < HEADER.size:
        raise TruncatedFile(f"{path}: header needs {HEADER.size} bytes")
    _, _, cfa, bit_depth, black, white, iso, again, height, width = HEADER.unpack(head)
    meta = dict(cfa=CFA.parse(cfa), bit_depth=bit_depth, black_level=black,
                white_level=white, iso=iso, analog_gain=again)
    return meta, height, width


def read_frame(path) -> RawFrame:
    """Read either a RAWB container or a ``.raw`` + sidecar pair."""
    path = Path(path)
    if path.suffix.lower() == ".raw":
        return read_raw_with_sidecar(path)
    return read_rawb(path)


def is_frame_file(path: Path) -> bool:
    suffix = path.suffix.lower()
    if suffix == ".rawb":
        return True
    return suffix == ".raw" and path.with_suffix(".json").exists()
