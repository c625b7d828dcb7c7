"""Image file I/O: PNG, binary PGM/PPM, and the RAWF float format.

8-bit formats are scaled to [0, 1] on read and clamped + rescaled on
write.  RAWF is a little-endian planar float32 dump with a 16-byte
header: magic "RAWF", u32 height, u32 width, u32 channels.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidInputError
from .grid import ColorSpace, ImageGrid

RAWF_MAGIC = b"RAWF"


def _from_uint8(arr: np.ndarray, space: ColorSpace, dtype) -> ImageGrid:
    data = (arr.astype(np.float64) / 255.0).astype(dtype)
    return ImageGrid(data, space)


def read_image(path, dtype=np.float32) -> ImageGrid:
    """Read PNG/PGM/PPM/RAWF by extension; 8-bit data lands in [0, 1]."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".rawf":
        return read_rawf(path, dtype)
    if suffix in (".pgm", ".ppm"):
        return _read_pnm(path, dtype)
    if suffix == ".png":
        with Image.open(path) as im:
            if im.mode == "L":
                arr = np.asarray(im)[None, :, :]
                return _from_uint8(arr, ColorSpace.GRAY, dtype)
            arr = np.asarray(im.convert("RGB")).transpose(2, 0, 1)
            return _from_uint8(arr, ColorSpace.RGB, dtype)
    raise InvalidInputError(f"unsupported image format: {path.name}")


def write_image(path, img: ImageGrid) -> None:
    """Write PNG/PGM/PPM (clamped 8-bit) or RAWF (exact floats)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".rawf":
        write_rawf(path, img)
        return
    quant = np.clip(img.data, 0.0, 1.0)
    quant = np.round(quant * 255.0).astype(np.uint8)
    if suffix == ".pgm":
        if img.channels != 1:
            raise InvalidInputError("PGM holds a single channel")
        _write_pnm(path, quant)
    elif suffix == ".ppm":
        if img.channels != 3:
            raise InvalidInputError("PPM holds three channels")
        _write_pnm(path, quant)
    elif suffix == ".png":
        if img.channels == 1:
            Image.fromarray(quant[0], mode="L").save(path)
        elif img.channels == 3:
            Image.fromarray(quant.transpose(1, 2, 0), mode="RGB").save(path)
        else:
            raise InvalidInputError("PNG export expects 1 or 3 channels")
    else:
        raise InvalidInputError(f"unsupported image format: {path.name}")


def _read_pnm(path: Path, dtype) -> ImageGrid:
    raw = path.read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    pos += 1  # single whitespace after maxval
    if maxval != 255:
        raise InvalidInputError("only 8-bit PNM supported")
    if magic == b"P5":
        arr = np.frombuffer(raw, np.uint8, h * w, pos).reshape(1, h, w)
        return _from_uint8(arr, ColorSpace.GRAY, dtype)
    if magic == b"P6":
        arr = np.frombuffer(raw, np.uint8, h * w * 3, pos).reshape(h, w, 3)
        return _from_uint8(arr.transpose(2, 0, 1), ColorSpace.RGB, dtype)
    raise InvalidInputError(f"unsupported PNM magic {magic!r}")


def _write_pnm(path: Path, quant: np.ndarray) -> None:
    c, h, w = quant.shape
    magic = b"P5" if c == 1 else b"P6"
    payload = quant[0] if c == 1 else quant.transpose(1, 2, 0)
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(payload.tobytes())


def read_rawf(path, dtype=np.float32) -> ImageGrid:
    raw = Path(path).read_bytes()
    if raw[:4] != RAWF_MAGIC:
        raise InvalidInputError("bad RAWF magic")
    h, w, c = struct.unpack("<III", raw[4:16])
    data = np.frombuffer(raw, "<f4", c * h * w, 16).reshape(c, h, w)
    space = ColorSpace.GRAY if c == 1 else ColorSpace.RGB
    return ImageGrid(data.astype(dtype), space)


def write_rawf(path, img: ImageGrid) -> None:
    with open(path, "wb") as fh:
        fh.write(RAWF_MAGIC)
        fh.write(struct.pack("<III", img.height, img.width, img.channels))
        fh.write(np.ascontiguousarray(img.data, "<f4").tobytes())


def write_rawf_array(path, arr: np.ndarray) -> None:
    """RAWF dump of a bare (channels, h, w) or (h, w) float array."""
    if arr.ndim == 2:
        arr = arr[None]
    with open(path, "wb") as fh:
        fh.write(RAWF_MAGIC)
        fh.write(struct.pack("<III", arr.shape[1], arr.shape[2], arr.shape[0]))
        fh.write(np.ascontiguousarray(arr, "<f4").tobytes())
