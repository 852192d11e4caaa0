"""Minimal PGM/PPM codec.

Netpbm grayscale (P2 ASCII / P5 binary) and color (P3 / P6) files with
maxval 255 are the only supported formats: the headers are trivial, there
are no dependencies, and write-then-read round-trips are bit-identical.
Intensities are normalized to [0, 1] on read and quantized back to the
0-255 range on write (values outside [0, 1] are clipped by quantization).
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .grid_ops import ImageGrid

_WHITESPACE = b" \t\r\n\x0b\x0c"


class PnmError(Exception):
    """Malformed, unsupported, or truncated PGM/PPM content."""


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] != b"\n":
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    if pos >= n:
        raise PnmError("unexpected end of header")
    start = pos
    while pos < n and data[pos:pos + 1] not in _WHITESPACE and data[pos:pos + 1] != b"#":
        pos += 1
    return data[start:pos], pos


def _header_int(data: bytes, pos: int, what: str) -> tuple[int, int]:
    token, pos = _next_token(data, pos)
    try:
        value = int(token)
    except ValueError:
        raise PnmError(f"malformed {what}: {token!r}") from None
    if value <= 0:
        raise PnmError(f"{what} must be positive, got {value}")
    return value, pos


def read_image(path, spacing: float = 0.2):
    """Read a PGM/PPM file into [0, 1] grids.

    Grayscale files yield one ``ImageGrid``; color files yield a tuple of
    three (red, green, blue), all sharing ``spacing``.
    """
    data = Path(path).read_bytes()
    magic, pos = _next_token(data, 0)
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise PnmError(f"unsupported magic number {magic!r}")
    color = magic in (b"P3", b"P6")
    binary = magic in (b"P5", b"P6")
    width, pos = _header_int(data, pos, "width")
    height, pos = _header_int(data, pos, "height")
    maxval, pos = _header_int(data, pos, "maxval")
    if maxval != 255:
        raise PnmError(f"unsupported maxval {maxval} (only 255)")
    count = width * height * (3 if color else 1)

    if binary:
        if pos >= len(data) or data[pos:pos + 1] not in _WHITESPACE:
            raise PnmError("missing whitespace before binary payload")
        pos += 1
        payload = data[pos:pos + count]
        if len(payload) < count:
            raise PnmError(f"truncated payload: expected {count} bytes, "
                           f"got {len(payload)}")
        values = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    else:
        values = np.empty(count)
        for i in range(count):
            token, pos = _next_token(data, pos)
            try:
                v = int(token)
            except ValueError:
                raise PnmError(f"malformed sample {token!r}") from None
            if not 0 <= v <= maxval:
                raise PnmError(f"sample {v} outside [0, {maxval}]")
            values[i] = v

    values /= 255.0
    if color:
        raster = values.reshape(height, width, 3)
        return tuple(ImageGrid(np.ascontiguousarray(raster[:, :, c]), spacing)
                     for c in range(3))
    return ImageGrid(values.reshape(height, width), spacing)


def _quantize(grid: ImageGrid) -> np.ndarray:
    return np.rint(np.clip(grid.data, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_image(path, image) -> None:
    """Write an ``ImageGrid`` as binary PGM, or a 3-tuple as binary PPM."""
    if isinstance(image, ImageGrid):
        raster = _quantize(image)
        magic = b"P5"
        height, width = raster.shape
        payload = raster.tobytes()
    else:
        channels = tuple(image)
        if len(channels) != 3:
            raise PnmError("color images need exactly three channels")
        if any(ch.shape != channels[0].shape for ch in channels):
            raise PnmError("color channels must share dimensions")
        raster = np.stack([_quantize(ch) for ch in channels], axis=-1)
        magic = b"P6"
        height, width = raster.shape[:2]
        payload = raster.tobytes()
    header = b"%s\n%d %d\n255\n" % (magic, width, height)
    Path(path).write_bytes(header + payload)
