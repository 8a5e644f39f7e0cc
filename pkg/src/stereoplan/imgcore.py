"""Raster helpers shared by the vision stages.

Rasters are plain numpy arrays: ``(H, W)`` uint8 for gray images,
``(H, W, 3)`` uint8 for RGB, and float64 for intermediate real-valued
results (gradients, blurred images, costs).
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import StereoPlanError


class PnmError(StereoPlanError):
    """Base class for PNM parse/write failures."""


class MalformedHeader(PnmError):
    pass


class UnsupportedMaxval(PnmError):
    pass


class TruncatedData(PnmError):
    pass


class IoFailure(PnmError, OSError):
    pass


class KernelTooLarge(StereoPlanError):
    pass


_WS = b" \t\r\n"


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comments
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c in (b" ", b"\t", b"\r", b"\n"):
            pos += 1
        elif c == b"#":
            while pos < n and buf[pos:pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and buf[pos:pos + 1] not in (b" ", b"\t", b"\r", b"\n", b"#"):
        pos += 1
    if start == pos:
        raise MalformedHeader("unexpected end of header")
    return buf[start:pos], pos


def parse_pnm(buf: bytes) -> np.ndarray:
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise MalformedHeader(f"unsupported magic {magic!r}")
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _read_token(buf, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise MalformedHeader(f"non-integer header field {tok!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MalformedHeader(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} (only 255 supported)")
    if pos >= len(buf) or buf[pos:pos + 1] not in (b" ", b"\t", b"\r", b"\n"):
        raise MalformedHeader("missing whitespace after maxval")
    pos += 1
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    raw = buf[pos:pos + need]
    if len(raw) < need:
        raise TruncatedData(f"expected {need} bytes, got {len(raw)}")
    data = np.frombuffer(raw, dtype=np.uint8)
    if channels == 1:
        return data.reshape(height, width).copy()
    return data.reshape(height, width, 3).copy()


def load_pnm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary P5/P6 file with maxval 255."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return parse_pnm(buf)


def encode_pnm(image: np.ndarray) -> bytes:
    image = np.asarray(image)
    if image.dtype != np.uint8:
        image = quantize(image)
    if image.ndim == 2:
        magic = b"P5"
    elif image.ndim == 3 and image.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot encode array of shape {image.shape}")
    h, w = image.shape[:2]
    return magic + b"\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(image).tobytes()


def save_pnm(image: np.ndarray, path: str | os.PathLike) -> None:
    data = encode_pnm(image)
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def quantize(raster: np.ndarray) -> np.ndarray:
    """Round and clamp a real raster into uint8."""
    return np.clip(np.rint(raster), 0, 255).astype(np.uint8)


def to_gray(image: np.ndarray) -> np.ndarray:
    rgb = np.asarray(image, dtype=np.float64)
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return quantize(luma)


def make_kernel(weights) -> np.ndarray:
    k = np.asarray(weights, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] % 2 == 0:
        raise ValueError("kernel must be square with odd size")
    return k


def convolve(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Replicate-border correlation of ``image`` with a square odd kernel.

    ``out[y, x] = sum_ji k[j, i] * img[clamp(y + j - c), clamp(x + i - c)]``
    """
    k = make_kernel(kernel)
    img = np.asarray(image, dtype=np.float64)
    size = k.shape[0]
    if size > min(img.shape):
        raise KernelTooLarge(f"kernel {size} exceeds image {img.shape[1]}x{img.shape[0]}")
    c = size // 2
    padded = np.pad(img, c, mode="edge")
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.float64)
    for j in range(size):
        for i in range(size):
            if k[j, i] != 0.0:
                out += k[j, i] * padded[j:j + h, i:i + w]
    return out


def convolve_separable(image: np.ndarray, row: np.ndarray, col: np.ndarray) -> np.ndarray:
    """Replicate-border separable filter: ``col`` along y, then ``row`` along x."""
    img = np.asarray(image, dtype=np.float64)
    row = np.asarray(row, dtype=np.float64)
    col = np.asarray(col, dtype=np.float64)
    h, w = img.shape
    cy, cx = len(col) // 2, len(row) // 2
    padded = np.pad(img, ((cy, cy), (0, 0)), mode="edge")
    tmp = np.zeros((h, w))
    for j, wt in enumerate(col):
        tmp += wt * padded[j:j + h]
    padded = np.pad(tmp, ((0, 0), (cx, cx)), mode="edge")
    out = np.zeros((h, w))
    for i, wt in enumerate(row):
        out += wt * padded[:, i:i + w]
    return out
