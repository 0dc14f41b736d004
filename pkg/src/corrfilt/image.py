"""Image container, binary PNM I/O and PSNR/SSIM metrics."""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass

import numpy as np
from scipy import signal

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class ImageFormatError(ValueError):
    """Malformed or unsupported PNM content."""

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path


class UnsupportedFormatError(ImageFormatError):
    pass


@dataclass
class Image:
    """Planar image, ``data`` shaped (channels, height, width), values nominally in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 2:
            data = data[None]
        if data.ndim != 3 or data.shape[1] < 1 or data.shape[2] < 1:
            raise ValueError(f"expected (C, H, W) data, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("image values must be finite")
        self.data = data

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    @property
    def channels(self) -> list[np.ndarray]:
        return list(self.data)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    border_shaved: int


def as_planes(img) -> np.ndarray:
    """Return a (C, H, W) float array from an Image or a 2-D/3-D array."""
    a = np.asarray(img, dtype=float)
    if a.ndim == 2:
        return a[None]
    if a.ndim != 3:
        raise ValueError(f"expected a 2-D or (C, H, W) array, got shape {a.shape}")
    return a


_HEADER_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def load_image(path) -> Image:
    """Read a binary PGM (P5) or PPM (P6) file, scaling samples to [0, 1]."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"{path}: no such file")
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] not in (b"P5", b"P6"):
        raise UnsupportedFormatError(path, f"unsupported magic number {raw[:2]!r}")
    channels = 1 if raw[:2] == b"P5" else 3
    pos = 2
    fields = []
    for _ in range(3):
        m = _HEADER_TOKEN.match(raw, pos)
        if m is None or not m.group(1).isdigit():
            raise ImageFormatError(path, "malformed header")
        fields.append(int(m.group(1)))
        pos = m.end()
    width, height, maxval = fields
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ImageFormatError(path, f"invalid header values {fields}")
    if pos >= len(raw) or not raw[pos : pos + 1].isspace():
        raise ImageFormatError(path, "missing whitespace after header")
    pos += 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    body = raw[pos : pos + count * dtype.itemsize]
    if len(body) != count * dtype.itemsize:
        raise ImageFormatError(path, f"truncated pixel data ({len(body)} of {count * dtype.itemsize} bytes)")
    samples = np.frombuffer(body, dtype=dtype).astype(float) / maxval
    data = samples.reshape(height, width, channels).transpose(2, 0, 1)
    return Image(data)


def save_image(img, path) -> None:
    """Write 1- or 3-channel data as 8-bit P5/P6 after clamping to [0, 1]."""
    data = as_planes(img)
    if data.shape[0] not in (1, 3):
        raise ValueError(f"can only save 1 or 3 channels, got {data.shape[0]}")
    q = np.round(np.clip(data, 0.0, 1.0) * 255).astype(np.uint8)
    magic = b"P5" if data.shape[0] == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, data.shape[2], data.shape[1])
    path = os.fspath(path)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(q.transpose(1, 2, 0)).tobytes())


def to_luma(img) -> np.ndarray:
    """BT.601 luma as a (1, H, W) array; single-channel input passes through."""
    data = as_planes(img)
    if data.shape[0] == 1:
        return data
    if data.shape[0] != 3:
        raise ValueError(f"to_luma needs 1 or 3 channels, got {data.shape[0]}")
    return np.tensordot(LUMA_WEIGHTS, data, axes=1)[None]


def _prepare(a, b, border):
    a, b = to_luma(a)[0], to_luma(b)[0]
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if border:
        if 2 * border >= min(a.shape):
            raise ValueError(f"border {border} too large for image of shape {a.shape}")
        a = a[border:-border, border:-border]
        b = b[border:-border, border:-border]
    return a, b


def psnr(a, b, border: int = 0) -> float:
    """PSNR in dB on luma for unit dynamic range; identical images give ``inf``."""
    a, b = _prepare(a, b, border)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    t = np.arange(size) - (size - 1) / 2
    g = np.exp(-(t**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a, b, border: int = 0, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean SSIM on luma with an 11x11 Gaussian window (sigma 1.5), valid positions only."""
    a, b = _prepare(a, b, border)
    if min(a.shape) < 11:
        raise ValueError(f"image of shape {a.shape} is smaller than the 11x11 SSIM window")
    win = gaussian_window()
    c1, c2 = k1**2, k2**2

    def filt(z):
        return signal.correlate2d(z, win, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def evaluate(a, b, border: int = 0) -> MetricReport:
    return MetricReport(psnr(a, b, border), ssim(a, b, border), border)
