"""Downscaling kernel generators and the plain-text KERN file format.

KERN layout::

    KERN 1
    H W cy cx
    <H rows of W floats>

Lines starting with ``#`` after the tap rows are metadata (e.g. the grid a
correction filter was built on) and are returned separately by read_kernel.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .spectral import Kernel


def cubic(t, a: float = -0.5):
    """Keys cubic convolution profile, zero outside |t| < 2."""
    t = np.abs(np.asarray(t, dtype=float))
    t2, t3 = t * t, t * t * t
    near = (a + 2) * t3 - (a + 3) * t2 + 1
    far = a * t3 - 5 * a * t2 + 8 * a * t - 4 * a
    return np.where(t <= 1, near, np.where(t < 2, far, 0.0))


def bicubic_profile(alpha: int, a: float = -0.5) -> np.ndarray:
    """Unit-sum 1-D antialiasing bicubic taps for downscaling by ``alpha``.

    4*alpha taps, tap i sits at t = (i - 2*alpha) / alpha; the first tap is the
    (zero) end of the support.
    """
    if alpha < 1:
        raise ValueError("scale must be >= 1")
    t = (np.arange(4 * alpha) - 2 * alpha) / alpha
    w = cubic(t, a)
    return w / w.sum()


def bicubic_kernel(alpha: int, a: float = -0.5) -> Kernel:
    p = bicubic_profile(alpha, a)
    c = 2 * alpha
    return Kernel(np.outer(p, p), (c, c))


def gaussian_kernel(sigma: float, size: int | None = None) -> Kernel:
    """Isotropic Gaussian sampled at integer offsets, normalized to unit sum."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if size is None:
        size = 2 * math.ceil(4 * sigma) + 1
    if size < 1 or size % 2 == 0:
        raise ValueError(f"gaussian kernel size must be odd, got {size}")
    t = np.arange(size) - size // 2
    g = np.exp(-(t**2) / (2 * sigma**2))
    taps = np.outer(g, g)
    return Kernel(taps / taps.sum(), (size // 2, size // 2))


def box_kernel(width: int) -> Kernel:
    if width < 1:
        raise ValueError("box width must be >= 1")
    return Kernel(np.full((width, width), 1.0 / width**2), (width // 2, width // 2))


def write_kernel(k: Kernel, path, meta: dict | None = None) -> None:
    h, w = k.shape
    lines = ["KERN 1", f"{h} {w} {k.center[0]} {k.center[1]}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in k.taps]
    for key, value in (meta or {}).items():
        lines.append(f"# {key} {value}")
    with open(os.fspath(path), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_kernel(path) -> tuple[Kernel, dict[str, str]]:
    """Parse a KERN file; returns the kernel and any ``# key value`` metadata."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"{path}: no such file")
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    meta = {}
    body = []
    for ln in lines:
        if ln.startswith("#"):
            key, _, value = ln[1:].strip().partition(" ")
            meta[key] = value.strip()
        else:
            body.append(ln)
    try:
        if body[0].split() != ["KERN", "1"]:
            raise ValueError(f"bad magic line {body[0]!r}")
        h, w, cy, cx = (int(v) for v in body[1].split())
        rows = [[float(v) for v in ln.split()] for ln in body[2 : 2 + h]]
        if len(rows) != h or any(len(r) != w for r in rows) or len(body) != 2 + h:
            raise ValueError(f"expected {h} rows of {w} values")
        return Kernel(np.array(rows), (cy, cx)), meta
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{path}: malformed kernel file ({exc})") from exc
