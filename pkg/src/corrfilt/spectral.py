"""Exact-size 2-D DFTs, cyclic/linear convolution and kernel bookkeeping.

All grids are numpy arrays whose last two axes are (rows, cols); leading axes
are treated as independent channels. The forward transform is unnormalized and
the inverse carries the 1/(H*W) factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

# relative bound on the imaginary residue tolerated by idft2
IMAG_RESIDUE_TOL = 1e-8


@dataclass(frozen=True)
class Spectrum:
    """Complex 2-D grid stored as separate real and imaginary parts."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        if self.re.shape != self.im.shape:
            raise ValueError(f"re/im shape mismatch: {self.re.shape} vs {self.im.shape}")

    @classmethod
    def from_complex(cls, z: np.ndarray) -> Spectrum:
        z = np.asarray(z)
        return cls(np.ascontiguousarray(z.real, dtype=float), np.ascontiguousarray(z.imag, dtype=float))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.re.shape

    @property
    def height(self) -> int:
        return self.re.shape[-2]

    @property
    def width(self) -> int:
        return self.re.shape[-1]

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    def modulus(self) -> np.ndarray:
        return np.hypot(self.re, self.im)


@dataclass(frozen=True)
class Kernel:
    """Small 2-D tap grid; ``center`` is the (row, col) index of the origin tap."""

    taps: np.ndarray
    center: tuple[int, int]

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=float)
        if taps.ndim != 2 or min(taps.shape) < 1:
            raise ValueError(f"kernel taps must be a non-empty 2-D grid, got shape {taps.shape}")
        if not np.all(np.isfinite(taps)):
            raise ValueError("kernel taps must be finite")
        cy, cx = (int(c) for c in self.center)
        if not (0 <= cy < taps.shape[0] and 0 <= cx < taps.shape[1]):
            raise ValueError(f"center {self.center} outside kernel of shape {taps.shape}")
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "center", (cy, cx))

    @classmethod
    def delta(cls, size: int = 1) -> Kernel:
        """Centered unit impulse on a ``size`` x ``size`` grid."""
        taps = np.zeros((size, size))
        c = size // 2
        taps[c, c] = 1.0
        return cls(taps, (c, c))

    @property
    def shape(self) -> tuple[int, int]:
        return self.taps.shape

    def total(self) -> float:
        return float(self.taps.sum())

    def flip(self) -> Kernel:
        """Point reflection about the center tap: flip(k)[o] = k[-o]."""
        h, w = self.taps.shape
        return Kernel(self.taps[::-1, ::-1].copy(), (h - 1 - self.center[0], w - 1 - self.center[1]))

    def normalized(self) -> Kernel:
        s = self.taps.sum()
        if s == 0:
            raise ValueError("cannot normalize a zero-sum kernel")
        return Kernel(self.taps / s, self.center)

    def offsets(self) -> tuple[np.ndarray, np.ndarray]:
        """Row and column offsets of every tap relative to the center."""
        h, w = self.taps.shape
        return np.arange(h) - self.center[0], np.arange(w) - self.center[1]


def dft2(g: np.ndarray) -> Spectrum:
    """Unnormalized forward DFT over the last two axes."""
    return Spectrum.from_complex(np.fft.fft2(np.asarray(g, dtype=float)))


def idft2(s: Spectrum | np.ndarray) -> np.ndarray:
    """Inverse DFT (with 1/(H*W)) of a Hermitian spectrum, returning the real part.

    Raises ValueError when the discarded imaginary part is not round-off, which
    means the spectrum did not come from a real grid.
    """
    z = s.to_complex() if isinstance(s, Spectrum) else np.asarray(s)
    out = np.fft.ifft2(z)
    scale = np.max(np.abs(out.real), initial=0.0)
    resid = np.max(np.abs(out.imag), initial=0.0)
    if resid > IMAG_RESIDUE_TOL * max(scale, np.finfo(float).tiny):
        raise ValueError(f"non-Hermitian spectrum: imaginary residue {resid:.3e} vs real scale {scale:.3e}")
    return out.real


def center_shift(k: Kernel, height: int, width: int, fold: bool = False) -> np.ndarray:
    """Embed ``k`` in an H x W grid with its center tap at index (0, 0).

    Negative offsets wrap circularly. With ``fold=True`` a kernel larger than
    the grid is wrapped onto it (taps landing on the same site are summed),
    which is the periodized kernel that cyclic convolution actually applies.
    """
    kh, kw = k.shape
    if not fold and (kh > height or kw > width):
        raise ValueError(f"kernel of shape {k.shape} does not fit a {height}x{width} grid")
    rows, cols = k.offsets()
    grid = np.zeros((height, width))
    np.add.at(grid, np.ix_(rows % height, cols % width), k.taps)
    return grid


def cyclic_convolve(g: np.ndarray, k: Kernel, fold: bool = False) -> np.ndarray:
    """Circular convolution of the last two axes of ``g`` with ``k``.

    out[i] = sum_o k[o] * g[i - o], with o the tap offset from the kernel center,
    so a centered delta leaves ``g`` untouched.
    """
    g = np.asarray(g, dtype=float)
    h, w = g.shape[-2:]
    kf = np.fft.fft2(center_shift(k, h, w, fold=fold))
    return np.fft.ifft2(np.fft.fft2(g) * kf).real


def linear_convolve(a: Kernel, b: Kernel) -> Kernel:
    """Full linear convolution; the output center is the sum of input centers."""
    taps = signal.convolve2d(a.taps, b.taps, mode="full")
    return Kernel(taps, (a.center[0] + b.center[0], a.center[1] + b.center[1]))


def subsample_kernel(k: Kernel, alpha: int) -> Kernel:
    """Keep only taps whose offset from the center is a multiple of ``alpha``."""
    rows, cols = k.offsets()
    keep_r = np.flatnonzero(rows % alpha == 0)
    keep_c = np.flatnonzero(cols % alpha == 0)
    taps = k.taps[np.ix_(keep_r, keep_c)]
    return Kernel(taps, (int(np.flatnonzero(rows[keep_r] == 0)[0]), int(np.flatnonzero(cols[keep_c] == 0)[0])))


def subsample_indices(k: Kernel, alpha: int) -> tuple[np.ndarray, np.ndarray, tuple[int, int]]:
    """Index arrays and new center used by :func:`subsample_kernel` (for gather/scatter)."""
    rows, cols = k.offsets()
    keep_r = np.flatnonzero(rows % alpha == 0)
    keep_c = np.flatnonzero(cols % alpha == 0)
    center = (int(np.flatnonzero(rows[keep_r] == 0)[0]), int(np.flatnonzero(cols[keep_c] == 0)[0]))
    return keep_r, keep_c, center


def embed_kernel(k: Kernel, shape: tuple[int, int], center: tuple[int, int]) -> Kernel:
    """Zero-pad ``k`` into a larger grid so that its center lands on ``center``."""
    h, w = shape
    top = center[0] - k.center[0]
    left = center[1] - k.center[1]
    kh, kw = k.shape
    if top < 0 or left < 0 or top + kh > h or left + kw > w:
        raise ValueError(f"kernel of shape {k.shape} cannot be embedded in {shape} at {center}")
    taps = np.zeros(shape)
    taps[top : top + kh, left : left + kw] = k.taps
    return Kernel(taps, center)


def crop_kernel(taps_grid: np.ndarray, size: int) -> Kernel:
    """Center-crop a filter laid out with its origin at (0, 0) into ``size`` x ``size`` taps."""
    h, w = taps_grid.shape
    sh, sw = min(size, h), min(size, w)
    rows = np.arange(-(sh // 2), sh - sh // 2) % h
    cols = np.arange(-(sw // 2), sw - sw // 2) % w
    return Kernel(taps_grid[np.ix_(rows, cols)], (sh // 2, sw // 2))
