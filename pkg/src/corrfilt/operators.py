"""Downsampling S*, upsampling R (its adjoint) and the R (R*R)^-1 reconstructor.

Everything is cyclic on the HR grid. Arrays may carry leading channel axes;
only the last two axes are sampled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .kernels import bicubic_kernel
from .spectral import Kernel, center_shift, linear_convolve, subsample_kernel

# |G| below this (with eps == 0) makes (R*R)^-1 meaningless
MIN_MODULUS = 1e-12


@dataclass(frozen=True)
class SamplingConfig:
    kernel: Kernel
    scale: int
    phase: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.scale < 1:
            raise ValueError(f"scale must be >= 1, got {self.scale}")
        if not all(0 <= p < self.scale for p in self.phase):
            raise ValueError(f"phase {self.phase} outside [0, {self.scale})")


def _spectral_conv(x: np.ndarray, k: Kernel) -> np.ndarray:
    h, w = x.shape[-2:]
    kf = np.fft.fft2(center_shift(k, h, w, fold=True))
    return np.fft.ifft2(np.fft.fft2(x) * kf).real


def reflect_pad(x: np.ndarray, alpha: int) -> np.ndarray:
    """Reflect-pad the bottom/right edges up to the next multiple of ``alpha``."""
    h, w = x.shape[-2:]
    ph, pw = -h % alpha, -w % alpha
    if ph == 0 and pw == 0:
        return x
    pad = [(0, 0)] * (x.ndim - 2) + [(0, ph), (0, pw)]
    return np.pad(x, pad, mode="symmetric")


def downsample(x, cfg: SamplingConfig, pad: bool = False) -> np.ndarray:
    """y = (x conv k) sampled at rows/cols phase, phase + alpha, ..."""
    x = np.asarray(x, dtype=float)
    a = cfg.scale
    if x.shape[-2] % a or x.shape[-1] % a:
        if not pad:
            raise ValueError(f"HR shape {x.shape[-2:]} not divisible by scale {a}; pass pad=True")
        x = reflect_pad(x, a)
    blurred = _spectral_conv(x, cfg.kernel)
    return blurred[..., cfg.phase[0] :: a, cfg.phase[1] :: a].copy()


def zero_insert(y: np.ndarray, alpha: int, phase: tuple[int, int] = (0, 0)) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    h, w = y.shape[-2:]
    up = np.zeros(y.shape[:-2] + (h * alpha, w * alpha))
    up[..., phase[0] :: alpha, phase[1] :: alpha] = y
    return up


def upsample(y, cfg: SamplingConfig, crop_to: tuple[int, int] | None = None) -> np.ndarray:
    """Adjoint of :func:`downsample`: zero insertion then convolution with flip(k)."""
    up = zero_insert(y, cfg.scale, cfg.phase)
    out = _spectral_conv(up, cfg.kernel.flip())
    if crop_to is not None:
        out = out[..., : crop_to[0], : crop_to[1]]
    return out


def autocorrelation_spectrum(k: Kernel, target: Kernel, alpha: int, shape: tuple[int, int]) -> np.ndarray:
    """DFT on the LR grid of (k conv flip(target)) subsampled by ``alpha``.

    This is the transfer function of S*R when S* uses ``k`` and R uses ``target``.
    """
    c = subsample_kernel(linear_convolve(k, target.flip()), alpha)
    return np.fft.fft2(center_shift(c, *shape, fold=True))


def regularized_inverse(g: np.ndarray, eps: float, what: str = "denominator") -> np.ndarray:
    """Spectral multiplier conj(g) / (|g|^2 + eps); plain 1/g when eps == 0."""
    mod = np.abs(g)
    if eps == 0:
        if mod.min() < MIN_MODULUS:
            idx = np.unravel_index(np.argmin(mod), mod.shape)
            raise NumericalError(f"{what} modulus {mod.min():.3e} at frequency {idx} is too small to invert")
        return 1.0 / g
    den = mod**2 + eps
    if den.min() <= np.finfo(float).tiny:
        raise NumericalError(f"{what} underflow: minimum modulus {mod.min():.3e}")
    return np.conj(g) / den


@dataclass
class PseudoInverse:
    """The linear map R (R*R)^-1 from an LR grid to the HR grid.

    Callable on arrays (..., H, W); ``adjoint`` maps HR arrays back.
    """

    shape: tuple[int, int]
    scale: int
    eps: float = 0.0
    target: Kernel | None = None
    phase: tuple[int, int] = (0, 0)
    multiplier: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.target is None:
            self.target = bicubic_kernel(self.scale)
        self.shape = tuple(self.shape)
        g = autocorrelation_spectrum(self.target, self.target, self.scale, self.shape)
        self.multiplier = regularized_inverse(g, self.eps, "R*R")
        hr = (self.shape[0] * self.scale, self.shape[1] * self.scale)
        # transfer function of convolution with flip(target) on the HR grid
        self._up = np.fft.fft2(center_shift(self.target.flip(), *hr, fold=True))

    def __call__(self, y: np.ndarray) -> np.ndarray:
        z = np.fft.ifft2(np.fft.fft2(y) * self.multiplier).real
        up = zero_insert(z, self.scale, self.phase)
        return np.fft.ifft2(np.fft.fft2(up) * self._up).real

    def adjoint(self, g: np.ndarray) -> np.ndarray:
        blurred = np.fft.ifft2(np.fft.fft2(g) * np.conj(self._up)).real
        z = blurred[..., self.phase[0] :: self.scale, self.phase[1] :: self.scale]
        return np.fft.ifft2(np.fft.fft2(z) * np.conj(self.multiplier)).real


def pseudo_inverse_reconstruct(y, alpha: int, eps: float = 0.0, target: Kernel | None = None) -> np.ndarray:
    """Built-in linear super-resolver R (R*R)^-1 with the bicubic target kernel."""
    y = np.asarray(y, dtype=float)
    return PseudoInverse(y.shape[-2:], alpha, eps, target)(y)
