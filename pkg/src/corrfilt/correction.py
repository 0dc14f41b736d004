"""Closed-form correction filters that map observations taken with an arbitrary
kernel onto observations taken with the bicubic (target) kernel."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NumericalError
from .kernels import bicubic_kernel
from .operators import autocorrelation_spectrum, regularized_inverse
from .spectral import Kernel, Spectrum, center_shift, crop_kernel, idft2

DEFAULT_EPS = 1e-14
EXACT_MIN_MODULUS = 1e-12
DIAGNOSTIC_THRESHOLD = 1e-6


class Variant(str, Enum):
    EXACT_H0 = "exact_h0"
    REGULARIZED_H = "regularized_h"


@dataclass(frozen=True)
class CorrectionFilter:
    spectrum: Spectrum
    grid: tuple[int, int]
    epsilon: float
    variant: Variant

    def multiplier(self) -> np.ndarray:
        return self.spectrum.to_complex()

    def spatial(self) -> np.ndarray:
        """Filter taps on the LR grid, origin at (0, 0)."""
        return idft2(self.spectrum)

    def cropped(self, size: int = 65) -> Kernel:
        return crop_kernel(self.spatial(), size)

    @classmethod
    def identity(cls, grid: tuple[int, int]) -> CorrectionFilter:
        return cls(Spectrum(np.ones(grid), np.zeros(grid)), tuple(grid), 0.0, Variant.REGULARIZED_H)

    @classmethod
    def from_taps(cls, k: Kernel, grid: tuple[int, int], epsilon: float = DEFAULT_EPS) -> CorrectionFilter:
        """Rebuild a filter from spatial taps (e.g. a cropped KERN file) on ``grid``."""
        spec = Spectrum.from_complex(np.fft.fft2(center_shift(k, *grid, fold=True)))
        return cls(spec, tuple(grid), epsilon, Variant.REGULARIZED_H)


@dataclass(frozen=True)
class DiagnosticReport:
    min_modulus: float
    argmin: tuple[int, int]
    threshold: float
    passed: bool


def _target(alpha, target):
    return bicubic_kernel(alpha) if target is None else target


def denominator_spectrum(k: Kernel, alpha: int, grid, target: Kernel | None = None) -> np.ndarray:
    """F_denom: DFT of (k conv flip(k_bicub)) subsampled by alpha, on the LR grid."""
    return autocorrelation_spectrum(k, _target(alpha, target), alpha, tuple(grid))


def numerator_spectrum(alpha: int, grid, target: Kernel | None = None) -> np.ndarray:
    """F_numer: DFT of the subsampled autocorrelation of the target kernel."""
    t = _target(alpha, target)
    return autocorrelation_spectrum(t, t, alpha, tuple(grid))


def correction_filter_exact(k: Kernel, alpha: int, grid, target: Kernel | None = None) -> CorrectionFilter:
    """h0 = 1 / F_denom, the exact inverse of S*R; pair it with the plain upsampler R."""
    fd = denominator_spectrum(k, alpha, grid, target)
    mod = np.abs(fd)
    if mod.min() <= EXACT_MIN_MODULUS:
        idx = tuple(int(i) for i in np.unravel_index(np.argmin(mod), mod.shape))
        raise NumericalError(
            f"S*R is not invertible: |F_denom| = {mod.min():.3e} at frequency {idx} "
            f"(null(S*) meets range(R))"
        )
    return CorrectionFilter(Spectrum.from_complex(1.0 / fd), tuple(grid), 0.0, Variant.EXACT_H0)


def correction_filter(
    k: Kernel, alpha: int, grid, eps: float = DEFAULT_EPS, target: Kernel | None = None
) -> CorrectionFilter:
    """Regularized filter F_numer * conj(F_denom) / (|F_denom|^2 + eps)."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    fd = denominator_spectrum(k, alpha, grid, target)
    fn = numerator_spectrum(alpha, grid, target)
    spec = fn * regularized_inverse(fd, eps, "F_denom")
    return CorrectionFilter(Spectrum.from_complex(spec), tuple(grid), eps, Variant.REGULARIZED_H)


def apply_correction(y, h: CorrectionFilter) -> np.ndarray:
    """Cyclic filtering of every channel of ``y`` with ``h``."""
    y = np.asarray(y, dtype=float)
    if tuple(y.shape[-2:]) != tuple(h.grid):
        raise ValueError(f"filter built for grid {h.grid}, image is {y.shape[-2:]}")
    return np.fft.ifft2(np.fft.fft2(y) * h.multiplier()).real


def invertibility_diagnostic(
    k: Kernel, alpha: int, grid, threshold: float = DIAGNOSTIC_THRESHOLD, target: Kernel | None = None
) -> DiagnosticReport:
    """Check null(S*) and range(R) intersect trivially, i.e. F_denom has no (near) zeros."""
    mod = np.abs(denominator_spectrum(k, alpha, grid, target))
    idx = tuple(int(i) for i in np.unravel_index(np.argmin(mod), mod.shape))
    m = float(mod[idx])
    return DiagnosticReport(m, idx, threshold, m > threshold)
