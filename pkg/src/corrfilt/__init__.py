"""Correction filters that let bicubic-trained super-resolvers handle other downscaling kernels."""

from .correction import (
    CorrectionFilter,
    apply_correction,
    correction_filter,
    correction_filter_exact,
    invertibility_diagnostic,
)
from .errors import NumericalError
from .estimation import EstimationConfig, estimate_correction
from .image import Image, load_image, psnr, save_image, ssim, to_luma
from .kernels import bicubic_kernel, box_kernel, gaussian_kernel, read_kernel, write_kernel
from .operators import SamplingConfig, downsample, pseudo_inverse_reconstruct, upsample
from .resolver import ResolverSpec, super_resolve
from .spectral import Kernel, Spectrum

__all__ = [
    "CorrectionFilter",
    "EstimationConfig",
    "Image",
    "Kernel",
    "NumericalError",
    "ResolverSpec",
    "SamplingConfig",
    "Spectrum",
    "apply_correction",
    "bicubic_kernel",
    "box_kernel",
    "correction_filter",
    "correction_filter_exact",
    "downsample",
    "estimate_correction",
    "gaussian_kernel",
    "invertibility_diagnostic",
    "load_image",
    "psnr",
    "pseudo_inverse_reconstruct",
    "read_kernel",
    "save_image",
    "ssim",
    "super_resolve",
    "to_luma",
    "upsample",
    "write_kernel",
]
