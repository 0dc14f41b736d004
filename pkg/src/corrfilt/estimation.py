"""Blind estimation of the correction filter from the LR image alone.

The latent kernel is parameterized as a chain of four linearly convolved
factors and fitted with Adam on

    huber(y - S*_k f(H_k y)) + lambda_cen * |m_cen . k|_1 + lambda_sparse * |k|_1

where H_k is the regularized correction filter for k and f is the built-in
pseudo-inverse resolver R (R*R)^-1. Both H_k and S*_k depend on k and the
gradient flows through both.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import autodiff as ad
from .correction import DEFAULT_EPS, CorrectionFilter, correction_filter, numerator_spectrum
from .errors import NumericalError
from .kernels import bicubic_kernel
from .operators import PseudoInverse
from .spectral import Kernel, embed_kernel, linear_convolve

log = logging.getLogger(__name__)

FACTOR_SIZES = (33, 33, 33, 32)


@dataclass(frozen=True)
class EstimationConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    n_iter: int = 250
    huber_delta: float = 1.0
    lambda_cen: float = 1.0
    lambda_sparse: float = 1.0
    filter_eps: float = DEFAULT_EPS
    resolver_eps: float = 0.0
    factor_sizes: tuple[int, ...] = FACTOR_SIZES
    normalize_output: bool = True


@dataclass
class EstimationState:
    factors: list[Kernel]
    adam_m: list[np.ndarray]
    adam_v: list[np.ndarray]
    iteration: int = 0
    hyper: EstimationConfig = field(default_factory=EstimationConfig)

    @classmethod
    def from_factors(cls, factors: list[Kernel], hyper: EstimationConfig | None = None) -> EstimationState:
        return cls(
            list(factors),
            [np.zeros(f.shape) for f in factors],
            [np.zeros(f.shape) for f in factors],
            0,
            hyper or EstimationConfig(),
        )


@dataclass(frozen=True)
class LossTerms:
    total: float
    fidelity: float
    l1_cen: float
    l1_sparse: float


@dataclass
class EstimationResult:
    kernel: Kernel
    kernel_normalized: Kernel
    filter: CorrectionFilter
    trace: list[LossTerms]
    state: EstimationState
    masses: list[float]


def initial_state(alpha: int, hyper: EstimationConfig | None = None) -> EstimationState:
    """Centered deltas for every factor but the last, which holds the bicubic kernel,
    so the composition equals k_bicub exactly."""
    hyper = hyper or EstimationConfig()
    *lead, last = hyper.factor_sizes
    factors = [Kernel.delta(s) if s % 2 else _even_delta(s) for s in lead]
    factors.append(embed_kernel(bicubic_kernel(alpha), (last, last), (last // 2, last // 2)))
    return EstimationState.from_factors(factors, hyper)


def _even_delta(size):
    taps = np.zeros((size, size))
    taps[size // 2, size // 2] = 1.0
    return Kernel(taps, (size // 2, size // 2))


def centrality_mask(shape, alpha: int, center: tuple[int, int] | None = None) -> np.ndarray:
    """1 - exp(-(x^2 + y^2) / (32 alpha^2)) over tap offsets (x, y) from the center."""
    if isinstance(shape, int):
        shape = (shape, shape)
    if center is None:
        center = (shape[0] // 2, shape[1] // 2)
    yy = np.arange(shape[0])[:, None] - center[0]
    xx = np.arange(shape[1])[None, :] - center[1]
    return 1.0 - np.exp(-(xx**2 + yy**2) / (32.0 * alpha**2))


def compose_kernel(state_or_factors) -> Kernel:
    """k = k0 * k1 * k2 * k3 (full linear convolutions, centers add up)."""
    factors = state_or_factors.factors if isinstance(state_or_factors, EstimationState) else state_or_factors
    k = factors[0]
    for f in factors[1:]:
        k = linear_convolve(k, f)
    return k


def huber(residual, delta: float = 1.0) -> float:
    r = np.asarray(residual, dtype=float)
    a = np.abs(r)
    return float(np.where(a <= delta, 0.5 * r * r, delta * (a - 0.5 * delta)).mean())


class _Context:
    """Per (grid, scale) constants shared across iterations."""

    def __init__(self, y: np.ndarray, alpha: int, hyper: EstimationConfig):
        self.y = np.asarray(y, dtype=float)
        self.alpha = alpha
        self.lr_shape = self.y.shape[-2:]
        self.hr_shape = (self.lr_shape[0] * alpha, self.lr_shape[1] * alpha)
        self.target_flip = bicubic_kernel(alpha).flip()
        self.fn = numerator_spectrum(alpha, self.lr_shape)
        self.y_hat = np.fft.fft2(self.y)
        self.resolver = PseudoInverse(self.lr_shape, alpha, hyper.resolver_eps)
        self._mask = {}

    def mask(self, shape, center):
        key = (shape, center)
        if key not in self._mask:
            self._mask[key] = centrality_mask(shape, self.alpha, center)
        return self._mask[key]


def _build(tape, leaves, factors, ctx: _Context, hyper: EstimationConfig, detach_filter=False, detach_downsampler=False):
    alpha = ctx.alpha
    k = leaves[0]
    cy, cx = factors[0].center
    for leaf, f in zip(leaves[1:], factors[1:]):
        k = ad.lconv(tape, k, leaf)
        cy, cx = cy + f.center[0], cx + f.center[1]
    kh, kw = k.value.shape
    k_rows, k_cols = np.arange(kh) - cy, np.arange(kw) - cx

    # correction filter H_k on the LR grid
    k_h = ad.const(k.value) if detach_filter else k
    c = ad.lconv(tape, k_h, ad.const(ctx.target_flip.taps))
    c_rows = np.arange(c.value.shape[0]) - (cy + ctx.target_flip.center[0])
    c_cols = np.arange(c.value.shape[1]) - (cx + ctx.target_flip.center[1])
    keep_r = np.flatnonzero(c_rows % alpha == 0)
    keep_c = np.flatnonzero(c_cols % alpha == 0)
    c_sub = ad.gather(tape, c, keep_r, keep_c)
    grid = ad.fold_embed(tape, c_sub, c_rows[keep_r] // alpha, c_cols[keep_c] // alpha, ctx.lr_shape)
    f_denom = ad.fft2(tape, grid)
    h_spec = ad.cmul(tape, ad.regularized_reciprocal(tape, f_denom, hyper.filter_eps), ad.const(ctx.fn))
    corrected = ad.ifft2_real(tape, ad.cmul(tape, h_spec, ad.const(ctx.y_hat)))

    x_h = ad.linear(tape, corrected, ctx.resolver, ctx.resolver.adjoint)

    # re-downsample with the same kernel
    k_s = ad.const(k.value) if detach_downsampler else k
    k_spec = ad.fft2(tape, ad.fold_embed(tape, k_s, k_rows, k_cols, ctx.hr_shape))
    blurred = ad.ifft2_real(tape, ad.cmul(tape, ad.fft2(tape, x_h), k_spec))
    y_est = ad.subsample(tape, blurred, alpha)

    fid = ad.huber_mean(tape, ad.sub(tape, ad.const(ctx.y), y_est), hyper.huber_delta)
    l1c = ad.weighted_l1(tape, k, ctx.mask((kh, kw), (cy, cx)))
    l1s = ad.weighted_l1(tape, k, 1.0)
    total = ad.add(tape, fid, ad.scale(tape, l1c, hyper.lambda_cen), ad.scale(tape, l1s, hyper.lambda_sparse))
    return total, fid, l1c, l1s


def _evaluate(state: EstimationState, ctx: _Context, with_grad: bool, **detach):
    tape = ad.Tape()
    leaves = [tape.var(f.taps, name=f"k{i}") for i, f in enumerate(state.factors)]
    total, fid, l1c, l1s = _build(tape, leaves, state.factors, ctx, state.hyper, **detach)
    terms = LossTerms(float(total.value), float(fid.value), float(l1c.value), float(l1s.value))
    if not np.isfinite(terms.total):
        raise NumericalError(f"non-finite loss at iteration {state.iteration}")
    if not with_grad:
        return terms, None
    tape.backward(total)
    grads = [np.zeros(f.shape) if leaf.grad is None else np.real(leaf.grad) for leaf, f in zip(leaves, state.factors)]
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NumericalError(f"non-finite gradient at iteration {state.iteration}")
    return terms, grads


def objective(state: EstimationState, y, alpha: int) -> LossTerms:
    return _evaluate(state, _Context(y, alpha, state.hyper), with_grad=False)[0]


def gradient(
    state: EstimationState, y, alpha: int, detach_filter: bool = False, detach_downsampler: bool = False
) -> list[np.ndarray]:
    """Per-tap gradients of the objective for every factor.

    ``detach_filter``/``detach_downsampler`` stop the gradient through the
    correction-filter or re-downsampling path (ablation switches).
    """
    ctx = _Context(y, alpha, state.hyper)
    return _evaluate(state, ctx, True, detach_filter=detach_filter, detach_downsampler=detach_downsampler)[1]


def adam_step(state: EstimationState, grads: list[np.ndarray]) -> EstimationState:
    """One bias-corrected Adam update; returns a new state."""
    hp = state.hyper
    t = state.iteration + 1
    bc1 = 1.0 - hp.beta1**t
    bc2 = 1.0 - hp.beta2**t
    factors, ms, vs = [], [], []
    for f, m, v, g in zip(state.factors, state.adam_m, state.adam_v, grads):
        m = hp.beta1 * m + (1.0 - hp.beta1) * g
        v = hp.beta2 * v + (1.0 - hp.beta2) * g * g
        step = hp.lr * (m / bc1) / (np.sqrt(v / bc2) + hp.adam_eps)
        factors.append(Kernel(f.taps - step, f.center))
        ms.append(m)
        vs.append(v)
    return replace(state, factors=factors, adam_m=ms, adam_v=vs, iteration=t)


def estimate_correction(
    y,
    alpha: int,
    hyper: EstimationConfig | None = None,
    state: EstimationState | None = None,
    callback: Callable[[int, LossTerms], None] | None = None,
) -> EstimationResult:
    """Fit the kernel factors to ``y`` and return the kernel and its correction filter."""
    y = np.asarray(y, dtype=float)
    hyper = hyper or EstimationConfig()
    state = state or initial_state(alpha, hyper)
    composed = sum(hyper.factor_sizes) - len(hyper.factor_sizes) + 1
    if min(y.shape[-2:]) < -(-composed // 4):
        raise ValueError(f"LR image {y.shape[-2:]} too small for a {composed}-tap kernel at scale {alpha}")
    ctx = _Context(y, alpha, hyper)
    trace, masses = [], []
    for i in range(1, hyper.n_iter + 1):
        terms, grads = _evaluate(state, ctx, True)
        state = adam_step(state, grads)
        trace.append(terms)
        masses.append(compose_kernel(state).total())
        if callback is not None:
            callback(i, terms)
        log.debug("iter %d loss %.6g fidelity %.6g", i, terms.total, terms.fidelity)
    k = compose_kernel(state)
    k_norm = k.normalized()
    h = correction_filter(k_norm if hyper.normalize_output else k, alpha, y.shape[-2:], hyper.filter_eps)
    return EstimationResult(k, k_norm, h, trace, state, masses)
