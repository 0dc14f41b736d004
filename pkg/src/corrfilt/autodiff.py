"""A small reverse-mode tape over numpy arrays.

Only the primitives needed by the kernel-estimation objective are provided.
Complex-valued nodes carry gradients in the real-pair convention
``grad = dL/d(re) + 1j * dL/d(im)``, so every rule below is the ordinary real
chain rule applied to the (re, im) pair.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy import signal


class Var:
    __slots__ = ("value", "grad", "requires_grad", "name")

    def __init__(self, value, requires_grad: bool = False, name: str = ""):
        self.value = value
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name

    def __repr__(self):
        return f"Var({self.name or 'anon'}, shape={np.shape(self.value)}, requires_grad={self.requires_grad})"


class Tape:
    def __init__(self):
        self._nodes: list[tuple[Var, Sequence[Var], Callable]] = []

    def var(self, value, name: str = "") -> Var:
        """Leaf that gradients are accumulated into."""
        return Var(np.asarray(value), requires_grad=True, name=name)

    def record(self, value, parents: Sequence[Var], vjp: Callable) -> Var:
        out = Var(value, requires_grad=any(p.requires_grad for p in parents))
        if out.requires_grad:
            self._nodes.append((out, parents, vjp))
        return out

    def backward(self, out: Var) -> None:
        out.grad = np.ones_like(out.value, dtype=float)
        for node, parents, vjp in reversed(self._nodes):
            if node.grad is None:
                continue
            grads = vjp(node.grad)
            for p, g in zip(parents, grads):
                if not p.requires_grad or g is None:
                    continue
                p.grad = g if p.grad is None else p.grad + g


def const(value) -> Var:
    return Var(np.asarray(value))


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _real_if(g, like):
    return g.real if not np.iscomplexobj(like) else g


# ---- real-domain primitives -------------------------------------------------


def lconv(tape: Tape, a: Var, b: Var) -> Var:
    """Full 2-D linear convolution."""
    out = signal.convolve(a.value, b.value, mode="full")

    def vjp(g):
        ga = signal.correlate(g, b.value, mode="valid") if a.requires_grad else None
        gb = signal.correlate(g, a.value, mode="valid") if b.requires_grad else None
        return ga, gb

    return tape.record(out, (a, b), vjp)


def gather(tape: Tape, x: Var, rows: np.ndarray, cols: np.ndarray) -> Var:
    """x[..., rows][:, cols] on the last two axes (an index-selection, no repeats)."""
    out = x.value[..., rows[:, None], cols[None, :]]

    def vjp(g):
        gx = np.zeros_like(x.value, dtype=g.dtype)
        gx[..., rows[:, None], cols[None, :]] = g
        return (gx,)

    return tape.record(out, (x,), vjp)


def fold_embed(tape: Tape, k: Var, rows: np.ndarray, cols: np.ndarray, shape: tuple[int, int]) -> Var:
    """Scatter-add taps into an H x W grid at (rows % H, cols % W); adjoint is a gather."""
    ri, ci = np.ix_(rows % shape[0], cols % shape[1])
    out = np.zeros(shape)
    np.add.at(out, (ri, ci), k.value)

    def vjp(g):
        return (g[ri, ci],)

    return tape.record(out, (k,), vjp)


def subsample(tape: Tape, x: Var, alpha: int, phase: tuple[int, int] = (0, 0)) -> Var:
    out = x.value[..., phase[0] :: alpha, phase[1] :: alpha].copy()

    def vjp(g):
        gx = np.zeros_like(x.value)
        gx[..., phase[0] :: alpha, phase[1] :: alpha] = g
        return (gx,)

    return tape.record(out, (x,), vjp)


def linear(tape: Tape, x: Var, fn: Callable, adjoint: Callable) -> Var:
    """Apply a fixed real linear operator with a known adjoint."""
    return tape.record(fn(x.value), (x,), lambda g: (adjoint(g),))


def sub(tape: Tape, a: Var, b: Var) -> Var:
    return tape.record(a.value - b.value, (a, b), lambda g: (_unbroadcast(g, a.value.shape), -_unbroadcast(g, b.value.shape)))


def add(tape: Tape, *xs: Var) -> Var:
    return tape.record(sum(x.value for x in xs), xs, lambda g: tuple(g for _ in xs))


def scale(tape: Tape, x: Var, c: float) -> Var:
    return tape.record(c * x.value, (x,), lambda g: (c * g,))


def huber_mean(tape: Tape, r: Var, delta: float) -> Var:
    """Mean Huber penalty: r^2/2 inside |r| <= delta, delta*(|r| - delta/2) outside."""
    v = r.value
    a = np.abs(v)
    out = np.where(a <= delta, 0.5 * v * v, delta * (a - 0.5 * delta)).mean()

    def vjp(g):
        return (g * np.clip(v, -delta, delta) / v.size,)

    return tape.record(np.asarray(out), (r,), vjp)


def weighted_l1(tape: Tape, x: Var, weight) -> Var:
    """sum |weight * x| for a nonnegative constant weight; subgradient sign(0) = 0."""
    w = np.asarray(weight, dtype=float)
    out = np.abs(w * x.value).sum()
    return tape.record(np.asarray(out), (x,), lambda g: (g * w * np.sign(x.value),))


# ---- spectral primitives ----------------------------------------------------


def fft2(tape: Tape, x: Var) -> Var:
    """Unnormalized DFT over the last two axes."""
    n = x.value.shape[-2] * x.value.shape[-1]

    def vjp(g):
        return (_real_if(n * np.fft.ifft2(g), x.value),)

    return tape.record(np.fft.fft2(x.value), (x,), vjp)


def ifft2_real(tape: Tape, z: Var) -> Var:
    """Real part of the normalized inverse DFT."""
    n = z.value.shape[-2] * z.value.shape[-1]
    return tape.record(np.fft.ifft2(z.value).real, (z,), lambda g: (np.fft.fft2(g) / n,))


def cmul(tape: Tape, a: Var, b: Var) -> Var:
    """Elementwise complex product (broadcasting over leading axes)."""

    def vjp(g):
        ga = _unbroadcast(g * np.conj(b.value), a.value.shape) if a.requires_grad else None
        gb = _unbroadcast(g * np.conj(a.value), b.value.shape) if b.requires_grad else None
        return ga, gb

    return tape.record(a.value * b.value, (a, b), vjp)


def regularized_reciprocal(tape: Tape, d: Var, eps: float) -> Var:
    """conj(d) / (|d|^2 + eps), differentiated through re/im separately."""
    re, im = d.value.real, d.value.imag
    q = re * re + im * im + eps
    out = (re - 1j * im) / q

    def vjp(g):
        gr, gi = g.real, g.imag
        q2 = q * q
        # out = (re/q) + 1j*(-im/q)
        dur_dre = 1.0 / q - 2.0 * re * re / q2
        dur_dim = -2.0 * re * im / q2
        dui_dre = 2.0 * re * im / q2
        dui_dim = -1.0 / q + 2.0 * im * im / q2
        g_re = gr * dur_dre + gi * dui_dre
        g_im = gr * dur_dim + gi * dui_dim
        return (g_re + 1j * g_im,)

    return tape.record(out, (d,), vjp)
