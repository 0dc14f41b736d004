"""Super-resolvers applied after correction: the built-in R (R*R)^-1 map or an
external program driven through PNM files."""

from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .correction import CorrectionFilter, apply_correction
from .image import ImageFormatError, load_image, save_image
from .operators import pseudo_inverse_reconstruct

TMP_ENV = "CORRFILT_TMP"


class ResolverKind(str, Enum):
    BUILTIN_LINEAR = "builtin_linear"
    EXTERNAL = "external"


@dataclass(frozen=True)
class ResolverSpec:
    kind: ResolverKind = ResolverKind.BUILTIN_LINEAR
    command_template: str | None = None
    timeout: float = 600.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ResolverKind(self.kind))
        if self.kind is ResolverKind.EXTERNAL:
            tpl = self.command_template or ""
            missing = [p for p in ("{in}", "{out}", "{scale}") if p not in tpl]
            if missing:
                raise ValueError(f"external command template is missing {', '.join(missing)}")


class ResolverError(RuntimeError):
    pass


class ResolverProcessError(ResolverError):
    def __init__(self, returncode: int, stderr: str):
        excerpt = stderr.strip()[-500:]
        super().__init__(f"external resolver exited with code {returncode}: {excerpt}")
        self.returncode = returncode
        self.stderr = stderr


class ResolverTimeout(ResolverError):
    pass


class ResolverOutputError(ResolverError):
    pass


def resolve_external(y_corrected, alpha: int, spec: ResolverSpec) -> np.ndarray:
    """Run the external command on ``y_corrected`` (quantized to 8-bit PNM) and load its output."""
    if spec.kind is not ResolverKind.EXTERNAL:
        raise ValueError("resolve_external needs an external ResolverSpec")
    y = np.asarray(y_corrected, dtype=float)
    y = y[None] if y.ndim == 2 else y
    with tempfile.TemporaryDirectory(prefix="corrfilt-", dir=os.environ.get(TMP_ENV)) as tmp:
        suffix = ".pgm" if y.shape[0] == 1 else ".ppm"
        src, dst = os.path.join(tmp, "in" + suffix), os.path.join(tmp, "out" + suffix)
        save_image(y, src)
        cmd = spec.command_template.replace("{in}", shlex.quote(src))
        cmd = cmd.replace("{out}", shlex.quote(dst)).replace("{scale}", str(int(alpha)))
        try:
            proc = subprocess.run(shlex.split(cmd), capture_output=True, text=True, timeout=spec.timeout)
        except subprocess.TimeoutExpired as exc:
            raise ResolverTimeout(f"external resolver exceeded {spec.timeout} s") from exc
        if proc.returncode != 0:
            raise ResolverProcessError(proc.returncode, proc.stderr)
        try:
            out = load_image(dst).data
        except (FileNotFoundError, ImageFormatError) as exc:
            raise ResolverOutputError(f"external resolver produced no readable output: {exc}") from exc
    expected = (y.shape[0], y.shape[1] * alpha, y.shape[2] * alpha)
    if out.shape != expected:
        raise ResolverOutputError(f"external resolver output has shape {out.shape}, expected {expected}")
    return out


def super_resolve(y, h: CorrectionFilter | None, alpha: int, spec: ResolverSpec | None = None) -> np.ndarray:
    """x_hat = f(h * y); ``h=None`` skips the correction."""
    spec = spec or ResolverSpec()
    z = np.asarray(y, dtype=float) if h is None else apply_correction(y, h)
    if spec.kind is ResolverKind.BUILTIN_LINEAR:
        return pseudo_inverse_reconstruct(z, alpha)
    return resolve_external(z, alpha, spec)
