"""Batch command line: make-kernel, synth, correct, estimate, upscale, evaluate, diagnose.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict

import numpy as np

from .correction import (
    DEFAULT_EPS,
    DIAGNOSTIC_THRESHOLD,
    CorrectionFilter,
    apply_correction,
    correction_filter,
    invertibility_diagnostic,
)
from .errors import NumericalError
from .estimation import EstimationConfig, estimate_correction
from .image import ImageFormatError, evaluate, load_image, save_image
from .kernels import bicubic_kernel, box_kernel, gaussian_kernel, read_kernel, write_kernel
from .operators import SamplingConfig, downsample
from .resolver import ResolverError, ResolverSpec, super_resolve
from .spectral import Kernel

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
SCALES = (1, 2, 3, 4, 8)
SWEEP_EPS = (1e-14, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2)

log = logging.getLogger("corrfilt")


class UsageError(Exception):
    pass


def fmt(v) -> str:
    """6 significant digits; integral floats keep a trailing '.0'."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    s = f"{float(v):.6g}"
    if s.lstrip("-").isdigit():
        s += ".0"
    return s


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def emit(args, record: dict, line: str) -> None:
    if args.json:
        print(json.dumps(_json_safe(record)))
    else:
        print(line)


def _load_kernel(path) -> Kernel:
    try:
        return read_kernel(path)[0]
    except ValueError as exc:
        raise ImageFormatError(path, str(exc)) from exc


def _require_output_dir(path):
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise FileNotFoundError(f"{path}: output directory does not exist")


def synthesize(hr, kernel: Kernel, scale: int) -> np.ndarray:
    """LR observation (x conv k) sampled by ``scale``, before quantization."""
    return downsample(hr, SamplingConfig(kernel, scale), pad=True)


def cmd_make_kernel(args):
    if args.type == "bicubic":
        k = bicubic_kernel(args.scale)
    elif args.type == "gaussian":
        if args.sigma is None:
            raise UsageError("gaussian kernels need --sigma")
        k = gaussian_kernel(args.sigma, args.size)
    else:
        if args.width is None:
            raise UsageError("box kernels need --width")
        k = box_kernel(args.width)
    _require_output_dir(args.out)
    write_kernel(k, args.out)
    emit(
        args,
        {"out": args.out, "shape": list(k.shape), "center": list(k.center), "sum": k.total()},
        f"{args.out} {k.shape[0]}x{k.shape[1]} sum {fmt(k.total())}",
    )


def cmd_synth(args):
    hr = load_image(args.hr)
    k = _load_kernel(args.kernel)
    _require_output_dir(args.out)
    lr = synthesize(hr, k, args.scale)
    save_image(lr, args.out)
    emit(args, {"out": args.out, "shape": list(lr.shape)}, f"{args.out} {lr.shape[-2]}x{lr.shape[-1]}")


def cmd_correct(args):
    y = load_image(args.lr).data
    k = _load_kernel(args.kernel)
    ref = load_image(args.reference).data if args.reference else None
    _require_output_dir(args.out)
    h = correction_filter(k, args.scale, y.shape[-2:], args.eps)
    yc = apply_correction(y, h)
    save_image(yc, args.out)
    record = {"out": args.out, "eps": args.eps}
    line = f"{args.out} eps {fmt(args.eps)}"
    if ref is not None:
        rep = evaluate(yc, ref, args.border)
        record.update(psnr=rep.psnr, ssim=rep.ssim, border=rep.border_shaved)
        line += f" psnr {fmt(rep.psnr)} ssim {fmt(rep.ssim)}"
    emit(args, record, line)
    if args.sweep:
        rows = []
        for eps in SWEEP_EPS:
            z = apply_correction(y, correction_filter(k, args.scale, y.shape[-2:], eps))
            row = {"eps": eps, "energy": float(np.sqrt(np.mean(z**2))), "rms_change": float(np.sqrt(np.mean((z - y) ** 2)))}
            if ref is not None:
                row["psnr"] = evaluate(z, ref, args.border).psnr
            rows.append(row)
        energies = [r["energy"] for r in rows]
        monotone = all(b <= a * (1 + 1e-12) for a, b in zip(energies, energies[1:]))
        if args.json:
            print(json.dumps(_json_safe({"sweep": rows, "energy_monotone_nonincreasing": monotone})))
        else:
            for r in rows:
                print(" ".join(f"{key} {fmt(val)}" for key, val in r.items()))
            print(f"energy_monotone_nonincreasing {fmt(monotone)}")


def cmd_estimate(args):
    y = load_image(args.lr).data
    for path in (args.out_kernel, args.out_filter, args.out_report):
        _require_output_dir(path)
    hyper = EstimationConfig(
        lr=args.lr_rate,
        n_iter=args.iters,
        huber_delta=args.huber_delta,
        lambda_cen=args.lambda_cen,
        lambda_sparse=args.lambda_sparse,
        filter_eps=args.eps,
    )
    res = estimate_correction(y, args.scale, hyper)
    header = [
        "# corrfilt blind correction-filter estimation",
        "# resolver builtin_linear: pseudo-inverse R(R*R)^-1 stands in for a pretrained network inside the loop",
        f"# eps {hyper.filter_eps:g} gamma {hyper.lr:g} N_iter {hyper.n_iter}",
    ]
    header += [f"# {key} {value}" for key, value in asdict(hyper).items()]
    header.append("# iter loss fidelity l1_cen l1_sparse")
    lines = [
        f"{i} {t.total:.6g} {t.fidelity:.6g} {t.l1_cen:.6g} {t.l1_sparse:.6g}" for i, t in enumerate(res.trace, start=1)
    ]
    with open(args.out_report, "w") as fh:
        fh.write("\n".join(header + lines) + "\n")
    write_kernel(res.kernel, args.out_kernel, {"mass": fmt(res.kernel.total())})
    stem, ext = os.path.splitext(args.out_kernel)
    write_kernel(res.kernel_normalized, f"{stem}.normalized{ext or '.kern'}")
    grid = res.filter.grid
    write_kernel(res.filter.cropped(65), args.out_filter, {"grid": f"{grid[0]} {grid[1]}", "eps": repr(res.filter.epsilon)})
    final = res.trace[-1]
    emit(
        args,
        {"iterations": len(res.trace), "loss": final.total, "fidelity": final.fidelity, "mass": res.kernel.total(), **asdict(hyper)},
        f"iters {len(res.trace)} loss {fmt(final.total)} fidelity {fmt(final.fidelity)} mass {fmt(res.kernel.total())}",
    )


def _filter_for(args, grid) -> CorrectionFilter | None:
    if args.filter:
        k, _meta = read_kernel(args.filter)
        return CorrectionFilter.from_taps(k, grid)
    if args.kernel:
        return correction_filter(_load_kernel(args.kernel), args.scale, grid, args.eps)
    return None


def cmd_upscale(args):
    y = load_image(args.lr).data
    _require_output_dir(args.out)
    try:
        h = _filter_for(args, y.shape[-2:])
    except ValueError as exc:
        raise ImageFormatError(args.filter or args.kernel, str(exc)) from exc
    if args.resolver == "external":
        if not args.command:
            raise UsageError("--resolver external needs --command")
        spec = ResolverSpec("external", args.command, args.timeout)
    else:
        spec = ResolverSpec()
    x = super_resolve(y, h, args.scale, spec)
    save_image(x, args.out)
    emit(args, {"out": args.out, "shape": list(x.shape)}, f"{args.out} {x.shape[-2]}x{x.shape[-1]}")


def cmd_evaluate(args):
    rep = evaluate(load_image(args.a), load_image(args.b), args.border)
    emit(args, asdict(rep), f"{fmt(rep.psnr)} {fmt(rep.ssim)}")


def cmd_diagnose(args):
    k = _load_kernel(args.kernel)
    rep = invertibility_diagnostic(k, args.scale, tuple(args.grid), args.threshold)
    verdict = "pass" if rep.passed else "fail"
    emit(
        args,
        {**asdict(rep), "verdict": verdict},
        f"min_modulus {fmt(rep.min_modulus)} at {rep.argmin[0]} {rep.argmin[1]} threshold {fmt(rep.threshold)} {verdict}",
    )
    return EXIT_OK if rep.passed else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corrfilt", description=__doc__.splitlines()[0])
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def scale_arg(q, required=True):
        q.add_argument("--scale", type=int, choices=SCALES, required=required, default=None if required else 2)

    q = sub.add_parser("make-kernel", help="write a bicubic, gaussian or box kernel")
    q.add_argument("type", choices=("bicubic", "gaussian", "box"))
    q.add_argument("--scale", type=int, choices=SCALES, default=2)
    q.add_argument("--sigma", type=float)
    q.add_argument("--size", type=int)
    q.add_argument("--width", type=int)
    q.add_argument("-o", "--out", required=True)
    q.set_defaults(func=cmd_make_kernel)

    q = sub.add_parser("synth", help="simulate an LR observation y = (x conv k) downsampled")
    q.add_argument("hr")
    q.add_argument("--kernel", required=True)
    scale_arg(q)
    q.add_argument("-o", "--out", required=True)
    q.set_defaults(func=cmd_synth)

    q = sub.add_parser("correct", help="apply the non-blind correction filter")
    q.add_argument("lr")
    q.add_argument("--kernel", required=True)
    scale_arg(q)
    q.add_argument("--eps", type=float, default=DEFAULT_EPS)
    q.add_argument("--reference", help="bicubic LR image to score the result against")
    q.add_argument("--border", type=int, default=0)
    q.add_argument("--sweep", action="store_true", help="report the effect of a range of eps values")
    q.add_argument("-o", "--out", required=True)
    q.set_defaults(func=cmd_correct)

    q = sub.add_parser("estimate", help="blindly estimate the kernel and correction filter")
    q.add_argument("lr")
    scale_arg(q)
    q.add_argument("--eps", type=float, default=DEFAULT_EPS)
    q.add_argument("--lr", dest="lr_rate", type=float, default=1e-4, help="Adam learning rate")
    q.add_argument("--iters", type=int, default=250)
    q.add_argument("--huber-delta", type=float, default=1.0)
    q.add_argument("--lambda-cen", type=float, default=1.0)
    q.add_argument("--lambda-sparse", type=float, default=1.0)
    q.add_argument("--out-kernel", required=True)
    q.add_argument("--out-filter", required=True)
    q.add_argument("--out-report", required=True)
    q.set_defaults(func=cmd_estimate)

    q = sub.add_parser("upscale", help="correct then super-resolve")
    q.add_argument("lr")
    scale_arg(q)
    g = q.add_mutually_exclusive_group()
    g.add_argument("--filter", help="KERN filter file written by estimate")
    g.add_argument("--kernel", help="known downscaling kernel")
    q.add_argument("--eps", type=float, default=DEFAULT_EPS)
    q.add_argument("--resolver", choices=("builtin", "external"), default="builtin")
    q.add_argument("--command", help="external command template with {in} {out} {scale}")
    q.add_argument("--timeout", type=float, default=600.0)
    q.add_argument("-o", "--out", required=True)
    q.set_defaults(func=cmd_upscale)

    q = sub.add_parser("evaluate", help="PSNR and SSIM on luma")
    q.add_argument("a")
    q.add_argument("b")
    q.add_argument("--border", type=int, default=0)
    q.set_defaults(func=cmd_evaluate)

    q = sub.add_parser("diagnose", help="check that the kernel leaves S*R invertible")
    q.add_argument("--kernel", required=True)
    scale_arg(q)
    q.add_argument("--grid", type=int, nargs=2, default=(64, 64), metavar=("H", "W"))
    q.add_argument("--threshold", type=float, default=DIAGNOSTIC_THRESHOLD)
    q.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    for name in ("eps",):
        if getattr(args, name, 0) is not None and getattr(args, name, 0) < 0:
            parser.error(f"--{name} must be >= 0")
    try:
        code = args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"corrfilt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ImageFormatError, ResolverError) as exc:
        print(f"corrfilt: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"corrfilt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"corrfilt: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
