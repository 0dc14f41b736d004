import json
import shlex
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from corrfilt.cli import fmt, main, synthesize
from corrfilt.image import load_image, psnr, save_image
from corrfilt.kernels import bicubic_kernel, gaussian_kernel, read_kernel, write_kernel
from corrfilt.spectral import Kernel
from oracles import downsample_matrix

HELPER = Path(__file__).parent / "helpers" / "nn_upscale.py"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out.strip(), err


@pytest.fixture
def camera(tmp_path, photos):
    p = tmp_path / "camera.pgm"
    save_image(photos["camera"], p)
    return p


def test_fmt():
    assert fmt(float("inf")) == "inf"
    assert fmt(1.0) == "1.0"
    assert fmt(51.34512) == "51.3451"
    assert fmt(3) == "3"
    assert fmt(1e-14) == "1e-14"


# ---- make-kernel ------------------------------------------------------------


def test_make_kernel_types(tmp_path, capsys):
    code, out, _ = run(capsys, "make-kernel", "gaussian", "--sigma", 1.0607, "--size", 21, "-o", tmp_path / "g.kern")
    assert code == 0 and "sum 1.0" in out
    k, _ = read_kernel(tmp_path / "g.kern")
    assert k.shape == (21, 21) and k.total() == pytest.approx(1.0, abs=1e-12)

    assert run(capsys, "make-kernel", "box", "--width", 4, "-o", tmp_path / "b.kern")[0] == 0
    k, _ = read_kernel(tmp_path / "b.kern")
    np.testing.assert_array_equal(k.taps, np.full((4, 4), 0.0625))

    assert run(capsys, "make-kernel", "bicubic", "--scale", 2, "-o", tmp_path / "c.kern")[0] == 0
    k, _ = read_kernel(tmp_path / "c.kern")
    assert k.shape == (8, 8)
    assert np.linalg.matrix_rank(k.taps, tol=1e-12) == 1
    np.testing.assert_array_equal(k.taps, bicubic_kernel(2).taps)


def test_make_kernel_usage_errors(tmp_path, capsys):
    assert run(capsys, "make-kernel", "gaussian", "-o", tmp_path / "g.kern")[0] == 2
    with pytest.raises(SystemExit) as info:
        main(["make-kernel", "motion", "-o", str(tmp_path / "m.kern")])
    assert info.value.code == 2
    assert run(capsys, "make-kernel", "box", "--width", 2, "-o", tmp_path / "nodir" / "b.kern")[0] == 3


def test_scale_must_be_supported(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["diagnose", "--kernel", "x.kern", "--scale", "5"])
    assert info.value.code == 2


# ---- synth ------------------------------------------------------------------


def test_synth_delta_scale_one_and_constant(tmp_path, capsys, camera):
    write_kernel(Kernel.delta(1), tmp_path / "d.kern")
    assert run(capsys, "synth", camera, "--kernel", tmp_path / "d.kern", "--scale", 1, "-o", tmp_path / "y.pgm")[0] == 0
    assert (tmp_path / "y.pgm").read_bytes() == camera.read_bytes()

    save_image(np.full((16, 16), 100 / 255), tmp_path / "flat.pgm")
    write_kernel(gaussian_kernel(1.5), tmp_path / "g.kern")
    assert run(capsys, "synth", tmp_path / "flat.pgm", "--kernel", tmp_path / "g.kern", "--scale", 4, "-o", tmp_path / "f.pgm")[0] == 0
    np.testing.assert_array_equal(load_image(tmp_path / "f.pgm").data, 100 / 255)


def test_synth_matches_dense_oracle(rng):
    x = rng.random((8, 8))
    k = Kernel(rng.random((3, 3)), (1, 1))
    m = downsample_matrix(k.taps, k.center, (8, 8), 2)
    assert np.abs(synthesize(x, k, 2).ravel() - m @ x.ravel()).max() < 1e-10


# ---- correct ----------------------------------------------------------------


def test_correct_with_bicubic_kernel_is_near_identity(tmp_path, capsys, camera):
    write_kernel(bicubic_kernel(2), tmp_path / "kb.kern")
    code, _, _ = run(capsys, "correct", camera, "--kernel", tmp_path / "kb.kern", "--scale", 2, "-o", tmp_path / "c.pgm")
    assert code == 0
    assert psnr(load_image(tmp_path / "c.pgm"), load_image(camera)) >= 60


def test_synth_correct_evaluate_pipeline(tmp_path, capsys, camera):
    sigma = 1.5 / np.sqrt(2)
    run(capsys, "make-kernel", "gaussian", "--sigma", sigma, "-o", tmp_path / "g.kern")
    run(capsys, "make-kernel", "bicubic", "--scale", 2, "-o", tmp_path / "kb.kern")
    run(capsys, "synth", camera, "--kernel", tmp_path / "g.kern", "--scale", 2, "-o", tmp_path / "y.pgm")
    run(capsys, "synth", camera, "--kernel", tmp_path / "kb.kern", "--scale", 2, "-o", tmp_path / "yb.pgm")
    code, out, _ = run(
        capsys, "correct", tmp_path / "y.pgm", "--kernel", tmp_path / "g.kern", "--scale", 2,
        "--reference", tmp_path / "yb.pgm", "--border", 2, "-o", tmp_path / "yc.pgm",
    )
    assert code == 0 and "psnr" in out
    code, out, _ = run(capsys, "evaluate", tmp_path / "yc.pgm", tmp_path / "yb.pgm", "--border", 2)
    value, score = (float(v) for v in out.split())
    assert value >= 40 and score >= 0.99
    _, base, _ = run(capsys, "evaluate", tmp_path / "y.pgm", tmp_path / "yb.pgm", "--border", 2)
    assert value > float(base.split()[0])


def test_correct_sweep(tmp_path, capsys, camera):
    run(capsys, "make-kernel", "gaussian", "--sigma", 1.0, "-o", tmp_path / "g.kern")
    code, out, _ = run(capsys, "correct", camera, "--kernel", tmp_path / "g.kern", "--scale", 2, "--sweep", "-o", tmp_path / "c.pgm")
    lines = out.splitlines()
    assert code == 0 and len(lines) == 1 + 7 + 1
    assert lines[1].startswith("eps 1e-14 energy")
    assert lines[-1] == "energy_monotone_nonincreasing true"
    code, out, _ = run(capsys, "--json", "correct", camera, "--kernel", tmp_path / "g.kern", "--scale", 2, "--sweep", "-o", tmp_path / "c.pgm")
    sweep = json.loads(out.splitlines()[-1])
    assert [r["eps"] for r in sweep["sweep"]] == [1e-14, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2]


def test_correct_rejects_negative_eps(tmp_path, capsys, camera):
    with pytest.raises(SystemExit) as info:
        main(["correct", str(camera), "--kernel", "k.kern", "--scale", "2", "--eps", "-1", "-o", str(tmp_path / "c.pgm")])
    assert info.value.code == 2


# ---- estimate / upscale -----------------------------------------------------


def test_estimate_writes_report_kernel_and_filter(tmp_path, capsys, photos):
    y = synthesize(photos["camera"][:, :128, :128], gaussian_kernel(3.5 / np.sqrt(2)), 4)
    save_image(y, tmp_path / "y.pgm")
    code, out, _ = run(
        capsys, "estimate", tmp_path / "y.pgm", "--scale", 4, "--iters", 3,
        "--out-kernel", tmp_path / "k.kern", "--out-filter", tmp_path / "h.kern", "--out-report", tmp_path / "run.txt",
    )
    assert code == 0 and out.startswith("iters 3 loss")
    report = (tmp_path / "run.txt").read_text().splitlines()
    assert "# eps 1e-14 gamma 0.0001 N_iter 3" in report
    assert "# iter loss fidelity l1_cen l1_sparse" in report
    assert any("builtin_linear" in line for line in report)
    rows = [line for line in report if not line.startswith("#")]
    assert [r.split()[0] for r in rows] == ["1", "2", "3"] and all(len(r.split()) == 5 for r in rows)
    k, meta = read_kernel(tmp_path / "k.kern")
    assert k.shape == (128, 128) and "mass" in meta
    assert read_kernel(tmp_path / "k.normalized.kern")[0].total() == pytest.approx(1.0)
    h, meta = read_kernel(tmp_path / "h.kern")
    assert h.shape == (32, 32)  # cropped to at most 65 taps, bounded by the 32x32 grid
    assert meta == {"grid": "32 32", "eps": "1e-14"}

    code, out, _ = run(capsys, "upscale", tmp_path / "y.pgm", "--scale", 4, "--filter", tmp_path / "h.kern", "-o", tmp_path / "x.pgm")
    assert code == 0 and out.endswith("128x128")


def test_estimate_too_small_is_usage_error(tmp_path, capsys):
    save_image(np.zeros((8, 8)), tmp_path / "y.pgm")
    code, _, err = run(
        capsys, "estimate", tmp_path / "y.pgm", "--scale", 2, "--iters", 1,
        "--out-kernel", tmp_path / "k.kern", "--out-filter", tmp_path / "h.kern", "--out-report", tmp_path / "r.txt",
    )
    assert code == 2 and "too small" in err


def test_upscale_builtin_and_external(tmp_path, capsys, rng):
    save_image(rng.random((3, 8, 10)), tmp_path / "y.ppm")
    write_kernel(gaussian_kernel(1.0), tmp_path / "g.kern")
    code, out, _ = run(capsys, "upscale", tmp_path / "y.ppm", "--scale", 2, "--kernel", tmp_path / "g.kern", "-o", tmp_path / "x.ppm")
    assert code == 0 and load_image(tmp_path / "x.ppm").data.shape == (3, 16, 20)

    cmd = f"{shlex.quote(sys.executable)} {shlex.quote(str(HELPER))} {{in}} {{out}} {{scale}}"
    code, _, _ = run(capsys, "upscale", tmp_path / "y.ppm", "--scale", 4, "--resolver", "external", "--command", cmd, "-o", tmp_path / "nn.ppm")
    assert code == 0 and load_image(tmp_path / "nn.ppm").data.shape == (3, 32, 40)

    code, _, err = run(capsys, "upscale", tmp_path / "y.ppm", "--scale", 2, "--resolver", "external", "--command", cmd + " --fail", "-o", tmp_path / "z.ppm")
    assert code == 3 and "code 1" in err
    assert run(capsys, "upscale", tmp_path / "y.ppm", "--scale", 2, "--resolver", "external", "-o", tmp_path / "z.ppm")[0] == 2


# ---- evaluate / diagnose ----------------------------------------------------


def test_evaluate_outputs(tmp_path, capsys, rng):
    a = rng.random((16, 16))
    save_image(a, tmp_path / "a.pgm")
    save_image(a, tmp_path / "b.pgm")
    assert run(capsys, "evaluate", tmp_path / "a.pgm", tmp_path / "b.pgm")[1] == "inf 1.0"
    # offsets of 25 and 26 grey levels: mse = 650.5 / 255^2, about 20 dB
    base = np.full((16, 16), 100.0)
    shifted = base + np.where(np.arange(16) % 2 == 0, 25.0, 26.0)
    save_image(base / 255, tmp_path / "c.pgm")
    save_image(shifted / 255, tmp_path / "d.pgm")
    code, out, _ = run(capsys, "evaluate", tmp_path / "c.pgm", tmp_path / "d.pgm")
    assert float(out.split()[0]) == pytest.approx(10 * np.log10(255**2 / 650.5), abs=1e-4)
    code, out, _ = run(capsys, "--json", "evaluate", tmp_path / "a.pgm", tmp_path / "b.pgm")
    assert json.loads(out)["psnr"] == "inf"


def test_missing_input_is_io_error(tmp_path, capsys):
    code, _, err = run(capsys, "evaluate", tmp_path / "nope.pgm", tmp_path / "nope.pgm")
    assert code == 3 and "nope.pgm" in err
    (tmp_path / "bad.kern").write_text("not a kernel\n")
    assert run(capsys, "diagnose", "--kernel", tmp_path / "bad.kern", "--scale", 2)[0] == 3


def test_diagnose_verdicts(tmp_path, capsys):
    write_kernel(Kernel.delta(1), tmp_path / "d.kern")
    code, out, _ = run(capsys, "diagnose", "--kernel", tmp_path / "d.kern", "--scale", 2)
    assert code == 0 and out.endswith("pass")
    write_kernel(gaussian_kernel(8.0), tmp_path / "wide.kern")
    code, out, _ = run(capsys, "diagnose", "--kernel", tmp_path / "wide.kern", "--scale", 2)
    assert code == 4 and out.endswith("fail")
    run(capsys, "make-kernel", "box", "--width", 8, "-o", tmp_path / "b8.kern")
    code, out, _ = run(capsys, "--json", "diagnose", "--kernel", tmp_path / "b8.kern", "--scale", 4, "--grid", 32, 32)
    rec = json.loads(out)
    assert code == 4 and rec["min_modulus"] < 1e-12 and rec["argmin"] == [0, 16]


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "corrfilt", "make-kernel", "box", "--width", "2", "-o", str(tmp_path / "b.kern")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert read_kernel(tmp_path / "b.kern")[0].total() == pytest.approx(1.0)
