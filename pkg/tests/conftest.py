import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def natural_images(size=256):
    """Center crops of public scikit-image sample photos, (C, H, W) in [0, 1]."""
    import skimage.data

    out = {}
    for name in ("camera", "astronaut", "coffee", "chelsea"):
        a = np.asarray(getattr(skimage.data, name)(), dtype=float) / 255.0
        a = a[None] if a.ndim == 2 else a.transpose(2, 0, 1)
        h, w = a.shape[-2:]
        top, left = (h - size) // 2, (w - size) // 2
        out[name] = a[:, top : top + size, left : left + size].copy()
    return out


@pytest.fixture(scope="session")
def photos():
    return natural_images()


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one 'CRITERION n PASS|FAIL ...' line and print it."""

    def record(number, ok, detail):
        line = f"CRITERION {number} {'PASS' if ok else 'FAIL'} {detail}"
        _VERDICTS.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
