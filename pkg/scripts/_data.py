"""Shared image loading for the experiment scripts."""

import numpy as np

from corrfilt.image import load_image

SAMPLES = ("camera", "astronaut", "coffee", "chelsea")


def sample_images(paths=None, size=256):
    """PNM files if given, else center crops of the scikit-image sample photos."""
    if paths:
        return {p: load_image(p).data for p in paths}
    import skimage.data

    out = {}
    for name in SAMPLES:
        a = np.asarray(getattr(skimage.data, name)(), dtype=float) / 255.0
        a = a[None] if a.ndim == 2 else a.transpose(2, 0, 1)
        if size:
            h, w = a.shape[-2:]
            top, left = (h - size) // 2, (w - size) // 2
            a = a[:, top : top + size, left : left + size]
        out[name] = a.copy()
    return out
