"""Why the blind objective cannot see k when the resolver is linear.

With f = R (R*R)^-1 and the filter H_k built from the same k, the map
y -> S*_k f(H_k y) has the spectrum |F_denom|^2 / (|F_denom|^2 + eps), which is 1
up to eps for any kernel that passes the invertibility diagnostic. The fidelity
term is then ~0 regardless of k and only the L1 terms drive the estimate.
This script evaluates the fidelity term for a handful of unrelated kernels.

    python3 scripts/fidelity_collapse.py
"""

import numpy as np

from corrfilt.correction import denominator_spectrum
from corrfilt.estimation import EstimationConfig, EstimationState, objective
from corrfilt.kernels import bicubic_kernel, box_kernel, gaussian_kernel
from corrfilt.operators import SamplingConfig, downsample
from corrfilt.spectral import Kernel

from _data import sample_images


def as_state(k: Kernel, hyper):
    # a single-factor "chain" is enough to evaluate the objective at k
    return EstimationState.from_factors([k], hyper)


def main():
    alpha = 4
    x = sample_images(size=None)["camera"]
    y = downsample(x, SamplingConfig(gaussian_kernel(3.5 / np.sqrt(2)), alpha))
    rng = np.random.default_rng(0)
    candidates = {
        "true gaussian": gaussian_kernel(3.5 / np.sqrt(2)),
        "bicubic": bicubic_kernel(alpha),
        "narrow gaussian": gaussian_kernel(0.8),
        "box 4": box_kernel(4),
        "random positive": Kernel(rng.random((9, 9)), (4, 4)).normalized(),
    }
    for eps in (1e-14, 1e-4):
        hyper = EstimationConfig(filter_eps=eps)
        print(f"filter eps {eps:g}")
        for name, k in candidates.items():
            terms = objective(as_state(k, hyper), y, alpha)
            fd = np.abs(denominator_spectrum(k, alpha, y.shape[-2:]))
            print(f"  {name:<16} fidelity {terms.fidelity:.3e}  min|F_denom| {fd.min():.2e}")


if __name__ == "__main__":
    main()
