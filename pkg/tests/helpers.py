"""Shared random-problem generators for the test suite."""

import numpy as np

from alignlab import NoiseProfile, build_spectrum, random_init

DIMS = (10, 50, 200)


def random_problem(rng, d=None, degenerate_blocks=False, isotropic_only=False, dominant_noise_only=False):
    """Random (spectrum, noise, state) triple with both blocks active.

    degenerate_blocks collapses each block to a single eigenvalue (all dominant
    modes equal lambda_k, all bulk modes equal lambda_{k+1}); dominant_noise_only
    zeroes the bulk noise variances (noise concentrated in the high-curvature
    directions).
    """
    if d is None:
        d = int(rng.choice(DIMS))
    k = int(rng.integers(1, d))
    m = float(np.exp(rng.uniform(np.log(1.5), np.log(300.0))))
    lo = float(rng.uniform(0.2, 1.0))
    if degenerate_blocks:
        bulk_range = (lo, lo)
        top_spread = 0.0
    else:
        bulk_range = (lo, lo * (1.0 + float(rng.uniform(0.0, 1.0))))
        top_spread = float(rng.uniform(0.0, 1.0))
    spec = build_spectrum(d, k, m, bulk_range, top_spread, seed=int(rng.integers(2**63)))
    if isotropic_only or rng.random() < 0.5:
        sigma2 = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
        kappa2 = np.full(d, sigma2)
    else:
        kappa2 = np.exp(rng.normal(0.0, 1.0, d))
    if dominant_noise_only:
        kappa2 = kappa2.copy()
        kappa2[k:] = 0.0
    noise = NoiseProfile(kappa2=kappa2)
    scale = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
    state = random_init(d, scale, seed=int(rng.integers(2**63)))
    return spec, noise, state
