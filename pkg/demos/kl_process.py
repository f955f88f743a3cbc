"""Karhunen-Loeve expansion of an exponentially correlated process.

Solves for the first eigen-frequencies, shows how the covariance error shrinks
with the number of retained terms, and draws a few sample paths.

    python3 demos/kl_process.py
"""
import numpy as np

from chaosfit.klexpand import ExpCovarianceSpec, build_kl_basis, kl_sample_path, reconstruct_covariance
from chaosfit.sampling import Distribution, DistributionSpec, draw_samples


def main():
    spec = ExpCovarianceSpec(sigma=1.0, mu=50.0, T=0.02)
    basis = build_kl_basis(spec, 10)
    print(f"{'k':>2} {'omega':>10} {'lambda':>10} parity")
    for k, (w, lam, odd) in enumerate(zip(basis.omegas, basis.lambdas, basis.odd), 1):
        print(f"{k:2d} {w:10.4f} {lam:10.3e} {'odd' if odd else 'even'}")

    g = np.linspace(-spec.T, spec.T, 50)
    t1, t2 = np.meshgrid(g, g, indexing="ij")
    exact = spec.covariance(t1, t2)
    print("\nterms  max covariance error")
    for k in range(2, 11, 2):
        print(f"{k:5d}  {np.max(np.abs(reconstruct_covariance(basis, t1, t2, k) - exact)):.4f}")

    theta = draw_samples(DistributionSpec(Distribution.UNIFORM, 10), 3, seed=0).samples
    paths = kl_sample_path(basis, g, theta)
    print("\nsample paths at t = -T, 0, T:")
    for p in np.atleast_2d(paths):
        print("  " + "  ".join(f"{v:+.3f}" for v in p[[0, 24, -1]]))


if __name__ == "__main__":
    main()
