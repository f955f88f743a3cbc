"""A model whose output is a known expansion, for closed-loop checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..basis import BasisFamily, enumerate_multi_indices, evaluate_basis

VARIABLES = ("v",)


@dataclass(frozen=True)
class SyntheticConfig:
    """``v(theta) = sum_k a_k Phi_k(theta)`` with a sparse, seeded ``a``.

    ``n_instants`` copies of the expansion are emitted, instant ``j`` scaled
    by ``1 + j / n_instants``; ``noise`` adds keyed Gaussian noise.
    """

    n: int = 4
    max_degree: int = 2
    family: str = "legendre"
    n_nonzero: int = 5
    coef_seed: int = 0
    n_instants: int = 1
    noise: float = 0.0

    @property
    def basis_family(self) -> BasisFamily:
        return BasisFamily(self.family)

    def coefficients(self) -> np.ndarray:
        idx = enumerate_multi_indices(self.n, self.max_degree)
        rs = np.random.default_rng(self.coef_seed)
        a = np.zeros(len(idx))
        # constant term always present, the rest on low-order terms
        a[0] = rs.uniform(1.0, 2.0)
        k = min(self.n_nonzero - 1, len(idx) - 1)
        pos = rs.choice(np.arange(1, len(idx)), size=k, replace=False)
        a[pos] = rs.choice([-1.0, 1.0], size=k) * rs.uniform(0.5, 1.5, size=k)
        return a


def simulate_synthetic(config: SyntheticConfig, theta) -> dict:
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if theta.shape[1] != config.n:
        raise ValueError(f"synthetic model takes {config.n} inputs, got {theta.shape[1]}")
    idx = enumerate_multi_indices(config.n, config.max_degree)
    base = evaluate_basis(idx, config.basis_family, theta) @ config.coefficients()
    scales = 1.0 + np.arange(config.n_instants) / config.n_instants
    out = base[:, None] * scales
    if config.noise:
        # noise keyed by the input values, so equal inputs give equal outputs
        seeds = np.abs(np.round(theta * 1e9)).astype(np.int64).sum(axis=1)
        out = out + config.noise * np.stack([np.random.default_rng(s).standard_normal(config.n_instants)
                                             for s in seeds]).reshape(out.shape)
    return {"v": out}
