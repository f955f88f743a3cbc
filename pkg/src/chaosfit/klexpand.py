"""Karhunen-Loeve expansion of a stationary process with exponential covariance.

For ``C(t1, t2) = sigma^2 exp(-mu |t1 - t2|)`` on ``[-T, T]`` the eigenpairs
are analytic: with ``x = T omega`` the odd-numbered frequencies solve
``mu - omega tan(T omega) = 0`` and the even-numbered ones
``omega + mu tan(T omega) = 0``; ``lambda = 2 sigma^2 mu / (omega^2 + mu^2)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize


@dataclass(frozen=True)
class ExpCovarianceSpec:
    sigma: float = 1.0
    mu: float = 50.0
    T: float = 0.02

    def __post_init__(self):
        if not (self.sigma > 0 and self.mu > 0 and self.T > 0):
            raise ValueError("sigma, mu and T must be positive")

    def covariance(self, t1, t2):
        return self.sigma**2 * np.exp(-self.mu * np.abs(np.asarray(t1) - np.asarray(t2)))


@dataclass(frozen=True)
class KlBasis:
    spec: ExpCovarianceSpec
    omegas: np.ndarray
    lambdas: np.ndarray
    odd: np.ndarray  # True for the cosine (odd-numbered) terms
    theta_std: float = 1.0 / np.sqrt(3.0)

    @property
    def count(self) -> int:
        return self.omegas.size

    def to_text(self) -> str:
        head = f"# sigma {float(self.spec.sigma)!r} mu {float(self.spec.mu)!r} T {float(self.spec.T)!r} theta_std {float(self.theta_std)!r}\n"
        rows = "".join(f"{float(w)!r} {float(lam)!r} {'odd' if o else 'even'}\n"
                       for w, lam, o in zip(self.omegas, self.lambdas, self.odd))
        return head + rows

    @classmethod
    def from_text(cls, text: str) -> "KlBasis":
        lines = text.splitlines()
        tok = lines[0].lstrip("#").split()
        meta = {tok[i]: float(tok[i + 1]) for i in range(0, len(tok), 2)}
        spec = ExpCovarianceSpec(meta["sigma"], meta["mu"], meta["T"])
        rows = [ln.split() for ln in lines[1:] if ln.strip()]
        omegas = np.array([float(r[0]) for r in rows])
        lambdas = np.array([float(r[1]) for r in rows])
        odd = np.array([r[2] == "odd" for r in rows], dtype=bool)
        return cls(spec, omegas, lambdas, odd, meta["theta_std"])

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "KlBasis":
        return cls.from_text(Path(path).read_text())


def solve_kl_frequencies(spec: ExpCovarianceSpec, count: int):
    """The ``count`` smallest positive eigen-frequencies and their parity.

    Term ``m`` (1-based) is odd/cosine for odd ``m``.  Its root in
    ``x = T omega`` lies in ``((m-1) pi/2, m pi/2)``; the equations are
    multiplied through by ``cos x`` so the bracket has no poles.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    c = spec.mu * spec.T
    omegas = np.empty(count)
    odd = np.empty(count, dtype=bool)
    for m in range(1, count + 1):
        lo, hi = (m - 1) * np.pi / 2, m * np.pi / 2
        if m % 2:
            f = lambda x: c * np.cos(x) - x * np.sin(x)  # noqa: E731
        else:
            f = lambda x: x * np.cos(x) + c * np.sin(x)  # noqa: E731
        x = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        omegas[m - 1] = x / spec.T
        odd[m - 1] = bool(m % 2)
    return omegas, odd


def kl_eigenvalue(spec: ExpCovarianceSpec, omega):
    return 2.0 * spec.sigma**2 * spec.mu / (np.asarray(omega) ** 2 + spec.mu**2)


def build_kl_basis(spec: ExpCovarianceSpec, count: int = 10, theta_std: float = 1.0 / np.sqrt(3.0)) -> KlBasis:
    omegas, odd = solve_kl_frequencies(spec, count)
    return KlBasis(spec, omegas, kl_eigenvalue(spec, omegas), odd, theta_std)


def frequency_residuals(spec: ExpCovarianceSpec, omegas, odd) -> np.ndarray:
    """Left-hand sides of the two transcendental equations at the roots."""
    omegas = np.asarray(omegas)
    tan = np.tan(spec.T * omegas)
    return np.where(odd, spec.mu - omegas * tan, omegas + spec.mu * tan)


def eval_kl_eigenfunction(spec: ExpCovarianceSpec, omega: float, odd: bool, t):
    """Normalized eigenfunction on ``[-T, T]``: cosine for odd terms, sine for even."""
    t = np.asarray(t, dtype=float)
    half = np.sin(2.0 * spec.T * omega) / (2.0 * omega)
    if odd:
        return np.cos(omega * t) / np.sqrt(spec.T + half)
    return np.sin(omega * t) / np.sqrt(spec.T - half)


def eigenfunctions(basis: KlBasis, t) -> np.ndarray:
    """(count,) + t.shape array of all eigenfunctions."""
    return np.stack([eval_kl_eigenfunction(basis.spec, w, o, t) for w, o in zip(basis.omegas, basis.odd)])


def kl_sample_path(basis: KlBasis, t, theta, mean: float = 0.0):
    """``mean + sum_i sqrt(lambda_i) / theta_std * g_i(t) * theta_i``.

    ``theta`` may be (count,) or (m, count); the result has shape
    ``t.shape`` or ``(m,) + t.shape``.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != basis.count:
        raise ValueError(f"theta has {theta.shape[-1]} entries, basis has {basis.count} terms")
    g = eigenfunctions(basis, t)  # (count, ...)
    amp = np.sqrt(basis.lambdas) / basis.theta_std
    return mean + np.tensordot(theta * amp, g, axes=([-1], [0]))


def reconstruct_covariance(basis: KlBasis, t1, t2, count: int | None = None):
    """Truncated Mercer sum over the first ``count`` terms."""
    k = basis.count if count is None else count
    if k == 0:
        return np.zeros(np.broadcast(np.asarray(t1), np.asarray(t2)).shape)
    total = 0.0
    for w, lam, o in zip(basis.omegas[:k], basis.lambdas[:k], basis.odd[:k]):
        total = total + lam * eval_kl_eigenfunction(basis.spec, w, o, t1) * eval_kl_eigenfunction(basis.spec, w, o, t2)
    return total
