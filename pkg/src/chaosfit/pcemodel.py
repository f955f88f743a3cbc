"""Fitted polynomial chaos surrogate: evaluation, moments, sampling, summaries."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .basis import BasisFamily, MultiIndexSet, enumerate_multi_indices, evaluate_basis, norms_sq
from .sampling import Distribution, DistributionSpec, draw_samples

_HEADER = "# pce"


@dataclass(frozen=True)
class PceModel:
    """Expansion ``v(theta) = sum_k a_k Phi_k(theta)`` over a graded index set.

    ``norms_sq`` defaults to the exact ``E[Phi_k^2]`` of the family.
    """

    index_set: MultiIndexSet
    family: BasisFamily
    coefficients: np.ndarray
    norms_sq: np.ndarray | None = None

    def __post_init__(self):
        a = np.array(self.coefficients, dtype=float).reshape(-1)
        if a.size != len(self.index_set):
            raise ValueError(f"{a.size} coefficients for {len(self.index_set)} terms")
        a.setflags(write=False)
        object.__setattr__(self, "coefficients", a)
        nrm = norms_sq(self.index_set, self.family) if self.norms_sq is None else np.asarray(self.norms_sq, float)
        if nrm.shape != a.shape:
            raise ValueError("norms_sq must match the number of terms")
        object.__setattr__(self, "norms_sq", nrm)

    @property
    def n(self) -> int:
        return self.index_set.n

    @property
    def distribution(self) -> DistributionSpec:
        return DistributionSpec(Distribution(self.family.distribution), self.n)

    def evaluate(self, theta):
        """Surrogate value at one point (scalar) or at each row of ``theta``."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.n:
            raise ValueError(f"theta has dimension {theta.shape[-1]}, expected {self.n}")
        vals = self._combine(evaluate_basis(self.index_set, self.family, np.atleast_2d(theta)))
        return float(vals[0]) if theta.ndim == 1 else vals

    def _combine(self, phi):
        # per-row reduction: unlike a BLAS matvec, each row's rounding does
        # not depend on how many rows are evaluated together
        return (phi * self.coefficients).sum(axis=1)

    def mean(self) -> float:
        """Expected value: the constant coefficient, by orthogonality."""
        return float(self.coefficients[0])

    def variance(self) -> float:
        """Exact variance ``sum_{k>=1} a_k^2 E[Phi_k^2]``."""
        a = self.coefficients[1:]
        return float(np.dot(a * a, self.norms_sq[1:]))

    def mc_over_pce(self, count: int, seed: int, chunk: int = 65536,
                    stream: int = rng.STREAM_SURROGATE_MC) -> np.ndarray:
        """Evaluate the surrogate at ``count`` keyed input draws.

        Chunks use disjoint counter ranges, so the output does not depend on
        ``chunk``.
        """
        if count < 0:
            raise ValueError("count must be non-negative")
        out = np.empty(count)
        spec = self.distribution
        for start in range(0, count, chunk):
            stop = min(start + chunk, count)
            theta = draw_samples(spec, stop - start, seed, start=start, stream=stream).samples
            out[start:stop] = self._combine(evaluate_basis(self.index_set, self.family, theta))
        return out

    def to_text(self) -> str:
        lines = [f"{_HEADER} n={self.n} max_degree={self.index_set.max_degree} family={self.family.value}"]
        for alpha, c in zip(self.index_set, self.coefficients):
            lines.append(" ".join(str(int(d)) for d in alpha) + " " + repr(float(c)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PceModel":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith(_HEADER):
            raise ValueError("missing pce header line")
        fields = dict(tok.split("=", 1) for tok in lines[0][len(_HEADER):].split())
        n, deg = int(fields["n"]), int(fields["max_degree"])
        index_set = enumerate_multi_indices(n, deg)
        rows = [ln.split() for ln in lines[1:]]
        if len(rows) != len(index_set):
            raise ValueError(f"expected {len(index_set)} coefficient lines, got {len(rows)}")
        alphas = np.array([[int(t) for t in r[:n]] for r in rows], dtype=np.int64)
        if not np.array_equal(alphas, index_set.indices):
            raise ValueError("coefficient lines are not in graded order")
        coef = np.array([float(r[n]) for r in rows])
        return cls(index_set, BasisFamily(fields["family"]), coef)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "PceModel":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class EmpiricalStats:
    quartiles: np.ndarray  # 25/50/75 %
    density: np.ndarray
    edges: np.ndarray
    mean: float
    variance: float

    def to_dict(self) -> dict:
        return {"q25": float(self.quartiles[0]), "median": float(self.quartiles[1]),
                "q75": float(self.quartiles[2]), "mean": self.mean, "variance": self.variance}


def quartiles(samples) -> np.ndarray:
    """25/50/75 % quantiles by linear interpolation of order statistics."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("quartiles need at least one sample")
    return np.quantile(x, [0.25, 0.5, 0.75], method="linear")


def histogram(samples, bins: int = 100):
    """Density histogram over equal-width bins spanning the sample range."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        return np.zeros(bins), np.linspace(0.0, 1.0, bins + 1)
    lo, hi = x.min(), x.max()
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    density, edges = np.histogram(x, bins=bins, range=(lo, hi), density=True)
    return density, edges


def empirical_stats(samples, bins: int = 100) -> EmpiricalStats:
    x = np.asarray(samples, dtype=float).reshape(-1)
    q = quartiles(x)
    density, edges = histogram(x, bins)
    return EmpiricalStats(q, density, edges, float(x.mean()), float(x.var(ddof=1)) if x.size > 1 else 0.0)
