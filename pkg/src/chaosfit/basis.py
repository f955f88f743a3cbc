"""Orthogonal polynomial bases for polynomial chaos expansions.

Univariate Legendre/Hermite evaluation by three-term recursion, total-degree
multi-index enumeration, multivariate evaluation and design-matrix assembly.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

INT64_MAX = np.iinfo(np.int64).max


class BasisFamily(enum.Enum):
    """Polynomial family, each paired with one input distribution."""

    LEGENDRE = "legendre"  # uniform on [-1, 1]
    HERMITE = "hermite"  # standard normal, probabilists' convention

    @property
    def distribution(self) -> str:
        return {"legendre": "uniform", "hermite": "normal"}[self.value]

    @classmethod
    def for_distribution(cls, name: str) -> "BasisFamily":
        pairs = {"uniform": cls.LEGENDRE, "normal": cls.HERMITE}
        try:
            return pairs[name]
        except KeyError:
            raise ValueError(f"no polynomial family paired with {name!r}") from None


def count_terms(n: int, max_degree: int) -> int:
    """Number of multi-indices in ``n`` variables with total degree <= ``max_degree``.

    Computes ``(n + max_degree)! / (n! max_degree!)`` by the incremental
    update ``C(n+j, j) = C(n+j-1, j-1) * (n+j) / j``, which stays exact at
    every step.

    Raises
    ------
    OverflowError
        If the count does not fit in a signed 64-bit integer.
    """
    if n < 1 or max_degree < 0:
        raise ValueError(f"need n >= 1 and max_degree >= 0, got {n}, {max_degree}")
    total = 1
    for j in range(1, max_degree + 1):
        total = total * (n + j) // j
        if total > INT64_MAX:
            raise OverflowError(f"term count for n={n}, degree={max_degree} exceeds int64")
    return total


def _degree_block(n: int, degree: int) -> list[tuple[int, ...]]:
    # Compositions of `degree` into n parts; pure powers first, then by number
    # of active variables, reverse-lexicographic inside each group.
    block = []
    for cut in itertools.combinations_with_replacement(range(n), degree):
        alpha = [0] * n
        for i in cut:
            alpha[i] += 1
        block.append(tuple(alpha))
    block.sort(key=lambda a: (sum(1 for x in a if x), tuple(-x for x in a)))
    return block


@dataclass(frozen=True)
class MultiIndexSet:
    """Graded list of exponent vectors, one row per basis polynomial.

    Attributes
    ----------
    n : int
        Number of input variables.
    max_degree : int
        Largest total degree in the set.
    indices : ndarray of int, shape (L, n)
        Exponent vectors in graded order; row 0 is all zeros.
    """

    n: int
    max_degree: int
    indices: np.ndarray = field(repr=False)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1, self.n)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return self.indices.shape[0]

    def __iter__(self):
        return iter(self.indices)

    @property
    def degrees(self) -> np.ndarray:
        """Total degree of each multi-index."""
        return self.indices.sum(axis=1)

    def to_text(self) -> str:
        return "".join(" ".join(str(int(e)) for e in row) + "\n" for row in self.indices)

    @classmethod
    def from_text(cls, text: str) -> "MultiIndexSet":
        rows = [[int(tok) for tok in line.split()] for line in text.splitlines() if line.strip()]
        if not rows:
            raise ValueError("empty multi-index file")
        arr = np.array(rows, dtype=np.int64)
        degrees = arr.sum(axis=1)
        if np.any(np.diff(degrees) < 0):
            raise ValueError("multi-indices are not in graded order")
        return cls(arr.shape[1], int(degrees.max()), arr)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "MultiIndexSet":
        return cls.from_text(Path(path).read_text())


def enumerate_multi_indices(n: int, max_degree: int) -> MultiIndexSet:
    """All multi-indices of total degree <= ``max_degree`` in graded order.

    Within one total degree the pure powers come first (variable order),
    followed by the mixed terms; each group is reverse-lexicographic.
    For ``n=3, max_degree=2`` this reproduces the familiar ten-term table
    ``[0,0,0], [1,0,0], [0,1,0], [0,0,1], [2,0,0], ..., [1,1,0], [1,0,1], [0,1,1]``.
    """
    count = count_terms(n, max_degree)
    rows: list[tuple[int, ...]] = []
    for degree in range(max_degree + 1):
        rows.extend(_degree_block(n, degree))
    assert len(rows) == count
    return MultiIndexSet(n, max_degree, np.array(rows, dtype=np.int64).reshape(count, n))


def univariate_table(family: BasisFamily, max_degree: int, x) -> np.ndarray:
    """Values of degrees ``0..max_degree`` at ``x``; new trailing axis indexes degree."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (max_degree + 1,))
    out[..., 0] = 1.0
    if max_degree >= 1:
        out[..., 1] = x
    for d in range(1, max_degree):
        if family is BasisFamily.LEGENDRE:
            out[..., d + 1] = ((2 * d + 1) * x * out[..., d] - d * out[..., d - 1]) / (d + 1)
        elif family is BasisFamily.HERMITE:
            out[..., d + 1] = x * out[..., d] - d * out[..., d - 1]
        else:
            raise NotImplementedError(family)
    return out


def eval_univariate(family: BasisFamily, degree: int, x):
    """Evaluate one univariate basis polynomial by its three-term recursion."""
    if degree < 0:
        raise ValueError("degree must be non-negative")
    val = univariate_table(family, degree, x)[..., degree]
    return float(val) if val.ndim == 0 else val


def eval_multivariate(alpha, family: BasisFamily, theta):
    """Product of univariate polynomials ``prod_i P_{alpha_i}(theta_i)``."""
    alpha = np.asarray(alpha, dtype=np.int64)
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != alpha.size:
        raise ValueError(f"theta has dimension {theta.shape[-1]}, multi-index has {alpha.size}")
    table = univariate_table(family, int(alpha.max(initial=0)), theta)
    vals = np.take_along_axis(table, np.broadcast_to(alpha[:, None], theta.shape + (1,)), axis=-1)
    out = np.prod(vals[..., 0], axis=-1)
    return float(out) if out.ndim == 0 else out


def norm_sq(alpha, family: BasisFamily) -> float:
    """``E[Phi_alpha(theta)^2]`` under the family's paired distribution."""
    alpha = np.asarray(alpha, dtype=np.int64)
    if family is BasisFamily.LEGENDRE:
        return float(np.prod(1.0 / (2 * alpha + 1)))
    if family is BasisFamily.HERMITE:
        return float(np.prod([math.factorial(int(a)) for a in alpha]))
    raise NotImplementedError(family)


def norms_sq(index_set: MultiIndexSet, family: BasisFamily) -> np.ndarray:
    return np.array([norm_sq(alpha, family) for alpha in index_set.indices])


def _sparse_layout(index_set: MultiIndexSet):
    # Each multi-index has at most max_degree active variables; pad with
    # (variable 0, degree 0) which evaluates to 1.
    width = max(index_set.max_degree, 1)
    pos = np.zeros((len(index_set), width), dtype=np.int64)
    deg = np.zeros((len(index_set), width), dtype=np.int64)
    for k, alpha in enumerate(index_set.indices):
        nz = np.flatnonzero(alpha)
        pos[k, : nz.size] = nz
        deg[k, : nz.size] = alpha[nz]
    return pos, deg


def evaluate_basis(index_set: MultiIndexSet, family: BasisFamily, samples, chunk: int = 8192) -> np.ndarray:
    """Rows ``Phi(theta_r)`` for a (m, n) array of samples; returns (m, L)."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples.reshape(1, -1) if samples.size else samples.reshape(0, index_set.n)
    if samples.shape[1] != index_set.n:
        raise ValueError(f"samples have dimension {samples.shape[1]}, basis expects {index_set.n}")
    pos, deg = _sparse_layout(index_set)
    out = np.empty((samples.shape[0], len(index_set)))
    for start in range(0, samples.shape[0], chunk):
        block = samples[start : start + chunk]
        table = univariate_table(family, index_set.max_degree, block)  # (m, n, d+1)
        vals = table[:, pos, deg]  # (m, L, width)
        out[start : start + chunk] = vals.prod(axis=2)
    return out


@dataclass(frozen=True)
class DesignMatrix:
    """Basis evaluations at the sampled inputs plus the column norms."""

    matrix: np.ndarray
    norms_sq: np.ndarray

    @property
    def shape(self):
        return self.matrix.shape


def build_design_matrix(samples, index_set: MultiIndexSet, family: BasisFamily) -> DesignMatrix:
    """Assemble the (nu, L) matrix whose row r is ``Phi(theta_r)``."""
    return DesignMatrix(evaluate_basis(index_set, family, samples), norms_sq(index_set, family))
