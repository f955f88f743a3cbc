"""Seeded iid sampling of the input random vector and its joint density."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize, special, stats

from . import rng


class Distribution(enum.Enum):
    UNIFORM = "uniform"  # iid uniform on [-1, 1]
    NORMAL = "normal"  # iid standard normal


@dataclass(frozen=True)
class DistributionSpec:
    family: Distribution
    n: int

    @classmethod
    def parse(cls, family, n: int) -> "DistributionSpec":
        return cls(Distribution(family) if not isinstance(family, Distribution) else family, int(n))


@dataclass(frozen=True)
class SampleBatch:
    """A block of input samples with their joint density values.

    ``samples[j]`` is sample number ``start + j`` of the stream keyed by
    ``(seed, stream)``.
    """

    samples: np.ndarray
    seed: int
    pdf_values: np.ndarray
    start: int = 0
    stream: int = rng.STREAM_INPUTS

    def __len__(self):
        return self.samples.shape[0]

    def to_csv(self, path) -> None:
        path = Path(path)
        n = self.samples.shape[1]
        header = ",".join([f"theta_{i + 1}" for i in range(n)] + ["pdf"])
        data = np.column_stack([self.samples, self.pdf_values]) if len(self) else np.empty((0, n + 1))
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
        meta = {"seed": self.seed, "start": self.start, "stream": self.stream, "count": len(self)}
        path.with_suffix(path.suffix + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")

    @classmethod
    def from_csv(cls, path) -> "SampleBatch":
        path = Path(path)
        meta = json.loads(path.with_suffix(path.suffix + ".meta.json").read_text())
        header = path.read_text().splitlines()[0].split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2).reshape(-1, len(header))
        return cls(data[:, :-1], meta["seed"], data[:, -1], meta["start"], meta["stream"])


def _transform(family: Distribution, u: np.ndarray) -> np.ndarray:
    if family is Distribution.UNIFORM:
        return 2.0 * u - 1.0
    if family is Distribution.NORMAL:
        return special.ndtri(u)
    raise NotImplementedError(family)


def draw_samples(spec: DistributionSpec, count: int, seed: int, start: int = 0,
                 stream: int = rng.STREAM_INPUTS) -> SampleBatch:
    """Draw samples ``start .. start+count-1`` of the keyed input stream."""
    if count < 0:
        raise ValueError("count must be non-negative")
    u = rng.uniform_rows(seed, start, start + count, spec.n, stream=stream)
    theta = _transform(spec.family, u)
    return SampleBatch(theta, int(seed), joint_pdf(spec, theta), int(start), int(stream))


def joint_pdf(spec: DistributionSpec, theta):
    """Product of the marginal densities; zero outside the uniform support."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != spec.n:
        raise ValueError(f"theta has dimension {theta.shape[-1]}, expected {spec.n}")
    if spec.family is Distribution.UNIFORM:
        inside = np.all(np.abs(theta) <= 1.0, axis=-1)
        out = np.where(inside, 0.5 ** spec.n, 0.0)
    elif spec.family is Distribution.NORMAL:
        out = np.exp(-0.5 * np.sum(theta**2, axis=-1) - 0.5 * spec.n * np.log(2 * np.pi))
    else:
        raise NotImplementedError(spec.family)
    return float(out) if np.ndim(out) == 0 else out


def inverse_transform(target_cdf, z, lo: float = -1.0, hi: float = 1.0, xtol: float = 1e-13):
    """Map a standard normal draw to a target law: ``F^{-1}(Phi(z))``.

    ``target_cdf`` must be increasing.  The root bracket starts at
    ``[lo, hi]`` and is widened geometrically until it straddles the target
    probability.
    """
    p = stats.norm.cdf(z)

    def invert(prob):
        a, b = lo, hi
        for _ in range(200):
            fa, fb = target_cdf(a) - prob, target_cdf(b) - prob
            if fa <= 0 <= fb:
                if fa == 0:
                    return a
                if fb == 0:
                    return b
                return optimize.brentq(lambda x: target_cdf(x) - prob, a, b, xtol=xtol)
            width = b - a
            if fa > 0:
                a -= width
            if fb < 0:
                b += width
        raise ValueError(f"could not bracket the quantile for probability {prob}")

    if np.ndim(p) == 0:
        return invert(float(p))
    return np.vectorize(invert)(p)
