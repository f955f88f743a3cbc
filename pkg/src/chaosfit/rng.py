"""Keyed, schedule-independent random streams.

Input samples come from numpy's Philox4x64-10 counter-based generator: the
key is ``(seed, stream)`` and sample ``r`` owns a fixed range of counter
blocks, so any partition of the sample range reproduces the same values.

Reaction firing streams for the SSA are evaluated inside numba kernels, where
Philox is not available; there each stream is a SplitMix64 hash of
``stream_key + (k + 1) * golden_gamma`` for firing number ``k``.  Stream keys
are derived from ``(global_seed, realization, reaction)`` with
``numpy.random.SeedSequence``.
"""
from __future__ import annotations

import numba as nb
import numpy as np

_TWO_M53 = 1.0 / 9007199254740992.0
GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)

# stream ids (second Philox key word)
STREAM_INPUTS = 0
STREAM_CONSTRAINTS = 1
STREAM_VALIDATION = 2
STREAM_SURROGATE_MC = 3


def _blocks(seed: int, stream: int, start_block: int, n_blocks: int) -> np.ndarray:
    bitgen = np.random.Philox(key=[int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream)], counter=int(start_block))
    return bitgen.random_raw(4 * n_blocks)


def uniform_rows(seed: int, start: int, stop: int, width: int, stream: int = STREAM_INPUTS) -> np.ndarray:
    """Uniforms on the open interval (0, 1) for rows ``start..stop-1``.

    Row ``r`` is a pure function of ``(seed, stream, r)``.
    """
    if stop < start:
        raise ValueError("stop < start")
    per_row = -(-width // 4) if width else 0
    count = stop - start
    if count == 0 or width == 0:
        return np.empty((count, width))
    raw = _blocks(seed, stream, start * per_row, count * per_row).reshape(count, 4 * per_row)[:, :width]
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def derive_seed(*keys: int) -> int:
    """Hash an ordered tuple of non-negative integers into a 64-bit seed."""
    ss = np.random.SeedSequence(int(keys[0]), spawn_key=tuple(int(k) for k in keys[1:]))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def stream_keys(global_seed: int, realizations, n_reactions: int) -> np.ndarray:
    """(len(realizations), n_reactions) array of uint64 stream keys."""
    realizations = np.asarray(realizations, dtype=np.int64)
    keys = np.empty((realizations.size, n_reactions), dtype=np.uint64)
    for i, r in enumerate(realizations):
        ss = np.random.SeedSequence(int(global_seed), spawn_key=(int(r),))
        keys[i] = ss.generate_state(n_reactions, dtype=np.uint64)
    return keys


@nb.njit(cache=True)
def splitmix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def stream_uniform(key, k):
    """k-th uniform in (0, 1) of the stream identified by ``key``."""
    x = splitmix64(key + np.uint64(k + 1) * GOLDEN_GAMMA)
    return (np.float64(x >> np.uint64(11)) + 0.5) * _TWO_M53


@nb.njit(cache=True)
def stream_exponential(key, k):
    """k-th unit-rate exponential of the stream identified by ``key``."""
    return -np.log(stream_uniform(key, k))
