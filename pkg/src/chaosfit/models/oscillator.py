"""Genetic oscillator simulated by SSA with common reaction paths.

Species ``[A, R, P_A, P_R, P_AA, P_RA, mRNA_A, mRNA_R, A_R]``, sixteen
reactions, sixteen uniform parameters ``c_i = (1 + 0.1 theta_i) cbar_i``.
Every reaction owns a unit-exponential firing stream fixed by its
``(realization, reaction)`` key, so two parameter vectors run with the same
keys see identical internal noise (modified next reaction method).
"""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from ..rng import stream_exponential, stream_keys

N_INPUTS = 16
N_REACTIONS = 16
SPECIES = ("A", "R", "P_A", "P_R", "P_AA", "P_RA", "mRNA_A", "mRNA_R", "A_R")
VARIABLES = ("A_mean", "A_var")

NOMINAL = (50.0, 0.01, 50.0, 5.0, 20.0, 1.0, 50.0, 1.0, 100.0, 1.0, 0.2, 10.0, 0.5, 1.0, 10.0, 5000.0)
STATE0 = (0, 177, 1, 1, 0, 0, 4, 0, 279)


def _stoichiometry() -> np.ndarray:
    ix = {s: i for i, s in enumerate(SPECIES)}
    changes = [
        {"mRNA_A": 1},                          # P_A -> P_A + mRNA_A
        {"mRNA_A": 1},                          # P_AA -> P_AA + mRNA_A
        {"mRNA_R": 1},                          # P_R -> P_R + mRNA_R
        {"mRNA_R": 1},                          # P_RA -> P_RA + mRNA_R
        {"A": 1},                               # mRNA_A -> mRNA_A + A
        {"R": 1},                               # mRNA_R -> mRNA_R + R
        {"A": -1, "R": -1, "A_R": 1},           # A + R -> A_R
        {"P_A": -1, "A": -1, "P_AA": 1},        # P_A + A -> P_AA
        {"P_AA": -1, "P_A": 1, "A": 1},         # P_AA -> P_A + A
        {"P_R": -1, "A": -1, "P_RA": 1},        # P_R + A -> P_RA
        {"P_RA": -1, "P_R": 1, "A": 1},         # P_RA -> P_R + A
        {"A": -1},                              # A -> 0
        {"R": -1},                              # R -> 0
        {"mRNA_A": -1},                         # mRNA_A -> 0
        {"mRNA_R": -1},                         # mRNA_R -> 0
        {"A_R": -1, "R": 1},                    # A_R -> R (A degraded in complex)
    ]
    S = np.zeros((N_REACTIONS, len(SPECIES)), dtype=np.int64)
    for j, ch in enumerate(changes):
        for name, d in ch.items():
            S[j, ix[name]] = d
    return S


STOICHIOMETRY = _stoichiometry()


@dataclass(frozen=True)
class OscillatorConfig:
    nominal: tuple = NOMINAL
    x0: tuple = STATE0
    horizon: float = 50.0
    sample_dt: float = 5.0
    reps: int = 1000
    spread: float = 0.1
    global_seed: int = 2012

    @property
    def output_times(self) -> np.ndarray:
        return self.sample_dt * np.arange(1, int(round(self.horizon / self.sample_dt)) + 1)

    def parameters(self, theta) -> np.ndarray:
        theta = np.atleast_2d(theta)
        return (1.0 + self.spread * theta) * np.asarray(self.nominal)

    def keys(self) -> np.ndarray:
        return stream_keys(self.global_seed, np.arange(self.reps), N_REACTIONS)


@nb.njit(cache=True)
def propensities(x, c, a):
    """Fill ``a`` with the sixteen propensities for state ``x``."""
    A, R, PA, PR, PAA, PRA, mA, mR, AR = x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8]
    a[0] = c[0] * PA
    a[1] = c[14] * c[0] * PAA
    a[2] = c[1] * PR
    a[3] = c[15] * c[1] * PRA
    a[4] = c[2] * mA
    a[5] = c[3] * mR
    a[6] = c[4] * A * R
    a[7] = c[5] * PA * A
    a[8] = c[6] * PAA
    a[9] = c[7] * PR * A
    a[10] = c[8] * PRA
    a[11] = c[9] * A
    a[12] = c[10] * R
    a[13] = c[11] * mA
    a[14] = c[12] * mR
    a[15] = c[13] * AR


@nb.njit(cache=True)
def next_reaction(a, internal, next_fire):
    """Index and waiting time of the reaction whose clock fires first (-1, inf if none)."""
    best, dt = -1, np.inf
    for j in range(a.size):
        if a[j] > 0.0:
            d = (next_fire[j] - internal[j]) / a[j]
            if d < dt:
                dt, best = d, j
    return best, dt


@nb.njit(cache=True)
def _run(c, x0, S, keys, t_out, out, counts):
    """One realization; writes A at each output time into ``out``, returns the final state."""
    n_r = S.shape[0]
    x = x0.copy()
    a = np.empty(n_r)
    internal = np.zeros(n_r)
    next_fire = np.empty(n_r)
    for j in range(n_r):
        counts[j] = 0
        next_fire[j] = stream_exponential(keys[j], 0)
    propensities(x, c, a)
    t = 0.0
    k = 0
    while k < t_out.size:
        mu, dt = next_reaction(a, internal, next_fire)
        # mu = -1 gives dt = inf: the system idles to the horizon
        t_next = t + dt
        while k < t_out.size and t_out[k] < t_next:
            out[k] = x[0]
            k += 1
        if k >= t_out.size:
            break
        for j in range(n_r):
            internal[j] += a[j] * dt
        t = t_next
        for s in range(x.size):
            x[s] += S[mu, s]
        counts[mu] += 1
        next_fire[mu] += stream_exponential(keys[mu], counts[mu])
        propensities(x, c, a)
    return x


@nb.njit(cache=True)
def _run_many(c, x0, S, keys, t_out, out):
    counts = np.zeros(S.shape[0], dtype=np.int64)
    for r in range(keys.shape[0]):
        _run(c, x0, S, keys[r], t_out, out[r], counts)


def ssa_realizations(config: OscillatorConfig, params, keys=None) -> np.ndarray:
    """A at each output time for every realization; shape (reps, n_times)."""
    keys = config.keys() if keys is None else keys
    t_out = config.output_times
    out = np.empty((keys.shape[0], t_out.size))
    _run_many(np.asarray(params, dtype=float), np.asarray(config.x0, dtype=np.int64),
              STOICHIOMETRY, keys, t_out, out)
    return out


def ssa_trajectory(config: OscillatorConfig, params, keys_row, t_out):
    """Single realization with firing counters; returns (A at t_out, counts, final state)."""
    out = np.empty(len(t_out))
    counts = np.zeros(N_REACTIONS, dtype=np.int64)
    final = _run(np.asarray(params, dtype=float), np.asarray(config.x0, dtype=np.int64), STOICHIOMETRY,
                 np.asarray(keys_row, dtype=np.uint64), np.asarray(t_out, dtype=float), out, counts)
    return out, counts, final


def ssa_step(state, params, internal, next_fire):
    """One modified-next-reaction step.

    Returns ``(reaction, dt, new_state, new_internal)``; reaction is -1 and
    ``dt`` infinite when every propensity is zero.  The caller owns the
    firing streams and must advance ``next_fire[reaction]``.
    """
    state = np.asarray(state, dtype=np.int64)
    a = np.empty(N_REACTIONS)
    propensities(state, np.asarray(params, dtype=float), a)
    mu, dt = next_reaction(a, np.asarray(internal, dtype=float), np.asarray(next_fire, dtype=float))
    if mu < 0:
        return -1, np.inf, state.copy(), np.asarray(internal, dtype=float).copy()
    return mu, dt, state + STOICHIOMETRY[mu], np.asarray(internal, dtype=float) + a * dt


def simulate_oscillator(config: OscillatorConfig, theta, keys=None) -> dict:
    """Across-realization mean and variance of A at each output time.

    ``theta`` is (16,) or (m, 16); returns ``{"A_mean": (m, T), "A_var": (m, T)}``.
    The same stream keys are used for every row (common reaction paths).
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if theta.shape[1] != N_INPUTS:
        raise ValueError(f"oscillator model takes {N_INPUTS} inputs, got {theta.shape[1]}")
    keys = config.keys() if keys is None else keys
    params = config.parameters(theta)
    n_t = config.output_times.size
    mean = np.empty((theta.shape[0], n_t))
    var = np.empty((theta.shape[0], n_t))
    for i, c in enumerate(params):
        runs = ssa_realizations(config, c, keys)
        mean[i] = runs.mean(axis=0)
        var[i] = runs.var(axis=0)
    return {"A_mean": mean, "A_var": var}
