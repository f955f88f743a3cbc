"""Series RLC circuit with current- and voltage-dependent L and C.

State ``(i_L, v_C)`` obeys

    di_L/dt = (u - v_C - R i_L) / L(i_L)
    dv_C/dt = (i_L - i_D(t)) / C(v_C)

with ``L(i) = 0.5 Lbar (1 + exp(a1 i^2))``, ``C(v) = 0.5 Cbar (1 + exp(a2 v^2))``
and a device current ``i_D`` made of a known sinusoid plus a scaled
Karhunen-Loeve path.  Input layout: theta[0] -> R, theta[1] -> Lbar,
theta[2] -> Cbar, theta[3:13] -> KL variables, all uniform on [-1, 1].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..klexpand import ExpCovarianceSpec, KlBasis, build_kl_basis, eigenfunctions
from . import SimulationError

N_INPUTS = 13
VARIABLES = ("i_L", "v_C")


@dataclass(frozen=True)
class RlcConfig:
    R0: float = 3.5
    L0: float = 1e-3
    C0: float = 1e-4
    R_spread: float = 0.3
    L_spread: float = 0.2
    C_spread: float = 0.2
    a1: float = -0.5e8
    a2: float = -0.5e6
    a3: float = 1e-2
    a4: float = 5e-3
    a5: float = 1e-2
    u: float = 1e-2
    T: float = 0.02
    Ts: float = 2e-3
    n_outputs: int = 10
    steps_per_sample: int = 400
    iL0: float = 0.0
    vC0: float = 1e-2
    kl: KlBasis = field(default_factory=lambda: build_kl_basis(ExpCovarianceSpec(1.0, 50.0, 0.02), 10))

    @property
    def step(self) -> float:
        return self.Ts / self.steps_per_sample

    @property
    def output_times(self) -> np.ndarray:
        return self.Ts * np.arange(1, self.n_outputs + 1)

    def parameters(self, theta):
        """R, Lbar, Cbar for each row of ``theta``."""
        theta = np.atleast_2d(theta)
        return (self.R0 * (1 + self.R_spread * theta[:, 0]),
                self.L0 * (1 + self.L_spread * theta[:, 1]),
                self.C0 * (1 + self.C_spread * theta[:, 2]))


def device_current(config: RlcConfig, t, theta):
    """``i_D(t)`` for each row of ``theta``; shape (m, len(t))."""
    theta = np.atleast_2d(theta)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    amp = np.sqrt(config.kl.lambdas) / config.kl.theta_std
    path = (theta[:, 3:3 + config.kl.count] * amp) @ eigenfunctions(config.kl, t)
    return config.a4 * np.sin(2 * np.pi * t / config.a5) + config.a3 * path


def simulate_rlc(config: RlcConfig, theta, on_error: str = "raise") -> dict:
    """Integrate with fixed-step RK4 and sample ``i_L``, ``v_C`` at ``i * Ts``.

    ``theta`` is (13,) or (m, 13).  Returns ``{"i_L": (m, 10), "v_C": (m, 10)}``.
    A non-finite state raises :class:`SimulationError`, or with
    ``on_error="mask"`` leaves that sample's outputs NaN.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if theta.shape[1] != N_INPUTS:
        raise ValueError(f"RLC model takes {N_INPUTS} inputs, got {theta.shape[1]}")
    m = theta.shape[0]
    R, Lbar, Cbar = config.parameters(theta)
    h = config.step
    n_steps = config.steps_per_sample * config.n_outputs

    # i_D only enters through time, so tabulate it at every RK4 stage time
    stage_t = np.arange(2 * n_steps + 1) * (h / 2)
    i_dev = device_current(config, stage_t, theta)  # (m, 2 n_steps + 1)

    def rhs(iL, vC, iD):
        L = 0.5 * Lbar * (1.0 + np.exp(config.a1 * iL * iL))
        C = 0.5 * Cbar * (1.0 + np.exp(config.a2 * vC * vC))
        return (config.u - vC - R * iL) / L, (iL - iD) / C

    iL = np.full(m, config.iL0)
    vC = np.full(m, config.vC0)
    out_i = np.empty((m, config.n_outputs))
    out_v = np.empty((m, config.n_outputs))
    with np.errstate(over="ignore", invalid="ignore"):
        _integrate(config, rhs, iL, vC, i_dev, out_i, out_v, on_error)
    failed = ~(np.all(np.isfinite(out_i), axis=1) & np.all(np.isfinite(out_v), axis=1))
    out_i[failed] = np.nan
    out_v[failed] = np.nan
    return {"i_L": out_i, "v_C": out_v}


def _integrate(config, rhs, iL, vC, i_dev, out_i, out_v, on_error):
    h = config.step
    n_steps = config.steps_per_sample * config.n_outputs
    for s in range(n_steps):
        d0, d_half, d1 = i_dev[:, 2 * s], i_dev[:, 2 * s + 1], i_dev[:, 2 * s + 2]
        k1i, k1v = rhs(iL, vC, d0)
        k2i, k2v = rhs(iL + 0.5 * h * k1i, vC + 0.5 * h * k1v, d_half)
        k3i, k3v = rhs(iL + 0.5 * h * k2i, vC + 0.5 * h * k2v, d_half)
        k4i, k4v = rhs(iL + h * k3i, vC + h * k3v, d1)
        iL = iL + h / 6.0 * (k1i + 2 * k2i + 2 * k3i + k4i)
        vC = vC + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if (s + 1) % config.steps_per_sample == 0:
            j = (s + 1) // config.steps_per_sample - 1
            out_i[:, j], out_v[:, j] = iL, vC
            bad = ~(np.isfinite(iL) & np.isfinite(vC))
            if np.any(bad) and on_error == "raise":
                rows = np.flatnonzero(bad)
                raise SimulationError(f"non-finite RLC state for sample {rows[0]} at t={config.output_times[j]:g}s",
                                      samples=rows, period=j + 1)
