"""Discrete-time model of organizational innovative search.

Seven states ``[II, IS, NI, OI, TI, AA, ES]`` and twelve Gaussian parameters
``c_i = mean_i + std_i * theta_i``.  One period update (Gauss-Seidel order)::

    AA' = AA + c8 NI + c9 NI^2 + c10 TI + c11 TI^2
    ES' = c12 ES - II
    II' = c1 ES' AA'
    IS' = c2 IS + NI + II
    NI' = c3 IS
    OI' = c6 NI' + c4 IS' + c5 II'
    TI' = c7 TI + OI'

The initial state is period 1, so NI first leaves zero at period 4.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import SimulationError

N_INPUTS = 12
VARIABLES = ("NI",)

MEANS = (0.1375, 0.2, 0.5, 0.2, 0.2, 0.5, 0.275, 0.1375, -0.0150, -0.0505, 0.00055, 1.0055)
STDS = (0.0225, 0.02, 0.06, 0.02, 0.02, 0.02, 0.025, 0.0225, 0.002, 0.0099, 0.00009, 0.0009)
STATE0 = (0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 50.0)


@dataclass(frozen=True)
class InnovationConfig:
    means: tuple = MEANS
    stds: tuple = STDS
    x0: tuple = STATE0
    horizon: int = 30
    first_period: int = 4
    # |state| beyond this is treated as divergence
    blowup: float = 1e100

    @property
    def periods(self) -> np.ndarray:
        return np.arange(self.first_period, self.horizon + 1)

    def parameters(self, theta) -> np.ndarray:
        theta = np.atleast_2d(theta)
        return np.asarray(self.means) + np.asarray(self.stds) * theta


def trajectories(config: InnovationConfig, theta) -> np.ndarray:
    """All seven states for periods ``1..horizon``; shape (m, horizon, 7).

    Diverging samples show up as non-finite entries.
    """
    c = config.parameters(theta).T
    m = c.shape[1]
    II, IS, NI, OI, TI, AA, ES = (np.full(m, v, dtype=float) for v in config.x0)
    out = np.empty((m, config.horizon, 7))
    out[:, 0] = np.column_stack([II, IS, NI, OI, TI, AA, ES])
    with np.errstate(over="ignore", invalid="ignore"):
        for p in range(1, config.horizon):
            AA_n = AA + c[7] * NI + c[8] * NI**2 + c[9] * TI + c[10] * TI**2
            ES_n = c[11] * ES - II
            II_n = c[0] * ES_n * AA_n
            IS_n = c[1] * IS + NI + II
            NI_n = c[2] * IS
            OI_n = c[5] * NI_n + c[3] * IS_n + c[4] * II_n
            TI_n = c[6] * TI + OI_n
            II, IS, NI, OI, TI, AA, ES = II_n, IS_n, NI_n, OI_n, TI_n, AA_n, ES_n
            out[:, p] = np.column_stack([II, IS, NI, OI, TI, AA, ES])
    out[~(np.abs(out) < config.blowup)] = np.nan
    return out


def simulate_innovation(config: InnovationConfig, theta, on_error: str = "raise") -> dict:
    """New ideas ``NI`` at periods ``first_period..horizon``.

    With ``on_error="raise"`` a diverging sample raises
    :class:`SimulationError` naming the sample and first bad period; with
    ``"mask"`` such rows are returned as NaN.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if theta.shape[1] != N_INPUTS:
        raise ValueError(f"innovation model takes {N_INPUTS} inputs, got {theta.shape[1]}")
    traj = trajectories(config, theta)
    finite = np.all(np.isfinite(traj), axis=2)
    ni = traj[:, config.first_period - 1:, 2].copy()
    bad = ~np.all(finite, axis=1)
    if np.any(bad):
        if on_error == "raise":
            row = int(np.flatnonzero(bad)[0])
            period = int(np.flatnonzero(~finite[row])[0]) + 1
            raise SimulationError(f"innovation model diverged for sample {row} at period {period}",
                                  samples=np.flatnonzero(bad), period=period)
        ni[bad] = np.nan
    return {"NI": ni}
