"""Weighted l1 / pdf-weighted l2 estimation of expansion coefficients.

The main problem is

    minimize    ||W a||_1 + beta * ||Lambda (v - Phi a)||_2
    subject to  sum_{k>=1} a_k^2 E[Phi_k^2] <= sigma_max^2      (optional)
                lower_r <= B_r a <= upper_r, r = 1..mu            (optional)

Note the fit term is the Euclidean norm itself, not its square.  It is solved
by ADMM on the stacked splitting ``x = a``, ``z = c Lambda Phi a``,
``q = a`` and ``s = B a``; every block has a closed-form proximal step.  The
constant ``c`` rescales the fit block (see :func:`solve_pce`), so reported
primal residuals are in those balanced units.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg, optimize

from .basis import MultiIndexSet

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """Raised when ADMM hits ``max_iters``; ``result`` holds the last iterate."""

    def __init__(self, message: str, result: "FitResult"):
        super().__init__(message)
        self.result = result


class InfeasibleError(ValueError):
    """The sampled bound rows admit no coefficient vector."""


# ---------------------------------------------------------------- weights --

def weight_ladder(index_set: MultiIndexSet, w0: float = 1e-4, exponent: float = 1.0,
                  ladder=None) -> np.ndarray:
    """Per-coefficient l1 weights that grow with polynomial order.

    Either ``ladder`` gives ``w(l)`` for ``l = 0..max_degree`` explicitly, or
    ``w(0) = w0`` and ``w(l) = (l / max_degree) ** exponent`` for ``l >= 1``.
    The weights must be positive, strictly increasing in the order, and peak
    at 1.
    """
    deg = index_set.max_degree
    if ladder is not None:
        per_order = np.asarray(ladder, dtype=float)
        if per_order.size != deg + 1:
            raise ValueError(f"ladder needs {deg + 1} entries, got {per_order.size}")
    else:
        if w0 <= 0 or exponent < 1:
            raise ValueError("need w0 > 0 and exponent >= 1")
        per_order = np.empty(deg + 1)
        per_order[0] = w0
        levels = np.arange(1, deg + 1)
        per_order[1:] = (levels / max(deg, 1)) ** exponent
    check_weights(per_order)
    return per_order[index_set.degrees]


def check_weights(per_order) -> None:
    per_order = np.asarray(per_order, dtype=float)
    if np.any(per_order <= 0):
        raise ValueError("weights must be strictly positive")
    if np.any(np.diff(per_order) <= 0):
        raise ValueError(f"weights must increase strictly with order: {per_order}")
    if not np.isclose(per_order.max(), 1.0, rtol=0, atol=1e-12):
        raise ValueError("largest weight must equal 1")


def pdf_weights(pdf_values, normalize: str | None = "max") -> np.ndarray:
    """Fit-term weights from joint density values at the samples.

    ``normalize="max"`` rescales so the largest weight is 1, ``"mean"`` so
    they average 1, ``None`` keeps the raw density.
    """
    lam = np.asarray(pdf_values, dtype=float)
    if np.any(lam < 0):
        raise ValueError("pdf weights must be non-negative")
    if normalize is None or lam.size == 0:
        return lam.copy()
    ref = {"max": lam.max, "mean": lam.mean}[normalize]()
    if ref <= 0:
        raise ValueError("all pdf weights are zero")
    return lam / ref


# --------------------------------------------------------------- problems --

@dataclass(frozen=True)
class BoundRows:
    """Affine bounds ``lower <= rows @ a <= upper`` (use +-inf for one side)."""

    rows: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def nonnegative(cls, rows) -> "BoundRows":
        rows = np.asarray(rows, dtype=float)
        m = rows.shape[0]
        return cls(rows, np.zeros(m), np.full(m, np.inf))

    def violation(self, a) -> float:
        if self.rows.shape[0] == 0:
            return 0.0
        y = self.rows @ a
        return float(max(np.max(self.lower - y, initial=0.0), np.max(y - self.upper, initial=0.0)))


@dataclass(frozen=True)
class FitProblem:
    design: np.ndarray
    data: np.ndarray
    weights: np.ndarray
    pdf_weights: np.ndarray
    beta: float
    norms_sq: np.ndarray | None = None
    variance_bound: float | None = None
    bounds: BoundRows | None = None

    def __post_init__(self):
        phi = np.atleast_2d(np.asarray(self.design, dtype=float))
        nu, L = phi.shape
        object.__setattr__(self, "design", phi)
        for name, size in (("data", nu), ("weights", L), ("pdf_weights", nu)):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if arr.size != size:
                raise ValueError(f"{name} has length {arr.size}, expected {size}")
            object.__setattr__(self, name, arr)
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if np.any(self.weights <= 0):
            raise ValueError("l1 weights must be positive")
        if np.any(self.pdf_weights < 0):
            raise ValueError("pdf weights must be non-negative")
        if self.variance_bound is not None:
            if self.variance_bound < 0:
                raise ValueError("variance bound must be non-negative")
            if self.norms_sq is None:
                raise ValueError("variance bound needs the polynomial norms")
        if self.norms_sq is not None:
            object.__setattr__(self, "norms_sq", np.asarray(self.norms_sq, dtype=float).reshape(L))

    @property
    def n_terms(self) -> int:
        return self.design.shape[1]

    def variance(self, a) -> float:
        return float(np.sum(np.asarray(a)[1:] ** 2 * self.norms_sq[1:]))

    def constraint_violation(self, a) -> float:
        viol = 0.0
        if self.variance_bound is not None:
            viol = max(viol, self.variance(a) - self.variance_bound)
        if self.bounds is not None:
            viol = max(viol, self.bounds.violation(a))
        return max(viol, 0.0)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iters: int = 50_000
    rho: float = 1.0
    relax: float = 1.6
    adapt_every: int = 25
    adapt_factor: float = 2.0
    check_every: int = 10
    # first exact support solve after crossover_every iterations; the gap
    # doubles after each failure, up to 16 times this value
    crossover_every: int = 50
    kkt_tol: float = 1e-9

    @classmethod
    def from_mapping(cls, cfg) -> "SolverOptions":
        cfg = dict(cfg or {})
        known = {k: cfg.pop(k) for k in list(cfg) if k in cls.__dataclass_fields__}
        if cfg:
            raise ValueError(f"unknown solver options: {sorted(cfg)}")
        return cls(**known)


@dataclass
class FitResult:
    coefficients: np.ndarray
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    constraint_violation: float
    fit_dual: np.ndarray | None = field(default=None, repr=False)
    bound_dual: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "coefficients": [float(c) for c in self.coefficients],
            "objective": float(self.objective),
            "iterations": int(self.iterations),
            "primal_residual": float(self.primal_residual),
            "dual_residual": float(self.dual_residual),
            "constraint_violation": float(self.constraint_violation),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "FitResult":
        d = json.loads(Path(path).read_text())
        d["coefficients"] = np.array(d["coefficients"])
        return cls(**d)


def objective_value(problem: FitProblem, a) -> float:
    a = np.asarray(a, dtype=float)
    resid = problem.pdf_weights * (problem.data - problem.design @ a)
    return float(np.sum(problem.weights * np.abs(a)) + problem.beta * np.linalg.norm(resid))


# ------------------------------------------------------------ prox pieces --

def soft_threshold(x, thresh):
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)


def project_variance_ellipsoid(a, norms_sq, bound: float, tol: float = 1e-12) -> np.ndarray:
    """Euclidean projection onto ``{a : sum_{k>=1} a_k^2 norms_sq_k <= bound}``.

    ``a[0]`` is left untouched.  The multiplier ``eta`` of the active
    constraint solves ``sum_k c_k a_k^2 / (1 + eta c_k)^2 = bound``, which is
    convex and decreasing in ``eta``; Newton from ``eta = 0`` is monotone and
    is safeguarded by bisection.
    """
    a = np.asarray(a, dtype=float)
    out = a.copy()
    c = np.asarray(norms_sq, dtype=float)[1:]
    p = a[1:]
    var = float(np.sum(c * p * p))
    if var <= bound:
        return out
    if bound <= 0:
        out[1:] = 0.0
        return out
    cp2 = c * p * p

    def phi(eta):
        den = 1.0 + eta * c
        return float(np.sum(cp2 / den**2)) - bound, float(-2.0 * np.sum(cp2 * c / den**3))

    lo, hi = 0.0, None
    eta = 0.0
    for _ in range(200):
        f, df = phi(eta)
        if abs(f) <= tol * max(bound, 1e-300):
            break
        if f > 0:
            lo = eta
        else:
            hi = eta
        step = eta - f / df if df < 0 else np.inf
        if hi is None:
            if not np.isfinite(step) or step <= lo:
                step = 2.0 * lo + 1.0
        elif not (lo < step < hi):
            step = 0.5 * (lo + hi)
        if hi is not None and hi - lo <= 1e-16 * max(hi, 1.0):
            eta = hi
            break
        eta = step
    out[1:] = p / (1.0 + eta * c)
    # land on the feasible side of the boundary
    v = float(np.sum(c * out[1:] ** 2))
    if v > bound:
        out[1:] *= np.sqrt(bound / v)
    return out


def _block_shrink(point, center, radius):
    """Prox of ``radius * ||center - z||_2`` evaluated at ``point``."""
    diff = point - center
    nrm = np.linalg.norm(diff)
    if nrm <= radius:
        return center.copy()
    return center + diff * (1.0 - radius / nrm)


# ----------------------------------------------------------------- solver --

def _restore_feasibility(problem: FitProblem, a, max_shift: float = 1e-3) -> np.ndarray:
    """Pull ``a`` toward the constant-only expansion until all rows hold.

    The constant expansion ``(a_0, 0, ..., 0)`` has zero variance and meets
    bound rows with unit constant column strictly when ``lower < a_0 < upper``,
    so a short convex combination restores feasibility without touching the
    zero pattern.  Shifts larger than ``max_shift`` are not attempted.
    """
    a = np.asarray(a, dtype=float).copy()
    if problem.variance_bound is not None and problem.variance(a) > problem.variance_bound:
        a = project_variance_ellipsoid(a, problem.norms_sq, problem.variance_bound)
    b = problem.bounds
    if b is None or b.rows.shape[0] == 0 or b.violation(a) <= 0:
        return a
    anchor = np.zeros_like(a)
    anchor[0] = a[0]
    y_a, y_p = b.rows @ a, b.rows @ anchor
    low, high = y_a < b.lower, y_a > b.upper
    if np.any(low & (y_p <= b.lower)) or np.any(high & (y_p >= b.upper)):
        return a
    t = 0.0
    if np.any(low):
        t = max(t, float(np.max((b.lower[low] - y_a[low]) / (y_p[low] - y_a[low]))))
    if np.any(high):
        t = max(t, float(np.max((y_a[high] - b.upper[high]) / (y_a[high] - y_p[high]))))
    t = min(t * (1.0 + 1e-9) + 1e-15, 1.0)
    if t > max_shift:
        return a
    return (1.0 - t) * a + t * anchor


def _check_bounds_feasible(bounds: BoundRows) -> None:
    """Phase-one LP for the bound rows alone; raises if no point meets them."""
    B = np.asarray(bounds.rows, dtype=float)
    lo_ok, hi_ok = np.isfinite(bounds.lower), np.isfinite(bounds.upper)
    A_ub = np.vstack([-B[lo_ok], B[hi_ok]])
    b_ub = np.concatenate([-bounds.lower[lo_ok], bounds.upper[hi_ok]])
    res = optimize.linprog(np.zeros(B.shape[1]), A_ub=A_ub, b_ub=b_ub, bounds=(None, None), method="highs")
    if res.status == 2:
        raise InfeasibleError("the bound rows admit no coefficient vector")


FIT_BLOCK_NORM_CAP = 1e3
FULL_RANK_FIT_NORM_CAP = 10.0


def _due(it: int, every: int) -> bool:
    return every > 0 and it % every == 0


def solve_pce(problem: FitProblem, options: SolverOptions | None = None) -> FitResult:
    """Global minimizer of the weighted l1 / l2-fit program.

    Raises
    ------
    InfeasibleError
        If the bound rows cannot be met; checked by a linear program when
        ``a = 0`` violates them.
    ConvergenceError
        If the residuals stay above tolerance after ``max_iters`` iterations.
    """
    opts = options or SolverOptions()
    phi, lam, w = problem.design, problem.pdf_weights, problem.weights
    nu, L = phi.shape

    # positive homogeneity: solve on data scaled to unit size, rescale after
    scale = float(np.max(np.abs(lam * problem.data), initial=0.0))
    if problem.bounds is not None:
        finite = np.concatenate([problem.bounds.lower, problem.bounds.upper])
        finite = finite[np.isfinite(finite)]
        scale = max(scale, float(np.max(np.abs(finite), initial=0.0)))
    if problem.variance_bound is not None:
        scale = max(scale, float(np.sqrt(problem.variance_bound)))
    if scale == 0.0:
        a = np.zeros(L)
        return FitResult(a, objective_value(problem, a), 0, 0.0, 0.0, 0.0, np.zeros(nu))
    G = lam[:, None] * phi
    # beta ||d - G a|| = (beta / c) ||c d - c G a||: the split variable is
    # c G a with ||c G||_2 = beta, which balances the fit block against the
    # unit-weight l1 block and speeds ADMM up markedly when G is ill-conditioned.
    # Past about 1e3 the a-update itself degrades, hence the cap.  Without a
    # null space in G a large c leaves the other blocks no say in the a-update,
    # so full column rank gets the tighter cap.
    sv = np.linalg.svd(G, compute_uv=False) if G.size else np.zeros(1)
    g_norm = float(sv[0])
    full_rank = nu >= L and sv[-1] > g_norm * L * np.finfo(float).eps
    cap = FULL_RANK_FIT_NORM_CAP if full_rank else FIT_BLOCK_NORM_CAP
    fit_c = min(problem.beta, cap) / g_norm if g_norm > 0 else 1.0
    d = fit_c * lam * problem.data / scale
    G = fit_c * G

    # identity blocks are stored as None and applied implicitly
    blocks = [("l1", None), ("fit", G)]
    var_bound = None
    if problem.variance_bound is not None:
        var_bound = problem.variance_bound / scale**2
        blocks.append(("var", None))
    lo = hi = None
    if problem.bounds is not None and problem.bounds.rows.shape[0]:
        B = np.asarray(problem.bounds.rows, dtype=float)
        rn = np.linalg.norm(B, axis=1)
        rn[rn == 0] = 1.0
        lo = problem.bounds.lower / scale / rn
        hi = problem.bounds.upper / scale / rn
        if np.any(lo > hi):
            raise InfeasibleError("bound row with lower > upper")
        blocks.append(("bounds", B / rn[:, None]))
        zero_rows = np.linalg.norm(B, axis=1) == 0
        if np.any(zero_rows & ((problem.bounds.lower > 0) | (problem.bounds.upper < 0))):
            raise InfeasibleError("a constant bound row excludes every expansion")
        if problem.bounds.violation(np.zeros(L)) > 0:
            _check_bounds_feasible(problem.bounds)

    mats = [m for _, m in blocks]
    mats_t = [None if m is None else np.ascontiguousarray(m.T) for m in mats]
    sizes = [L if m is None else m.shape[0] for m in mats]
    cuts = np.cumsum(sizes)[:-1]
    n_rows = int(sum(sizes))

    def apply_k(a):
        return np.concatenate([a if m is None else m @ a for m in mats])

    def apply_kt(v):
        out = np.zeros(L)
        for mt, p in zip(mats_t, np.split(v, cuts)):
            out += p if mt is None else mt @ p
        return out

    # the a-update solves with K^T K, which does not depend on rho, so its
    # inverse is formed once
    gram = sum(np.eye(L) if m is None else m.T @ m for m in mats)
    gram_inv = linalg.cho_solve(linalg.cho_factor(gram), np.eye(L))

    def prox(z_in, rho):
        parts = np.split(z_in, cuts)
        out = []
        for (name, _), p in zip(blocks, parts):
            if name == "l1":
                out.append(soft_threshold(p, w / rho))
            elif name == "fit":
                out.append(_block_shrink(p, d, problem.beta / (fit_c * rho)))
            elif name == "var":
                out.append(project_variance_ellipsoid(p, problem.norms_sq, var_bound))
            else:
                out.append(np.clip(p, lo, hi))
        return np.concatenate(out)

    names = [name for name, _ in blocks]
    fit_rows = slice(L, L + nu)

    def duals(z, u, rho):
        """Fit dual (beta times a unit residual direction), bound multipliers, active rows."""
        zs, us = np.split(z, cuts), np.split(u, cuts)
        fit_dual = -rho * fit_c * us[names.index("fit")]
        if "bounds" not in names:
            return fit_dual, None, None
        k = names.index("bounds")
        zb = zs[k]
        active = np.where(zb <= lo, -1, np.where(zb >= hi, 1, 0))
        return fit_dual, -rho * us[k] / rn, active

    rho = opts.rho
    z = np.zeros(n_rows)
    u = np.zeros(n_rows)
    a = np.zeros(L)
    r_norm = r_true = s_norm = np.inf
    it = 0
    converged = False
    # failed crossovers back off geometrically, up to 16 base intervals
    next_cross, cross_gap = opts.crossover_every, opts.crossover_every
    for it in range(1, opts.max_iters + 1):
        a = gram_inv @ apply_kt(z - u)
        Ka = apply_k(a)
        Ka_hat = opts.relax * Ka + (1.0 - opts.relax) * z
        z_old = z
        z = prox(Ka_hat + u, rho)
        u = u + Ka_hat - z
        cross_due = opts.crossover_every > 0 and it == next_cross
        if not (_due(it, opts.check_every) or _due(it, opts.adapt_every)
                or cross_due or it == opts.max_iters):
            continue
        gap = Ka - z
        r_norm = np.linalg.norm(gap)
        s_norm = rho * np.linalg.norm(apply_kt(z - z_old))
        # stop on the primal residual of the unscaled fit block; the dual
        # residual is unaffected by the row scaling
        gap[fit_rows] /= fit_c
        r_true = np.linalg.norm(gap)
        if max(r_true, s_norm) <= opts.tol * (1.0 + np.linalg.norm(a)):
            converged = True
            break
        if cross_due:
            fit_dual, bound_dual, active = duals(z, u, rho)
            trial = _crossover(problem, z[:L] * scale, fit_dual, bound_dual, active, opts)
            cross_gap = min(2 * cross_gap, 16 * opts.crossover_every)
            next_cross = it + cross_gap
            if trial is not None:
                a_x, fit_x, bound_x = trial
                return FitResult(a_x, objective_value(problem, a_x), it, float(r_true * scale),
                                 float(s_norm * scale), problem.constraint_violation(a_x), fit_x, bound_x)
        if _due(it, opts.adapt_every):
            if r_norm > 10.0 * s_norm:
                rho *= opts.adapt_factor
                u /= opts.adapt_factor
            elif s_norm > 10.0 * r_norm:
                rho /= opts.adapt_factor
                u *= opts.adapt_factor

    # the l1 block carries the exact zero pattern
    coef = z[:L] * scale
    if problem.bounds is not None or problem.variance_bound is not None:
        coef = _restore_feasibility(problem, coef)
    elif converged:
        coef = _polish(problem, coef)
    fit_dual, bound_dual, _ = duals(z, u, rho)
    result = FitResult(coef, objective_value(problem, coef), it, float(r_true * scale),
                       float(s_norm * scale), problem.constraint_violation(coef), fit_dual, bound_dual)
    if not converged:
        raise ConvergenceError(
            f"ADMM stopped after {it} iterations (primal {r_true:.3g}, dual {s_norm:.3g})", result)
    if result.constraint_violation > opts.feas_tol:
        log.warning("constraint violation %.3g exceeds feas_tol", result.constraint_violation)
    return result


def kkt_residual(problem: FitProblem, a, fit_dual=None, bound_dual=None, zero_tol: float = 0.0) -> float:
    """Worst violation of the subgradient optimality conditions at ``a``.

    With residual ``r = Lambda (v - Phi a)``, a unit vector ``u`` and bound
    multipliers ``mu`` the conditions read ``g = beta (Lambda Phi)^T u + B^T mu``
    with ``g_k = w_k sign(a_k)`` on the support and ``|g_k| <= w_k`` elsewhere;
    ``u = r / ||r||`` whenever ``r != 0``.  Any ``u`` in the unit ball
    certifies optimality when ``r = 0``, so the solver's fit dual
    (``beta * u``) is tried as a second candidate and the smaller violation
    is reported.  ``mu`` must be non-negative on lower-bound rows,
    non-positive on upper-bound rows and vanish on rows with slack; these
    sign and complementarity violations are included.  The variance bound
    needs no multiplier: a feasible point meeting the remaining conditions
    is optimal with or without it.
    """
    a = np.asarray(a, dtype=float)
    G = problem.pdf_weights[:, None] * problem.design
    r = problem.pdf_weights * problem.data - G @ a
    extra, bound_term = 0.0, 0.0
    if bound_dual is not None and problem.bounds is not None:
        b = problem.bounds
        mu = np.asarray(bound_dual, dtype=float)
        y = b.rows @ a
        slack_lo = np.where(np.isfinite(b.lower), y - b.lower, np.inf)
        slack_hi = np.where(np.isfinite(b.upper), b.upper - y, np.inf)
        wrong_sign = np.where(mu > 0, np.where(np.isfinite(b.lower), 0.0, mu),
                              np.where(np.isfinite(b.upper), 0.0, -mu))
        slack = np.where(mu > 0, slack_lo, slack_hi)
        complementarity = np.abs(mu) * np.minimum(np.abs(slack), 1e300)
        extra = float(max(np.max(wrong_sign, initial=0.0), np.max(complementarity, initial=0.0)))
        bound_term = b.rows.T @ mu
    candidates = []
    nrm = np.linalg.norm(r)
    if nrm > 0:
        candidates.append(r / nrm)
    if fit_dual is not None:
        u = np.asarray(fit_dual, dtype=float) / problem.beta
        un = np.linalg.norm(u)
        candidates.append(u / un if un > 1 else u)
    if not candidates:
        candidates.append(np.zeros_like(r))
    support = np.abs(a) > zero_tol
    best = np.inf
    for u in candidates:
        g = problem.beta * (G.T @ u) + bound_term
        viol_on = np.abs(g - problem.weights * np.sign(a))[support]
        viol_off = np.maximum(np.abs(g) - problem.weights, 0.0)[~support]
        best = min(best, float(max(np.max(viol_on, initial=0.0), np.max(viol_off, initial=0.0))))
    return max(best, extra)


def _crossover(problem: FitProblem, a, fit_dual, bound_dual, active, opts: SolverOptions):
    """Exact solve on the support of an ADMM iterate, kept only if certified.

    If the data and the active bound rows can be met exactly on the support,
    that solution is the candidate and the duals are corrected (minimum-norm
    change) to satisfy the support equations.  Without active rows and with
    a nonzero residual, the Newton polish refines the candidate instead.
    Returns ``(a, fit_dual, bound_dual)`` when the candidate is feasible and
    :func:`kkt_residual` is within ``opts.kkt_tol``, else ``None``.
    """
    S = np.flatnonzero(a)
    G = problem.pdf_weights[:, None] * problem.design
    d = problem.pdf_weights * problem.data
    nu = G.shape[0]
    act = np.flatnonzero(active) if active is not None else np.zeros(0, dtype=int)
    if S.size == 0:
        return None
    if act.size:
        b = problem.bounds
        target_rows = b.rows[act]
        target_vals = np.where(active[act] < 0, b.lower[act], b.upper[act])
        M = np.vstack([G[:, S], target_rows[:, S]])
        rhs = np.concatenate([d, target_vals])
    else:
        M, rhs = G[:, S], d
    if S.size > M.shape[0]:
        return None
    sol, _, rank, _ = np.linalg.lstsq(M, rhs, rcond=None)
    if rank < S.size:
        return None
    trial = np.zeros_like(a)
    bound_x = None
    if np.linalg.norm(rhs - M @ sol) <= 1e-11 * np.linalg.norm(rhs):
        sgn = np.sign(a[S])
        if np.any(np.sign(sol) != sgn):
            return None
        trial[S] = sol
        p0 = np.asarray(fit_dual, dtype=float)
        if act.size:
            p0 = np.concatenate([p0, np.asarray(bound_dual, dtype=float)[act]])
        p = p0 + np.linalg.lstsq(M.T, problem.weights[S] * sgn - M.T @ p0, rcond=None)[0]
        fit_x = p[:nu]
        if problem.bounds is not None:
            bound_x = np.zeros(problem.bounds.rows.shape[0])
            bound_x[act] = p[nu:]
    elif act.size == 0:
        trial = _polish(problem, a)
        r = d - G @ trial
        fit_x = problem.beta * r / np.linalg.norm(r)
    else:
        return None
    if problem.constraint_violation(trial) > opts.feas_tol:
        return None
    if kkt_residual(problem, trial, fit_dual=fit_x, bound_dual=bound_x) > opts.kkt_tol:
        return None
    return trial, fit_x, bound_x


def _polish(problem: FitProblem, a, iters: int = 20) -> np.ndarray:
    """Newton refinement on the active set of an unconstrained solution.

    With support and signs frozen the objective is smooth whenever the
    residual is nonzero.  Steps that flip a sign or fail to lower the
    objective are rejected, so the result is never worse than ``a``.
    """
    a = np.asarray(a, dtype=float).copy()
    S = np.flatnonzero(a)
    if S.size == 0:
        return a
    sgn = np.sign(a[S])
    G = (problem.pdf_weights[:, None] * problem.design)[:, S]
    d = problem.pdf_weights * problem.data
    wS = problem.weights[S] * sgn
    best = objective_value(problem, a)
    for _ in range(iters):
        r = d - G @ a[S]
        nrm = np.linalg.norm(r)
        if nrm <= 1e-14 * max(np.linalg.norm(d), 1e-300):
            break
        u = r / nrm
        grad = wS - problem.beta * (G.T @ u)
        Gu = G.T @ u
        hess = (problem.beta / nrm) * (G.T @ G - np.outer(Gu, Gu))
        step = np.linalg.lstsq(hess, -grad, rcond=1e-12)[0]
        accepted = False
        t = 1.0
        while t > 1e-6:
            trial = a.copy()
            trial[S] = a[S] + t * step
            if np.all(np.sign(trial[S]) == sgn):
                val = objective_value(problem, trial)
                if val <= best:
                    a, best, accepted = trial, val, True
                    break
            t *= 0.5
        if not accepted or np.max(np.abs(t * step)) <= 1e-15 * max(np.max(np.abs(a)), 1e-300):
            break
    return a


# --------------------------------------------------------------- baselines --

def solve_least_squares(design, data) -> np.ndarray:
    """Minimizer of ``||v - Phi a||_2``; the minimum-norm one when rank deficient."""
    design = np.atleast_2d(np.asarray(design, dtype=float))
    data = np.asarray(data, dtype=float).reshape(-1)
    if design.shape[0] == 0:
        return np.zeros(design.shape[1])
    return np.linalg.lstsq(design, data, rcond=None)[0]


def solve_ridge(problem: FitProblem) -> np.ndarray:
    """Closed-form minimizer of ``||W a||_2^2 + beta ||Lambda (v - Phi a)||_2^2``."""
    G = problem.pdf_weights[:, None] * problem.design
    lhs = np.diag(problem.weights**2) + problem.beta * (G.T @ G)
    rhs = problem.beta * (G.T @ (problem.pdf_weights * problem.data))
    try:
        return linalg.solve(lhs, rhs, assume_a="pos")
    except linalg.LinAlgError:
        return np.linalg.lstsq(lhs, rhs, rcond=None)[0]
