import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaosfit.basis import BasisFamily, build_design_matrix, enumerate_multi_indices
from chaosfit.sampling import Distribution, DistributionSpec, draw_samples
from chaosfit.solver import (
    BoundRows,
    ConvergenceError,
    FitProblem,
    FitResult,
    InfeasibleError,
    SolverOptions,
    kkt_residual,
    objective_value,
    pdf_weights,
    project_variance_ellipsoid,
    solve_least_squares,
    solve_pce,
    solve_ridge,
    weight_ladder,
)
from oracles import cvxpy_solve, sparse_instance


def simple_problem(**kw):
    base = dict(design=[[1.0, 0.5]], data=[3.0], weights=[0.5, 1.0], pdf_weights=[1.0], beta=2.0)
    base.update(kw)
    return FitProblem(**base)


def noisy_instance(seed=0, nu=40, n=4, deg=2, beta=5.0, family=BasisFamily.LEGENDRE):
    idx = enumerate_multi_indices(n, deg)
    dist = Distribution.UNIFORM if family is BasisFamily.LEGENDRE else Distribution.NORMAL
    batch = draw_samples(DistributionSpec(dist, n), nu, seed=seed)
    dm = build_design_matrix(batch.samples, idx, family)
    rs = np.random.default_rng(seed)
    v = np.sin(batch.samples.sum(axis=1)) + 0.3 * batch.samples[:, 0] ** 2 + 0.05 * rs.normal(size=nu)
    return FitProblem(dm.matrix, v, weight_ladder(idx, 1e-4, 2.0), pdf_weights(batch.pdf_values), beta,
                      dm.norms_sq), idx


# ------------------------------------------------------------------ weights --

def test_weight_ladders():
    idx2 = enumerate_multi_indices(3, 2)
    w = weight_ladder(idx2, ladder=[0.00025, 0.5, 1.0])
    np.testing.assert_allclose(w[[0, 1, 4]], [0.00025, 0.5, 1.0])
    idx3 = enumerate_multi_indices(2, 3)
    per_order = lambda w: [w[np.flatnonzero(idx3.degrees == l)[0]] for l in range(4)]  # noqa: E731
    np.testing.assert_allclose(per_order(weight_ladder(idx3, 1e-4, 2.0)), [1e-4, 1 / 9, 4 / 9, 1])
    np.testing.assert_allclose(per_order(weight_ladder(idx3, 1e-4, 3.0)), [1e-4, 1 / 27, 8 / 27, 1])


def test_weight_ladder_rejects_non_monotone_profiles():
    idx = enumerate_multi_indices(2, 3)
    with pytest.raises(ValueError):
        weight_ladder(idx, w0=0.5, exponent=1.0)  # w(0) > w(1) = 1/3
    with pytest.raises(ValueError):
        weight_ladder(idx, ladder=[0.1, 0.5, 0.5, 1.0])
    with pytest.raises(ValueError):
        weight_ladder(idx, ladder=[0.1, 0.2, 0.5, 2.0])
    with pytest.raises(ValueError):
        weight_ladder(idx, w0=0.0)


def test_pdf_weight_normalisations():
    np.testing.assert_allclose(pdf_weights([0.5, 0.25]), [1.0, 0.5])
    np.testing.assert_allclose(pdf_weights([0.5, 0.25], "mean"), [4 / 3, 2 / 3])
    np.testing.assert_allclose(pdf_weights([0.5, 0.25], None), [0.5, 0.25])
    with pytest.raises(ValueError):
        pdf_weights([-1.0])


# ---------------------------------------------------------------- objective --

def test_objective_examples():
    p = simple_problem()
    assert objective_value(p, [1.0, 1.0]) == pytest.approx(4.5)
    assert objective_value(simple_problem(data=[0.0]), [0.0, 0.0]) == 0.0
    assert objective_value(p, [0.0, 0.0]) == pytest.approx(2.0 * 3.0)


def test_problem_validation():
    with pytest.raises(ValueError):
        simple_problem(beta=0.0)
    with pytest.raises(ValueError):
        simple_problem(weights=[0.0, 1.0])
    with pytest.raises(ValueError):
        simple_problem(pdf_weights=[-1.0])
    with pytest.raises(ValueError):
        simple_problem(data=[1.0, 2.0])
    with pytest.raises(ValueError):
        simple_problem(variance_bound=1.0)  # needs norms


# ------------------------------------------------------------------- solver --

def test_zero_data_gives_zero():
    p, _ = noisy_instance()
    res = solve_pce(FitProblem(p.design, np.zeros(len(p.data)), p.weights, p.pdf_weights, p.beta))
    assert np.all(res.coefficients == 0)


def test_tiny_beta_gives_zero():
    p, _ = noisy_instance(beta=1e-9)
    assert np.max(np.abs(solve_pce(p).coefficients)) <= 1e-6


def test_sparse_recovery_and_certificate():
    p, a0, _ = sparse_instance()
    res = solve_pce(p)
    assert np.max(np.abs(res.coefficients - a0)) <= 1e-3
    assert kkt_residual(p, res.coefficients, res.fit_dual) <= 1e-6


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("family", list(BasisFamily))
def test_matches_conic_oracle(seed, family):
    p, _ = noisy_instance(seed=seed, family=family)
    res = solve_pce(p)
    a_ref, obj_ref = cvxpy_solve(p)
    assert res.objective <= obj_ref * (1 + 1e-7) + 1e-10
    np.testing.assert_allclose(res.coefficients, a_ref, atol=1e-5 * max(1.0, np.abs(a_ref).max()))
    assert kkt_residual(p, res.coefficients, res.fit_dual, zero_tol=1e-12) <= 1e-6


def test_objective_sanity_bounds():
    p, _ = noisy_instance(seed=4, nu=60)
    res = solve_pce(p)
    a_ls = solve_least_squares(p.pdf_weights[:, None] * p.design, p.pdf_weights * p.data)
    assert res.objective <= objective_value(p, np.zeros(p.n_terms)) + 1e-12
    assert res.objective <= objective_value(p, a_ls) + 1e-9


def test_variance_constraint():
    p, idx = noisy_instance(seed=5)
    free = solve_pce(p)
    bound = 0.5 * p.variance(free.coefficients)
    cp_ = FitProblem(p.design, p.data, p.weights, p.pdf_weights, p.beta, p.norms_sq, variance_bound=bound)
    res = solve_pce(cp_)
    assert p.variance(res.coefficients) <= bound + 1e-8
    a_ref, obj_ref = cvxpy_solve(cp_)
    assert res.objective == pytest.approx(obj_ref, rel=1e-6)


def test_positivity_rows():
    p, idx = noisy_instance(seed=6)
    theta = draw_samples(DistributionSpec(Distribution.UNIFORM, idx.n), 200, seed=6, stream=1).samples
    rows = build_design_matrix(theta, idx, BasisFamily.LEGENDRE).matrix
    shifted = FitProblem(p.design, p.data - 0.8, p.weights, p.pdf_weights, p.beta, p.norms_sq,
                         bounds=BoundRows.nonnegative(rows))
    res = solve_pce(shifted)
    assert np.min(rows @ res.coefficients) >= -1e-8
    assert res.constraint_violation <= 1e-8
    _, obj_ref = cvxpy_solve(shifted)
    assert res.objective == pytest.approx(obj_ref, rel=1e-6)


@pytest.mark.parametrize("seed,nu", [(1, 60), (3, 80)])
def test_full_rank_fit_with_active_constraints(seed, nu):
    # more runs than terms, a binding variance cap and many sampled rows
    p, a0, idx = sparse_instance(nu=nu, seed=seed)
    theta = draw_samples(DistributionSpec(Distribution.UNIFORM, idx.n), 500, seed=7 + seed).samples
    rows = build_design_matrix(theta, idx, BasisFamily.LEGENDRE).matrix
    shift = a0.copy()
    shift[0] = abs(a0[0]) + 1.0
    cons = FitProblem(p.design, p.design @ shift, p.weights, p.pdf_weights, p.beta, p.norms_sq,
                      variance_bound=0.5 * p.variance(a0), bounds=BoundRows.nonnegative(rows))
    res = solve_pce(cons)
    assert res.constraint_violation <= 1e-8
    _, obj_ref = cvxpy_solve(cons)
    assert res.objective == pytest.approx(obj_ref, rel=1e-6)


def test_scale_homogeneity():
    p, _ = noisy_instance(seed=7)
    bound = 0.5 * p.variance(solve_pce(p).coefficients)
    base = FitProblem(p.design, p.data, p.weights, p.pdf_weights, p.beta, p.norms_sq, variance_bound=bound)
    a1 = solve_pce(base).coefficients
    for c in (0.01, 37.0):
        scaled = FitProblem(p.design, c * p.data, p.weights, p.pdf_weights, p.beta, p.norms_sq,
                            variance_bound=c * c * bound)
        np.testing.assert_allclose(solve_pce(scaled).coefficients, c * a1, rtol=1e-6,
                                   atol=1e-6 * c * np.abs(a1).max())


def test_agrees_with_least_squares_for_large_beta():
    p, idx = noisy_instance(seed=8, nu=3 * 15 + 5, beta=1e6)
    a_ls = solve_least_squares(p.pdf_weights[:, None] * p.design, p.pdf_weights * p.data)
    res = solve_pce(p)
    assert np.max(np.abs(res.coefficients - a_ls)) <= 1e-3 * np.abs(a_ls).max()
    a_ridge = solve_ridge(p)
    assert np.max(np.abs(a_ridge - a_ls)) <= 1e-3 * np.abs(a_ls).max()


def test_deterministic():
    p, _ = noisy_instance(seed=9)
    assert np.array_equal(solve_pce(p).coefficients, solve_pce(p).coefficients)


def test_nonconvergence_carries_last_iterate():
    p, _ = noisy_instance(seed=3)
    opts = SolverOptions(max_iters=5, crossover_every=0)
    with pytest.raises(ConvergenceError) as info:
        solve_pce(p, opts)
    assert info.value.result.iterations == 5
    assert info.value.result.coefficients.shape == (p.n_terms,)


def test_infeasible_bounds_are_reported():
    design = np.ones((2, 2))
    rows = np.array([[1.0, 0.0], [-1.0, 0.0]])
    bounds = BoundRows(rows, np.array([1.0, 0.0]), np.array([np.inf, np.inf]))  # a0 >= 1 and a0 <= 0
    p = FitProblem(design, [1.0, 1.0], [1e-3, 1.0], [1.0, 1.0], 1.0, bounds=bounds)
    with pytest.raises(InfeasibleError):
        solve_pce(p)
    p2 = FitProblem(design, [1.0, 1.0], [1e-3, 1.0], [1.0, 1.0], 1.0,
                    bounds=BoundRows(rows[:1], np.array([2.0]), np.array([1.0])))
    with pytest.raises(InfeasibleError):
        solve_pce(p2)


def test_bound_excluding_zero_but_feasible():
    p, idx = noisy_instance(seed=2)
    row = np.zeros((1, p.n_terms))
    row[0, 0] = 1.0
    q = FitProblem(p.design, p.data, p.weights, p.pdf_weights, p.beta, p.norms_sq,
                   bounds=BoundRows(row, np.array([5.0]), np.array([np.inf])))
    res = solve_pce(q)
    assert res.coefficients[0] >= 5.0 - 1e-8


def test_options_from_mapping():
    assert SolverOptions.from_mapping({"tol": 1e-6, "rho": 2.0}).rho == 2.0
    with pytest.raises(ValueError):
        SolverOptions.from_mapping({"bogus": 1})


def test_result_round_trip(tmp_path):
    p, _ = noisy_instance()
    res = solve_pce(p)
    res.save(tmp_path / "r.json")
    back = FitResult.load(tmp_path / "r.json")
    assert np.array_equal(back.coefficients, res.coefficients)
    assert back.iterations == res.iterations


# --------------------------------------------------------------- baselines --

def test_least_squares_examples():
    np.testing.assert_allclose(solve_least_squares(np.eye(3), [1, -2, 5]), [1, -2, 5])
    np.testing.assert_allclose(solve_least_squares([[1.0], [1.0]], [1, 3]), [2.0])
    np.testing.assert_allclose(solve_least_squares([[1.0, 1.0]], [4.0]), np.linalg.pinv([[1.0, 1.0]]) @ [4.0])
    np.testing.assert_allclose(solve_least_squares([[1.0, 1.0]], [4.0]), [2.0, 2.0])


def test_ridge_examples():
    one = FitProblem([[1.0]], [2.0], [1.0], [1.0], 1.0)
    assert solve_ridge(one)[0] == pytest.approx(1.0)
    p, _ = noisy_instance()
    assert np.all(solve_ridge(FitProblem(p.design, 0 * p.data, p.weights, p.pdf_weights, 1.0)) == 0)
    heavy = FitProblem(p.design, p.data, np.ones(p.n_terms), p.pdf_weights, 1e-9)
    assert np.max(np.abs(solve_ridge(heavy))) <= 1e-6


# ----------------------------------------------------------- ellipsoid proj --

def test_projection_examples():
    nrm = np.array([1.0, 1 / 3])
    np.testing.assert_allclose(project_variance_ellipsoid([5.0, 3.0], nrm, 1.0), [5.0, np.sqrt(3.0)])
    np.testing.assert_array_equal(project_variance_ellipsoid([5.0, 1.0], nrm, 1.0), [5.0, 1.0])
    np.testing.assert_array_equal(project_variance_ellipsoid([0.0, 0.0], nrm, 0.0), [0.0, 0.0])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 10.0))
def test_projection_is_the_nearest_feasible_point(seed, bound):
    rs = np.random.default_rng(seed)
    nrm = np.concatenate([[1.0], rs.uniform(0.01, 5.0, 6)])
    a = rs.normal(scale=3.0, size=7)
    p = project_variance_ellipsoid(a, nrm, bound)
    var = np.sum(p[1:] ** 2 * nrm[1:])
    assert var <= bound * (1 + 1e-9)
    assert p[0] == a[0]
    # no random feasible point is closer
    trial = rs.normal(size=(200, 7))
    trial[:, 0] = a[0]
    tv = np.sum(trial[:, 1:] ** 2 * nrm[1:], axis=1)
    trial[:, 1:] *= np.minimum(1.0, np.sqrt(bound / tv))[:, None]
    assert np.linalg.norm(p - a) <= np.min(np.linalg.norm(trial - a, axis=1)) + 1e-9
