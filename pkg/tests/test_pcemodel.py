import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_hermitenorm, eval_legendre

from chaosfit.basis import BasisFamily, enumerate_multi_indices
from chaosfit.pcemodel import PceModel, empirical_stats, histogram, quartiles

LEG = BasisFamily.LEGENDRE


def naive_eval(model, theta):
    # term-by-term sum using scipy's closed-form polynomial evaluators
    poly = eval_legendre if model.family is LEG else eval_hermitenorm
    total = 0.0
    for alpha, a in zip(model.index_set.indices, model.coefficients):
        total += a * np.prod([poly(int(d), t) for d, t in zip(alpha, theta)])
    return total


def model_1d(coef):
    return PceModel(enumerate_multi_indices(1, len(coef) - 1), LEG, coef)


def test_evaluate_examples():
    idx = enumerate_multi_indices(3, 2)
    const = PceModel(idx, LEG, np.eye(len(idx))[0] * 1.7)
    assert const.evaluate([0.3, -0.2, 0.9]) == pytest.approx(1.7)
    assert model_1d([0.0, 1.0]).evaluate([0.4]) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        const.evaluate([0.1, 0.2])


@pytest.mark.parametrize("family", list(BasisFamily))
def test_evaluate_matches_naive_summation(family):
    rs = np.random.default_rng(1)
    idx = enumerate_multi_indices(4, 3)
    model = PceModel(idx, family, rs.normal(size=len(idx)))
    theta = rs.uniform(-1, 1, size=(6, 4))
    vals = model.evaluate(theta)
    for t, v in zip(theta, vals):
        assert v == pytest.approx(naive_eval(model, t), rel=1e-12, abs=1e-12)


def test_moments_examples():
    idx = enumerate_multi_indices(2, 2)
    a = np.zeros(len(idx))
    a[0] = 2.3
    assert PceModel(idx, LEG, a).mean() == 2.3
    assert PceModel(idx, LEG, a).variance() == 0.0
    assert PceModel(idx, LEG, np.zeros(len(idx))).mean() == 0.0
    assert model_1d([0.0, 1.0]).variance() == pytest.approx(1 / 3)
    assert model_1d([1.0, 2.0, 3.0]).variance() == pytest.approx(47 / 15)


def test_variance_example_by_monte_carlo():
    vals = model_1d([1.0, 2.0, 3.0]).mc_over_pce(10**6, seed=5)
    assert vals.var() == pytest.approx(47 / 15, rel=0.02)


@pytest.mark.parametrize("family", list(BasisFamily))
def test_mc_mean_within_three_standard_errors(family):
    rs = np.random.default_rng(2)
    idx = enumerate_multi_indices(3, 3)
    model = PceModel(idx, family, rs.normal(size=len(idx)) / (1 + idx.degrees))
    vals = model.mc_over_pce(10**6, seed=8)
    se = vals.std(ddof=1) / np.sqrt(vals.size)
    assert abs(vals.mean() - model.mean()) <= 3 * se


def test_mc_over_pce_determinism_and_chunking():
    model = PceModel(enumerate_multi_indices(3, 2), LEG, np.arange(10.0))
    a = model.mc_over_pce(1000, seed=4)
    assert np.array_equal(a, model.mc_over_pce(1000, seed=4))
    assert np.array_equal(a, model.mc_over_pce(1000, seed=4, chunk=77))
    assert model.mc_over_pce(0, seed=4).shape == (0,)
    assert not np.array_equal(a, model.mc_over_pce(1000, seed=5))


def test_file_round_trip_is_lossless(tmp_path):
    rs = np.random.default_rng(3)
    idx = enumerate_multi_indices(5, 3)
    model = PceModel(idx, BasisFamily.HERMITE, rs.normal(size=len(idx)) * 1e-7)
    model.save(tmp_path / "m.pce")
    back = PceModel.load(tmp_path / "m.pce")
    assert np.array_equal(back.coefficients, model.coefficients)
    assert back.family is BasisFamily.HERMITE
    assert np.array_equal(back.index_set.indices, idx.indices)


def test_file_rejects_bad_input():
    with pytest.raises(ValueError):
        PceModel.from_text("1 0.5\n")
    text = model_1d([1.0, 2.0, 3.0]).to_text().splitlines()
    text[2], text[3] = text[3], text[2]
    with pytest.raises(ValueError):
        PceModel.from_text("\n".join(text))
    with pytest.raises(ValueError):
        PceModel(enumerate_multi_indices(2, 1), LEG, [1.0, 2.0])


def test_empirical_stats_examples():
    assert quartiles([1, 2, 3, 4, 5])[1] == 3
    st_const = empirical_stats(np.full(20, 4.2))
    assert np.all(st_const.quartiles == 4.2)
    assert np.count_nonzero(st_const.density) == 1
    with pytest.raises(ValueError):
        quartiles([])


def test_quartiles_of_uniform_draws():
    x = np.random.default_rng(0).uniform(size=10**6)
    np.testing.assert_allclose(quartiles(x), [0.25, 0.5, 0.75], atol=0.005)


def test_histogram_is_a_density():
    x = np.random.default_rng(1).normal(size=5000)
    density, edges = histogram(x)
    assert density.size == 100 and edges.size == 101
    assert np.sum(density * np.diff(edges)) == pytest.approx(1.0)
    assert edges[0] == x.min() and edges[-1] == x.max()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(-5, 5))
def test_evaluate_is_linear_in_coefficients(seed, s, t):
    rs = np.random.default_rng(seed)
    idx = enumerate_multi_indices(3, 2)
    a, b = rs.normal(size=(2, len(idx)))
    theta = rs.uniform(-1, 1, size=(4, 3))
    lhs = PceModel(idx, LEG, s * a + t * b).evaluate(theta)
    rhs = s * PceModel(idx, LEG, a).evaluate(theta) + t * PceModel(idx, LEG, b).evaluate(theta)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10)
