import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import hermite_e, legendre

from chaosfit.basis import (
    BasisFamily,
    MultiIndexSet,
    build_design_matrix,
    count_terms,
    enumerate_multi_indices,
    eval_multivariate,
    eval_univariate,
    norm_sq,
)
from chaosfit.sampling import Distribution, DistributionSpec, draw_samples


@pytest.mark.parametrize("n,deg,expected", [(3, 2, 10), (13, 2, 105), (12, 3, 455), (16, 3, 969), (5, 0, 1)])
def test_count_terms(n, deg, expected):
    assert count_terms(n, deg) == expected


def test_count_terms_overflow_is_explicit():
    with pytest.raises(OverflowError):
        count_terms(10**6, 40)


def test_count_terms_rejects_bad_arguments():
    with pytest.raises(ValueError):
        count_terms(0, 2)
    with pytest.raises(ValueError):
        count_terms(2, -1)


@pytest.mark.parametrize("n", range(1, 7))
@pytest.mark.parametrize("deg", range(0, 5))
def test_count_matches_exhaustive_enumeration(n, deg):
    brute = sum(1 for a in itertools.product(range(deg + 1), repeat=n) if sum(a) <= deg)
    assert count_terms(n, deg) == brute
    idx = enumerate_multi_indices(n, deg)
    assert len(idx) == brute
    assert len({tuple(r) for r in idx.indices}) == brute
    assert np.all(np.diff(idx.degrees) >= 0)
    assert not idx.indices[0].any()


def test_three_variable_table():
    idx = enumerate_multi_indices(3, 2)
    expected = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [2, 0, 0], [0, 2, 0], [0, 0, 2],
                [1, 1, 0], [1, 0, 1], [0, 1, 1]]
    assert idx.indices.tolist() == expected


def test_small_enumerations():
    assert enumerate_multi_indices(1, 3).indices.tolist() == [[0], [1], [2], [3]]
    assert enumerate_multi_indices(2, 1).indices.tolist() == [[0, 0], [1, 0], [0, 1]]


def test_multi_index_text_round_trip(tmp_path):
    idx = enumerate_multi_indices(4, 3)
    idx.save(tmp_path / "idx.txt")
    back = MultiIndexSet.load(tmp_path / "idx.txt")
    assert np.array_equal(back.indices, idx.indices)
    assert (back.n, back.max_degree) == (4, 3)


def test_multi_index_text_rejects_ungraded():
    with pytest.raises(ValueError):
        MultiIndexSet.from_text("0 0\n2 0\n1 0\n")


@pytest.mark.parametrize("family,deg,x,expected", [
    (BasisFamily.LEGENDRE, 1, 0.7, 0.7),
    (BasisFamily.LEGENDRE, 0, -0.3, 1.0),
    (BasisFamily.LEGENDRE, 2, 1.0, 1.0),
    (BasisFamily.HERMITE, 2, 0.0, -1.0),
])
def test_univariate_examples(family, deg, x, expected):
    assert eval_univariate(family, deg, x) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("deg", range(11))
def test_univariate_against_numpy_polynomials(deg):
    # numpy's coefficient-series evaluators are an independent route
    x = np.linspace(-3, 3, 41)
    c = np.zeros(deg + 1)
    c[deg] = 1.0
    np.testing.assert_allclose(eval_univariate(BasisFamily.LEGENDRE, deg, x), legendre.legval(x, c), atol=1e-12)
    np.testing.assert_allclose(eval_univariate(BasisFamily.HERMITE, deg, x), hermite_e.hermeval(x, c),
                               rtol=1e-12, atol=1e-9)


def test_legendre_bounded_on_interval():
    x = np.arange(-1.0, 1.0 + 5e-4, 1e-3)
    for deg in range(11):
        vals = eval_univariate(BasisFamily.LEGENDRE, deg, x)
        assert np.max(np.abs(vals)) <= 1.0 + 1e-12


def test_multivariate_examples():
    leg = BasisFamily.LEGENDRE
    assert eval_multivariate([1, 1, 0], leg, [0.5, 0.2, 0.9]) == pytest.approx(0.10)
    assert eval_multivariate([0, 0, 0], leg, [0.5, -0.2, 0.9]) == 1.0
    assert eval_multivariate([2, 1], leg, [1.0, 0.3]) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        eval_multivariate([1, 0], leg, [0.1, 0.2, 0.3])


def test_norms():
    assert norm_sq([1, 1, 0], BasisFamily.LEGENDRE) == pytest.approx(1 / 9)
    assert norm_sq([0, 0], BasisFamily.HERMITE) == 1.0
    assert norm_sq([0, 0], BasisFamily.LEGENDRE) == 1.0
    assert norm_sq([2, 1], BasisFamily.HERMITE) == 2.0


def test_hermite_norm_by_monte_carlo():
    theta = draw_samples(DistributionSpec(Distribution.NORMAL, 2), 10**6, seed=3).samples
    vals = eval_multivariate([2, 1], BasisFamily.HERMITE, theta) ** 2
    assert vals.mean() == pytest.approx(2.0, rel=0.01)


@pytest.mark.parametrize("family,n", [(BasisFamily.LEGENDRE, 3), (BasisFamily.HERMITE, 2)])
def test_orthogonality_family_wise(family, n):
    # every E[Phi_i Phi_j] within 4.5 standard errors of its exact value;
    # across ~600 pairs a correct basis exceeds that with probability < 1%
    count = 200_000
    theta = draw_samples(DistributionSpec(Distribution(family.distribution), n), count, seed=11).samples
    idx = enumerate_multi_indices(n, 4)
    phi = build_design_matrix(theta, idx, family).matrix
    second = phi.T @ phi / count
    se = np.sqrt(((phi * phi).T @ (phi * phi) / count - second**2) / (count - 1))
    exact = np.diag([norm_sq(a, family) for a in idx])
    diff = np.abs(second - exact)
    assert np.all((diff <= 4.5 * se) | (diff <= 1e-12))


def test_design_matrix_examples():
    idx = enumerate_multi_indices(1, 2)
    dm = build_design_matrix(np.zeros((1, 1)), idx, BasisFamily.LEGENDRE)
    np.testing.assert_allclose(dm.matrix, [[1.0, 0.0, -0.5]])
    np.testing.assert_allclose(dm.norms_sq, [1, 1 / 3, 1 / 5])

    empty = build_design_matrix(np.empty((0, 1)), idx, BasisFamily.LEGENDRE)
    assert empty.shape == (0, 3)

    big = enumerate_multi_indices(13, 2)
    theta = draw_samples(DistributionSpec(Distribution.UNIFORM, 13), 30, seed=1).samples
    dm = build_design_matrix(theta, big, BasisFamily.LEGENDRE)
    assert dm.shape == (30, 105)
    assert np.all(dm.matrix[:, 0] == 1.0)
    with pytest.raises(ValueError):
        build_design_matrix(np.zeros((2, 4)), big, BasisFamily.LEGENDRE)


def test_design_matrix_matches_per_entry_evaluation():
    idx = enumerate_multi_indices(3, 3)
    theta = draw_samples(DistributionSpec(Distribution.NORMAL, 3), 7, seed=5).samples
    dm = build_design_matrix(theta, idx, BasisFamily.HERMITE)
    naive = np.array([[eval_multivariate(a, BasisFamily.HERMITE, t) for a in idx.indices] for t in theta])
    np.testing.assert_allclose(dm.matrix, naive, rtol=1e-13, atol=1e-13)


def test_design_matrix_row_chunks_are_bit_identical():
    from chaosfit.basis import evaluate_basis

    idx = enumerate_multi_indices(4, 3)
    theta = draw_samples(DistributionSpec(Distribution.UNIFORM, 4), 100, seed=2).samples
    whole = evaluate_basis(idx, BasisFamily.LEGENDRE, theta)
    parts = evaluate_basis(idx, BasisFamily.LEGENDRE, theta, chunk=7)
    assert np.array_equal(whole, parts)


def test_family_distribution_pairing():
    assert BasisFamily.for_distribution("uniform") is BasisFamily.LEGENDRE
    assert BasisFamily.for_distribution("normal") is BasisFamily.HERMITE
    assert BasisFamily.HERMITE.distribution == "normal"
    with pytest.raises(ValueError):
        BasisFamily.for_distribution("gamma")


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=3), st.data())
def test_multivariate_is_product_of_univariates(alpha, data):
    theta = data.draw(st.lists(st.floats(-1, 1), min_size=len(alpha), max_size=len(alpha)))
    for fam in BasisFamily:
        expected = math.prod(eval_univariate(fam, a, t) for a, t in zip(alpha, theta))
        assert eval_multivariate(alpha, fam, theta) == pytest.approx(expected, rel=1e-12, abs=1e-14)
