import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toric_soliton.cubature import grundmann_moeller, refine_simplices, simplex_volumes


def dirichlet_moment(alpha):
    """Exact mean of prod l_i^{a_i} over the unit simplex (barycentric monomial)."""
    n = len(alpha) - 1
    return math.factorial(n) * math.prod(math.factorial(a) for a in alpha) / math.factorial(sum(alpha) + n)


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("degree", [1, 3, 5, 9, 13, 17, 21])
def test_weights_sum_to_one_and_points_in_simplex(dim, degree):
    bary, w = grundmann_moeller(degree, dim)
    assert math.isclose(w.sum(), 1.0, rel_tol=0, abs_tol=1e-13)
    assert np.allclose(bary.sum(axis=1), 1.0)
    assert np.all(bary >= 0)


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("degree", [5, 11, 21])
def test_monomials_integrated_exactly(dim, degree):
    bary, w = grundmann_moeller(degree, dim)
    rng = np.random.default_rng(degree * 10 + dim)
    for _ in range(12):
        total = int(rng.integers(0, degree + 1))
        cuts = np.sort(rng.integers(0, total + 1, size=dim))
        alpha = np.diff(np.concatenate([[0], cuts, [total]]))
        val = float(w @ np.prod(bary**alpha, axis=1))
        assert val == pytest.approx(dirichlet_moment(alpha), rel=1e-12)


def test_degree_beyond_rule_is_not_exact():
    bary, w = grundmann_moeller(3, 2)
    alpha = (6, 0, 0)
    assert abs(float(w @ bary[:, 0] ** 6) - dirichlet_moment(alpha)) > 1e-6


@pytest.mark.parametrize("bad", [0, 2, -1])
def test_even_or_nonpositive_degree_rejected(bad):
    with pytest.raises(ValueError):
        grundmann_moeller(bad, 2)


@settings(max_examples=30, deadline=None)
@given(dim=st.integers(1, 3), levels=st.integers(0, 3), seed=st.integers(0, 2**32 - 1))
def test_refinement_preserves_volume(dim, levels, seed):
    rng = np.random.default_rng(seed)
    verts = rng.normal(size=(1, dim + 1, dim))
    children = refine_simplices(verts, levels)
    assert children.shape == (2 ** (dim * levels), dim + 1, dim)
    vols = simplex_volumes(children)
    parent = simplex_volumes(verts)[0]
    assert vols.sum() == pytest.approx(parent, rel=1e-11)
    # the edgewise split produces children of equal volume
    assert np.allclose(vols, parent / 2 ** (dim * levels), rtol=1e-9)
