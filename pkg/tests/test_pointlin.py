import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from chpoisson.pointlin import (DimensionError, FlagMismatchError, NotAntisymmetricError,
                                Subspace, annihilator, inclusion_residual, is_subspace_of,
                                principal_angles, sharp_image, subspace_distance,
                                subspace_intersect, subspace_sum,
                                verify_characteristic_identity)
from chpoisson.poisson import canonical, hat

E = np.eye(3)
B4 = canonical(2)(np.zeros(4))


def span(*vectors, n=None, dual=False):
    vectors = np.atleast_2d(vectors)
    return Subspace.span(vectors, n or vectors.shape[1], dual=dual)


def same(u, v, tol=1e-10):
    return subspace_distance(u, v) < tol


def nullspace_oracle(basis, n):
    """Covectors killing every basis row, from scipy's SVD-based null_space."""
    if len(basis) == 0:
        return np.eye(n)
    return scipy.linalg.null_space(np.atleast_2d(basis)).T


finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


@st.composite
def subspaces(draw, n=4):
    k = draw(st.integers(0, n))
    rows = draw(arrays(float, (k, n), elements=finite))
    return Subspace.span(rows, n) if k else Subspace.zero(n)


class TestAnnihilator:
    def test_full_space_gives_zero(self):
        assert annihilator(Subspace.full(3)).dim == 0

    def test_zero_gives_full_dual(self):
        a = annihilator(Subspace.zero(3))
        assert a.dim == 3 and a.dual

    def test_coordinate_line(self):
        a = annihilator(span(E[0]))
        assert a.dual
        assert same(a, span(E[1], E[2], dual=True))

    def test_matches_nullspace_oracle(self, rng):
        for _ in range(20):
            rows = rng.normal(size=(2, 5))
            a = annihilator(Subspace.span(rows, 5))
            oracle = Subspace.span(nullspace_oracle(rows, 5), 5, dual=True)
            assert same(a, oracle)

    def test_dimension_mismatch_raises(self):
        with pytest.raises(DimensionError):
            Subspace.span(np.ones((1, 3)), 4)

    @settings(max_examples=60, deadline=None)
    @given(subspaces())
    def test_dimension_count(self, v):
        assert v.dim + annihilator(v).dim == v.ambient_dim

    @settings(max_examples=60, deadline=None)
    @given(subspaces())
    def test_involution(self, v):
        back = annihilator(annihilator(v))
        assert not back.dual
        assert same(back, v, 1e-8)


class TestSharpImage:
    def test_canonical_dq_maps_to_dp_direction(self):
        img = sharp_image(B4, span(E4(0), dual=True))
        assert same(img, span(E4(2)))

    def test_sign_convention(self):
        # B# dp1 = d/dq1 and B# dq1 = -d/dp1
        assert np.allclose(B4 @ E4(2), E4(0))
        assert np.allclose(B4 @ E4(0), -E4(2))

    def test_zero(self):
        assert sharp_image(B4, Subspace.zero(4, dual=True)).dim == 0

    def test_lie_poisson(self):
        img = sharp_image(hat([0, 0, 1.0]), span(E[1], dual=True))
        assert same(img, span(E[0]))

    def test_rejects_non_antisymmetric(self):
        with pytest.raises(NotAntisymmetricError) as info:
            sharp_image(np.eye(3), span(E[0], dual=True))
        assert info.value.norm == pytest.approx(2 * np.sqrt(3))

    def test_rejects_tangent_input(self):
        with pytest.raises(FlagMismatchError):
            sharp_image(B4, span(E4(0)))

    @settings(max_examples=40, deadline=None)
    @given(arrays(float, 3, elements=finite), subspaces(3))
    def test_inside_characteristic_image(self, mu, w):
        b = hat(mu)
        w = Subspace(3, w.basis, dual=True)
        full = sharp_image(b, Subspace.full(3, dual=True))
        assert inclusion_residual(sharp_image(b, w), full) < 1e-8

    @settings(max_examples=40, deadline=None)
    @given(arrays(float, 3, elements=finite), arrays(float, 3, elements=finite),
           arrays(float, 3, elements=finite))
    def test_pairing_antisymmetry(self, mu, a, b):
        m = hat(mu)
        assert abs(a @ m @ b + b @ m @ a) < 1e-10


def E4(i):
    return np.eye(4)[i]


class TestSumIntersect:
    def test_sum_of_axes(self):
        s = subspace_sum(span(E[0]), span(E[1]))
        assert s.dim == 2 and same(s, span(E[0], E[1]))

    def test_intersection(self):
        i = subspace_intersect(span(E[0], E[1]), span(E[1], E[2]))
        assert same(i, span(E[1]))

    def test_inclusion(self):
        assert is_subspace_of(span(E[0] + E[1]), span(E[0], E[1]))
        assert not is_subspace_of(span(E[2]), span(E[0], E[1]))

    def test_flag_mismatch(self):
        with pytest.raises(FlagMismatchError):
            subspace_sum(span(E[0]), span(E[1], dual=True))

    def test_principal_angles_match_scipy(self, rng):
        for _ in range(20):
            a, b = rng.normal(size=(2, 6)), rng.normal(size=(3, 6))
            ours = np.sort(principal_angles(span(*a), span(*b)))
            oracle = np.sort(scipy.linalg.subspace_angles(a.T, b.T))
            assert np.allclose(ours, oracle, atol=1e-8)

    def test_distance_different_dims(self):
        assert subspace_distance(span(E[0]), span(E[0], E[1])) == 1.0

    @settings(max_examples=40, deadline=None)
    @given(subspaces(), subspaces())
    def test_intersection_dimension_formula(self, u, v):
        total = subspace_sum(u, v).dim + subspace_intersect(u, v).dim
        assert total == u.dim + v.dim


class TestCharacteristicIdentity:
    def test_symplectic_line(self):
        assert verify_characteristic_identity(B4, span(E4(0)), Subspace.full(4)) < 1e-12

    def test_full_space(self):
        assert verify_characteristic_identity(B4, Subspace.full(4), Subspace.full(4)) < 1e-12

    def test_lie_poisson_leaf(self):
        leaf = span(E[0], E[1])
        assert verify_characteristic_identity(hat([0, 0, 1.0]), span(E[0]), leaf) < 1e-12

    def test_wrong_leaf_is_detected(self):
        # at mu = e3 the leaf is the mu1-mu2 plane; claiming the full space breaks the identity
        r = verify_characteristic_identity(hat([0, 0, 1.0]), span(E[2]), Subspace.full(3))
        assert r > 0.5

    @settings(max_examples=50, deadline=None)
    @given(subspaces())
    def test_random_symplectic(self, v):
        assert verify_characteristic_identity(B4, v, Subspace.full(4)) < 1e-8
