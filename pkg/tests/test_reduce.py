import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from chpoisson.pointlin import Subspace, subspace_distance
from chpoisson.poisson import ScalarField, VectorField, canonical, hamiltonian_field
from chpoisson.reduce import (COISOTROPIC, COSYMPLECTIC, NEITHER, Distribution, ExtensionError,
                              OffManifoldError, SingularPointError, Submanifold,
                              accessibility_rank, characteristic_distribution,
                              classify_submanifold, dw_fiber, involutivity_check,
                              reduced_bracket_sample, reducibility_check)

B1, B2 = canonical(1), canonical(2)
E = np.eye(4)
HYPER = Submanifold.coordinate_zero([3], 4)        # {p2 = 0}
PLANE = Submanifold.coordinate_zero([1, 3], 4)     # {q2 = p2 = 0}
LINE = Submanifold.coordinate_zero([0], 2)         # {q = 0}
HEIS_X = VectorField(lambda z: np.array([1.0, 0.0, 0.0]))
HEIS_Y = VectorField(lambda z: np.array([0.0, 1.0, z[0]]))


def pts(rng, w, n=20):
    return w.sample(rng, n)


class TestSubmanifold:
    def test_sample_on_sphere(self, rng):
        sphere = Submanifold.level_set([ScalarField.quadratic(np.eye(3))], [0.5], 3)
        for z in sphere.sample(rng, 10):
            assert abs(z @ z - 1.0) < 1e-9 and sphere.is_regular_at(z)

    def test_tangent_orthogonal_to_gradient(self, rng):
        sphere = Submanifold.level_set([ScalarField.quadratic(np.eye(3))], [0.5], 3)
        z = sphere.sample(rng, 1)[0]
        t = sphere.tangent_at(z)
        assert t.dim == 2 and np.allclose(t.basis @ z, 0, atol=1e-12)

    def test_parametrized_matches_constrained(self, rng):
        circle = Submanifold(2, parametrization=lambda s: np.array([np.cos(s[0]), np.sin(s[0])]),
                             param_dim=1, param_inverse=lambda z: np.array([np.arctan2(z[1], z[0])]))
        z = circle.sample(rng, 1)[0]
        level = Submanifold.level_set([ScalarField.quadratic(np.eye(2))], [0.5], 2)
        assert circle.contains(z) and level.contains(z)
        assert subspace_distance(circle.tangent_at(z), level.tangent_at(z)) < 1e-6

    def test_singular_point(self):
        cone = Submanifold(2, lambda x: np.array([x[0] * x[1]]))
        assert not cone.is_regular_at(np.zeros(2))
        with pytest.raises(SingularPointError):
            cone.tangent_at(np.zeros(2))


class TestDWFiber:
    def test_hyperplane_with_coordinate_distribution(self):
        fiber = dw_fiber(Distribution.coordinate([1, 3], 4), HYPER, np.zeros(4))
        assert fiber.dim == 1 and fiber.contains(E[1])

    def test_zero_distribution(self):
        assert dw_fiber(Distribution.zero(4), Submanifold.whole(4), np.ones(4)).dim == 0

    def test_off_manifold(self):
        with pytest.raises(OffManifoldError):
            dw_fiber(Distribution.zero(4), HYPER, E[3])

    @settings(max_examples=40, deadline=None)
    @given(arrays(float, (2, 4), elements=st.floats(-2, 2, allow_nan=False)))
    def test_cosymplectic_plane_meets_characteristic_trivially(self, vecs):
        # a linear W = span(vecs) is cosymplectic when the form is nondegenerate on it
        j = B2(np.zeros(4))
        assume(np.linalg.matrix_rank(vecs, tol=1e-3) == 2)
        q, _ = np.linalg.qr(vecs.T)
        assume(abs(q[:, 0] @ j @ q[:, 1]) > 1e-2)
        basis = Subspace.span(vecs).basis
        comp = np.linalg.svd(np.vstack([basis, np.zeros((2, 4))]))[2][2:]
        w = Submanifold(4, lambda x: comp @ x, lambda x: comp)
        d = characteristic_distribution(B2, w)
        assert dw_fiber(d, w, np.zeros(4)).dim == 0
        assert classify_submanifold(B2, w, [np.zeros(4)]).labels == [COSYMPLECTIC]


class TestReducibility:
    def test_coisotropic_with_characteristic(self, rng):
        res = reducibility_check(B2, HYPER, characteristic_distribution(B2, HYPER), pts(rng, HYPER))
        assert res.verdict and res.max_residual < 1e-12 and res.tested == 20

    def test_cosymplectic_with_characteristic(self, rng):
        res = reducibility_check(B2, PLANE, characteristic_distribution(B2, PLANE), pts(rng, PLANE))
        assert res.verdict and res.max_residual < 1e-12

    def test_lagrangian_line_with_zero_distribution_fails(self, rng):
        res = reducibility_check(B1, LINE, Distribution.zero(2), pts(rng, LINE))
        assert not res.verdict and res.max_residual == pytest.approx(1.0)

    def test_curved_characteristic(self, rng):
        w = Submanifold.level_set([ScalarField.quadratic(E), ScalarField.coordinate(0)],
                                  [1.0, 0.0], 4)
        res = reducibility_check(B2, w, characteristic_distribution(B2, w), pts(rng, w))
        assert res.verdict and res.max_residual < 1e-7

    def test_singular_points_skipped(self):
        w = Submanifold(2, lambda x: np.array([x[0] * x[1]]))
        res = reducibility_check(B1, w, Distribution.zero(2), [np.zeros(2), np.array([1.0, 0.0])])
        assert res.skipped == 1 and res.tested == 1

    def test_rank_drop_skipped(self):
        d = Distribution((VectorField(lambda z: np.array([0.0, z[0]])),), 2)
        res = reducibility_check(B1, Submanifold.whole(2), d,
                                 [np.array([1.0, 0.0]), np.array([0.0, 1.0])])
        assert res.skipped == 1 and "distribution rank drop" in res.notes


class TestClassify:
    def test_hyperplane_coisotropic(self, rng):
        assert classify_submanifold(B2, HYPER, pts(rng, HYPER)).aggregate == COISOTROPIC

    def test_plane_cosymplectic(self, rng):
        assert classify_submanifold(B2, PLANE, pts(rng, PLANE)).aggregate == COSYMPLECTIC

    def test_lagrangian_line_coisotropic(self, rng):
        assert classify_submanifold(B1, LINE, pts(rng, LINE)).aggregate == COISOTROPIC

    def test_open_set_prefers_coisotropic(self):
        assert classify_submanifold(B2, Submanifold.whole(4), [np.ones(4)]).labels == [COISOTROPIC]

    def test_isotropic_line_neither(self):
        w = Submanifold.coordinate_zero([0, 1, 3], 4)
        assert classify_submanifold(B2, w, [np.zeros(4)]).labels == [NEITHER]

    def test_reparametrization_invariant(self, rng):
        cubic = Submanifold(4, lambda x: np.array([2 * x[3] + x[3] ** 3]))
        z = pts(rng, HYPER, 5)
        assert classify_submanifold(B2, cubic, z).labels == \
            classify_submanifold(B2, HYPER, z).labels

    def test_singular_points_listed_apart(self):
        w = Submanifold(2, lambda x: np.array([x[0] * x[1]]))
        out = classify_submanifold(B1, w, [np.zeros(2), np.array([1.0, 0.0])])
        assert len(out.singular) == 1 and len(out.labels) == 1


class TestCharacteristic:
    def test_hyperplane_generator(self, rng):
        d = characteristic_distribution(B2, HYPER)
        for z in pts(rng, HYPER, 5):
            assert np.allclose(d.values(z), [E[1]])

    def test_plane_generators(self):
        d = characteristic_distribution(B2, PLANE)
        assert subspace_distance(d.fiber_at(np.zeros(4)), Subspace.coordinate([1, 3], 4)) < 1e-12

    def test_whole_space_zero(self):
        assert characteristic_distribution(B2, Submanifold.whole(4)).generators == ()


class TestReducedBracket:
    def test_constant_along_leaf(self, rng):
        d = characteristic_distribution(B2, HYPER)
        f = ScalarField(lambda x: x[0] ** 2 * x[2], lambda x: np.array([2 * x[0] * x[2], 0, x[0] ** 2, 0]))
        g = ScalarField(lambda x: x[0] + 0.5 * x[2] ** 2, lambda x: np.array([1.0, 0, x[2], 0]))
        for z in pts(rng, HYPER, 10):
            other = z + 1.7 * E[1]
            s = reduced_bracket_sample(B2, HYPER, d, f, g, z, other)
            # {f, g} = f_q1 g_p1 - f_p1 g_q1 = 2 q1 p1^2 - q1^2
            assert s.value == pytest.approx(2 * z[0] * z[2] ** 2 - z[0] ** 2)
            assert s.residual < 1e-12

    def test_non_invariant_extension(self):
        d = characteristic_distribution(B2, HYPER)
        f = ScalarField.coordinate(0) + ScalarField.coordinate(1)
        with pytest.raises(ExtensionError):
            reduced_bracket_sample(B2, HYPER, d, f, ScalarField.coordinate(2), np.zeros(4), E[1])

    def test_off_manifold(self):
        d = characteristic_distribution(B2, HYPER)
        c = ScalarField.coordinate(0)
        with pytest.raises(OffManifoldError):
            reduced_bracket_sample(B2, HYPER, d, c, c, E[3], np.zeros(4))


class TestInvolutivity:
    def test_heisenberg_not_involutive_at_origin(self):
        ok, worst = involutivity_check(Distribution((HEIS_X, HEIS_Y), 3), [np.zeros(3)])
        assert not ok and worst >= 1 - 1e-6

    def test_coordinate_involutive(self, rng):
        ok, worst = involutivity_check(Distribution.coordinate([0, 2], 4), rng.normal(size=(5, 4)))
        assert ok and worst == 0


class TestAccessibility:
    def test_heisenberg_brackets_fill(self):
        assert accessibility_rank(None, [HEIS_X, HEIS_Y], np.zeros(3), depth=1) == 2
        assert accessibility_rank(None, [HEIS_X, HEIS_Y], np.zeros(3), depth=2) == 3

    def test_oscillator_with_momentum_push(self):
        drift = hamiltonian_field(B1, ScalarField.quadratic(np.eye(2)))
        push = VectorField.constant([0.0, 1.0])
        assert accessibility_rank(drift, [push], np.zeros(2)) == 2
        assert accessibility_rank(None, [push], np.zeros(2)) == 1
