import numpy as np
import pytest

from chpoisson.chsys import CHSystem, FiberMap, closed_loop_field
from chpoisson.equiv import (MatchingError, PhaseMap, SingularJacobianError, check_hm1,
                             check_hm2, conjugacy_field, cotangent_lift, linear_lift,
                             matching_rhs, poisson_map_residual, rhs_base_norm,
                             solve_control_law, solved_control, verify_conjugacy)
from chpoisson.pointlin import Subspace
from chpoisson.poisson import ScalarField, canonical
from chpoisson.reduce import Submanifold

B1, B2 = canonical(1), canonical(2)
H_OSC = ScalarField.quadratic(np.eye(2))
TRIPLE = linear_lift([[3.0]])


def pulled_back(lift, h, dim):
    t = lift.tangent(np.zeros(dim))
    return h.compose(lambda xb: t @ xb, lambda xb: t)


def oscillator_pair(force2=True):
    sys1 = CHSystem(B1, H_OSC, 1)
    sys2 = CHSystem(B1, pulled_back(TRIPLE, H_OSC, 2), 1,
                    force=FiberMap.identity(1) if force2 else None)
    return sys1, sys2


class TestCotangentLift:
    def test_identity(self, rng):
        lift = cotangent_lift(lambda q: q, lambda q: q, lambda q: np.eye(q.size))
        for xb in rng.normal(size=(5, 4)):
            assert np.allclose(lift(xb), xb) and np.allclose(lift.lower(xb), xb)

    def test_doubling(self):
        lift = cotangent_lift(lambda q: 2 * q, lambda q: q / 2)
        assert np.allclose(lift([4.0, 1.5]), [2.0, 3.0], atol=1e-8)
        assert np.allclose(lift.lower([2.0, 3.0]), [4.0, 1.5], atol=1e-8)

    def test_linear_matches_closed_form(self, rng):
        a = np.array([[2.0, 1.0], [0.5, 1.0]])
        a_inv = np.linalg.inv(a)
        lift = cotangent_lift(lambda q: a @ q, lambda q: a_inv @ q, lambda q: a)
        for xb in rng.normal(size=(5, 4)):
            expect = np.concatenate([a_inv @ xb[:2], a.T @ xb[2:]])
            assert np.allclose(lift(xb), expect) and np.allclose(linear_lift(a)(xb), expect)

    def test_composition_is_contravariant(self, rng):
        phi = cotangent_lift(np.sinh, np.arcsinh, lambda q: np.diag(np.cosh(q)))
        psi = cotangent_lift(lambda q: 2 * q + 1, lambda q: (q - 1) / 2, lambda q: np.eye(1) * 2)
        both = cotangent_lift(lambda q: 2 * np.sinh(q) + 1, lambda q: np.arcsinh((q - 1) / 2),
                              lambda q: np.diag(2 * np.cosh(q)))
        composed = phi.then(psi)
        for xb in rng.normal(size=(5, 2)):
            assert np.allclose(both(xb), composed(xb), atol=1e-12)
            assert np.allclose(composed.lower(composed(xb)), xb, atol=1e-12)

    def test_singular_jacobian(self):
        with pytest.raises(SingularJacobianError):
            cotangent_lift(lambda q: q ** 3, np.cbrt, lambda q: np.diag(3 * q ** 2),
                           sample=[np.zeros(1)])


class TestPoissonMatching:
    def test_canonical_lifts_are_poisson(self, rng):
        pts = rng.normal(size=(20, 4))
        assert poisson_map_residual(linear_lift([[2.0, 1.0], [0.5, 1.0]]), B2, B2, pts) < 1e-12
        lift = cotangent_lift(np.sinh, np.arcsinh, lambda q: np.diag(np.cosh(q)))
        assert poisson_map_residual(lift, B1, B1, rng.normal(size=(20, 2))) < 1e-6

    def test_scaling_momentum_only_is_not_poisson(self, rng):
        cand = PhaseMap(lambda x: np.array([x[0], 2 * x[1]]),
                        lambda x: np.array([x[0], x[1] / 2]), 1)
        assert poisson_map_residual(cand, B1, B1, rng.normal(size=(5, 2))) == pytest.approx(1.0)

    def test_control_subsets(self, rng):
        fiber_zero = Submanifold.coordinate_zero([1], 2)
        on_w2 = [np.array([x, 0.0]) for x in rng.normal(size=5)]
        ok = check_hm1(TRIPLE, B1, B1, fiber_zero, fiber_zero, on_w2, on_w2)
        assert ok.verdict and ok.poisson_residual < 1e-12
        bad = check_hm1(TRIPLE, B1, B1, Submanifold.coordinate_zero([0], 2), fiber_zero, on_w2)
        assert not bad.verdict and bad.w_forward_residual > 0


class TestMatching:
    def test_rhs_zero_without_forces(self, rng):
        sys1, sys2 = oscillator_pair(force2=False)
        for x in rng.normal(size=(5, 2)):
            assert np.linalg.norm(matching_rhs(TRIPLE, sys1, sys2, x)) < 1e-12

    def test_rhs_with_transported_force(self, rng):
        # H2 = qb^2/18 + 9 pb^2/2; the lifted identity force is (0, -qb/9), pushed to (0, -q)
        sys1, sys2 = oscillator_pair()
        for x in rng.normal(size=(5, 2)):
            assert np.allclose(matching_rhs(TRIPLE, sys1, sys2, x), [0.0, -x[0]], atol=1e-12)

    def test_hm2_full_fiber_vs_zero_subspace(self, rng):
        sys1, sys2 = oscillator_pair()
        pts = rng.normal(size=(10, 2))
        full = check_hm2(TRIPLE, sys1, sys2, pts)
        assert full.verdict and full.max_base_residual < 1e-12
        none = check_hm2(TRIPLE, sys1, sys2, pts, attainable=Subspace.zero(1))
        assert not none.verdict and none.unattainable_points == 10

    def test_unmatched_hamiltonian(self):
        sys1 = CHSystem(B1, H_OSC, 1)
        x = np.array([0.4, 0.9])
        # without the pullback the base part is p/9 - p
        assert rhs_base_norm(TRIPLE, sys1, sys1, x) == pytest.approx(8 / 9 * 0.9)
        with pytest.raises(MatchingError):
            solve_control_law(TRIPLE, sys1, sys1, FiberMap.zero_section(1), x)

    def test_solved_law_value(self):
        sys1, sys2 = oscillator_pair()
        u = solve_control_law(TRIPLE, sys1, sys2, FiberMap.zero_section(1), [0.5, 0.2])
        assert np.allclose(u, [0.0, -0.5])

    def test_solved_law_makes_fields_conjugate(self, rng):
        sys1, sys2 = oscillator_pair()
        u2 = FiberMap.zero_section(1)
        x1 = closed_loop_field(sys1, solved_control(TRIPLE, sys1, sys2, u2))
        pushed = conjugacy_field(TRIPLE, closed_loop_field(sys2, u2))
        for x in rng.normal(size=(5, 2)):
            assert np.allclose(x1(x), [x[1], -2 * x[0]]) and np.allclose(x1(x), pushed(x))


class TestConjugacy:
    def test_identity_pair(self):
        sys1 = CHSystem(B1, H_OSC, 1)
        u = FiberMap.zero_section(1)
        res = verify_conjugacy(linear_lift([[1.0]]), sys1, u, sys1, u, [0.3, 0.1], 1.0, 0.01)
        assert res.trajectory_residual == 0 and res.field_residual == 0

    def test_solved_vs_zeroed(self):
        sys1, sys2 = oscillator_pair()
        u2 = FiberMap.zero_section(1)
        solved = verify_conjugacy(TRIPLE, sys1, solved_control(TRIPLE, sys1, sys2, u2),
                                  sys2, u2, [0.7, -0.3], 3.0, 1e-2)
        zeroed = verify_conjugacy(TRIPLE, sys1, u2, sys2, u2, [0.7, -0.3], 3.0, 1e-2)
        assert solved.trajectory_residual < 1e-6
        assert zeroed.trajectory_residual > 1e-1
