import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from chpoisson.chsys import FiberMap
from chpoisson.poisson import (ScalarField, bracket, canonical, coordinate_jacobi_residual,
                               lie_poisson_so3)
from chpoisson.reduce import COISOTROPIC, NEITHER
from chpoisson.symmetry import (CatalogError, ChartError, body_momentum, hilbert_invariants,
                                hilbert_jacobian, hilbert_map, is_invariant, isotropy_dim,
                                isotropy_samples, lie_poisson_check, momentum_fiber,
                                momentum_fiber_coisotropy, momentum_map, noether_drift,
                                product_action, pushforward_residual, reduced_s1_structure,
                                reduction_crosscheck, rigid_body_energy, rigid_body_scenario,
                                s1_action, s1_free_scenario, sample_chart,
                                sharp_equivariance_residual, singular_bracket_residual,
                                singular_reduced_bracket_s1, so3_action, stratify,
                                trivial_action, trivial_scenario)

S1, SO3 = s1_action(), so3_action()
B2, B3 = canonical(2), canonical(3)
ENERGY4 = ScalarField.quadratic(np.eye(4))
LINE_POINT = np.array([1.0, 0.0, 0.0, 2.0, 0.0, 0.0])


class TestInvariance:
    def test_s1_energy_invariant(self, rng):
        ok, worst = is_invariant(S1, ENERGY4, S1.sample(rng, 5), rng.normal(size=(10, 4)))
        assert ok and worst < 1e-12

    def test_coordinate_not_invariant(self, rng):
        assert not is_invariant(S1, ScalarField.coordinate(0), S1.sample(rng, 5),
                                rng.normal(size=(10, 4)))[0]

    def test_identity_map_equivariant(self, rng):
        assert is_invariant(SO3, FiberMap.identity(3), SO3.sample(rng, 5),
                            rng.normal(size=(10, 6)))[0]

    def test_momentum_fiber_invariant(self, rng):
        w = momentum_fiber(SO3, [0.0, 0.0, 1.0])
        pts = w.sample(rng, 10)
        assert is_invariant(SO3, w, SO3.sample(rng, 5), pts, tol=1e-8)[0]

    def test_lifted_action_is_canonical(self, rng):
        j = B3(np.zeros(6))
        for g in SO3.sample(rng, 10):
            m = SO3.lifted_matrix(g)
            assert np.max(np.abs(m @ j @ m.T - j)) < 1e-12


class TestIsotropy:
    def test_dimensions(self, rng):
        assert isotropy_dim(S1, np.zeros(4)) == 1
        assert isotropy_dim(S1, rng.normal(size=4)) == 0
        assert isotropy_dim(SO3, np.zeros(6)) == 3
        assert isotropy_dim(SO3, LINE_POINT) == 1
        assert isotropy_dim(SO3, rng.normal(size=6)) == 0
        assert isotropy_dim(trivial_action(2), rng.normal(size=4)) == 0

    def test_stratify(self, rng):
        assert len(stratify(S1, [np.zeros(4), *rng.normal(size=(3, 4))])) == 2
        assert len(stratify(trivial_action(2), rng.normal(size=(4, 4)))) == 1
        strata = stratify(SO3, [np.zeros(6), LINE_POINT, rng.normal(size=6)])
        assert {tag for _, tag in strata} == {"SO3:origin", "SO3:line", "SO3:frame"}

    def test_product_tags(self, rng):
        prod = product_action(S1, trivial_action(1))
        x = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 2.0])
        assert stratify(prod, [x]) == {(1, "S1:fixedxtrivial:free"): [0]}

    def test_isotropy_samples_fix_point(self, rng):
        for z in (np.zeros(6), LINE_POINT):
            for k in isotropy_samples(SO3, z, rng):
                assert np.allclose(SO3.act(k, z), z)

    def test_sharp_equivariance_at_fixed_points(self, rng):
        for action, b, z in ((S1, B2, np.zeros(4)), (SO3, B3, np.zeros(6)), (SO3, B3, LINE_POINT)):
            ks = isotropy_samples(action, z, rng)
            covs = rng.normal(size=(4, z.size))
            assert sharp_equivariance_residual(action, b, z, ks, covs) < 1e-8


class TestMomentum:
    def test_s1_angular_momentum(self, rng):
        jm = momentum_map(S1)
        for x in rng.normal(size=(5, 4)):
            assert jm(x)[0] == pytest.approx(x[0] * x[3] - x[1] * x[2])

    def test_so3_cross_product(self, rng):
        jm = momentum_map(SO3)
        for x in rng.normal(size=(5, 6)):
            assert np.allclose(jm(x), np.cross(x[:3], x[3:]))

    def test_component_gradients(self, rng):
        x = rng.normal(size=6)
        for c in momentum_map(SO3).components():
            assert np.allclose(c.grad(x), c.fd_grad(x), atol=1e-8)

    def test_coadjoint_equivariance(self, rng):
        jm = momentum_map(SO3)
        assert jm.coadjoint_residual(SO3.sample(rng, 5), rng.normal(size=(5, 6))) < 1e-10

    def test_noether(self):
        h = ScalarField.quadratic(np.diag([1.0, 1.0, 2.0, 2.0])) + \
            ScalarField(lambda x: 0.1 * (x[:2] @ x[:2]) ** 2,
                        lambda x: np.concatenate([0.4 * (x[:2] @ x[:2]) * x[:2], [0, 0]]))
        assert noether_drift(S1, B2, h, [1.0, 0.2, -0.3, 0.5], 5.0, 1e-3) < 1e-7

    def test_non_invariant_hamiltonian_breaks_noether(self):
        h = ScalarField.quadratic(np.diag([1.0, 3.0, 1.0, 1.0]))
        assert noether_drift(S1, B2, h, [1.0, 0.2, -0.3, 0.5], 5.0, 1e-2) > 1e-2

    def test_trivial_fiber_not_catalogued(self):
        with pytest.raises(CatalogError):
            momentum_fiber(trivial_action(2), [0.0])


class TestFiberCoisotropy:
    def test_so3_unit_sphere(self, rng):
        res = momentum_fiber_coisotropy(SO3, B3, [0.0, 0.0, 1.0], rng.normal(size=(30, 6)))
        assert res.aggregate == COISOTROPIC and res.classification.count(NEITHER) == 0
        assert len(res.regular_points) == 30

    def test_s1_level(self, rng):
        res = momentum_fiber_coisotropy(S1, B2, [1.0], rng.normal(size=(20, 4)))
        assert res.aggregate == COISOTROPIC

    def test_zero_level_flagged(self, rng):
        res = momentum_fiber_coisotropy(SO3, B3, [0.0, 0.0, 0.0],
                                        [np.zeros(6), LINE_POINT])
        assert len(res.flagged) == 2 and res.regular_points == []
        s1 = momentum_fiber_coisotropy(S1, B2, [0.0], [np.zeros(4)])
        assert len(s1.flagged) == 1


class TestRigidBody:
    def test_collective_brackets(self, rng):
        pts = sample_chart(rng, 10)
        coords = [ScalarField.coordinate(i) for i in range(3)]
        assert lie_poisson_check(pts, coords[0], coords[1]) < 1e-6
        casimir = lie_poisson_so3().casimirs[0]
        assert lie_poisson_check(pts, casimir, coords[2]) < 1e-6

    def test_minus_convention(self, rng):
        lp = lie_poisson_so3()
        mu = rng.normal(size=3)
        assert bracket(lp, ScalarField.coordinate(0), ScalarField.coordinate(1))(mu) == \
            pytest.approx(-mu[2])
        assert abs(bracket(lp, lp.casimirs[0], rigid_body_energy([1, 2, 3]))(mu)) < 1e-12

    def test_chart_boundary(self):
        with pytest.raises(ChartError):
            body_momentum(np.array([np.pi, 0, 0, 1.0, 0, 0]))


class TestSingularS1:
    def test_table_against_symbolic_brackets(self):
        q1, q2, p1, p2 = sp.symbols("q1 q2 p1 p2")
        sig = [q1 ** 2 + q2 ** 2, p1 ** 2 + p2 ** 2, q1 * p1 + q2 * p2, q1 * p2 - q2 * p1]

        def pb(f, g):
            return sp.expand(sum(sp.diff(f, q) * sp.diff(g, p) - sp.diff(f, p) * sp.diff(g, q)
                                 for q, p in ((q1, p1), (q2, p2))))
        for i in range(4):
            for j in range(4):
                entry = singular_reduced_bracket_s1(i + 1, j + 1)
                expect = 0 if entry.index is None else entry.coeff * sig[entry.index]
                assert sp.expand(pb(sig[i], sig[j]) - expect) == 0

    def test_table_entries(self):
        assert singular_reduced_bracket_s1(1, 2).expression == "4*sigma3"
        assert singular_reduced_bracket_s1(2, 1).expression == "-4*sigma3"
        assert all(singular_reduced_bracket_s1(4, k).index is None for k in range(1, 5))
        with pytest.raises(ValueError):
            singular_reduced_bracket_s1(0, 5)

    def test_numeric_residual(self, rng):
        assert singular_bracket_residual(rng.normal(size=(20, 4))) < 1e-10

    def test_reduced_structure_is_poisson(self, rng):
        red = reduced_s1_structure()
        sig = hilbert_map(rng.normal(size=(4,)))
        assert red.antisymmetry_residual([sig]) == 0
        assert coordinate_jacobi_residual(red, [hilbert_map(x) for x in rng.normal(size=(5, 4))]) < 1e-6

    @settings(max_examples=100, deadline=None)
    @given(arrays(float, 4, elements=st.floats(-10, 10, allow_nan=False)))
    def test_relation(self, x):
        s = hilbert_map(x)
        assert abs(s[0] * s[1] - s[2] ** 2 - s[3] ** 2) <= 1e-10 * max(1.0, s[0] * s[1])
        assert np.all(s[:2] >= 0)

    def test_jacobian(self, rng):
        x = rng.normal(size=4)
        fd = np.array([f.fd_grad(x) for f in hilbert_invariants()])
        assert np.allclose(hilbert_jacobian(x), fd, atol=1e-8)


class TestCrossCheck:
    @pytest.mark.parametrize("build", [s1_free_scenario, trivial_scenario, rigid_body_scenario])
    def test_verdicts_agree(self, rng, build):
        res = reduction_crosscheck(build(rng, 10))
        assert res.agree and res.upstairs.verdict and res.upstairs.tested == 10

    def test_s1_generators_project_to_zero(self, rng):
        assert pushforward_residual(s1_free_scenario(rng, 5), hilbert_jacobian) < 1e-12

    def test_rigid_body_other_inertia(self, rng):
        with pytest.raises(CatalogError):
            rigid_body_scenario(rng, 2, inertia=(1, 1, 2))
