"""Catalog group actions, momentum maps and symmetry-reduction checks.

Only linear configuration actions of S^1, SO(3), the trivial group and
products of these are supported.  Phase points of ``T*R^n`` are ordered
``(q, p)``; the lifted action is ``(g q, g^-T p)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial.transform import Rotation

from .chsys import FiberMap, integrate
from .poisson import (PoissonStructure, ScalarField, VectorField, bracket, canonical, hamiltonian_field,
                      hat, lie_poisson_so3)
from .reduce import (Distribution, Submanifold, OffManifoldError, characteristic_distribution,
                     classify_submanifold, reducibility_check)

ISOTROPY_TOL = 1e-9
CATALOG = ("S1", "SO3", "trivial", "product")


class CatalogError(ValueError):
    pass


class ChartError(ValueError):
    pass


_J2 = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class GroupAction:
    """Linear action ``q -> g q`` on R^n with its cotangent lift.

    ``basis`` holds the Lie algebra basis as n x n matrices and ``element``
    maps a parameter vector to a group matrix.
    """

    tag: str
    config_dim: int
    basis: tuple
    element: Callable[[np.ndarray], np.ndarray]
    param_dim: int
    parts: tuple = field(default_factory=tuple)

    @property
    def algebra_dim(self):
        return len(self.basis)

    @property
    def phase_dim(self):
        return 2 * self.config_dim

    def lifted_matrix(self, g):
        g = np.asarray(g, dtype=float)
        n = self.config_dim
        m = np.zeros((2 * n, 2 * n))
        m[:n, :n] = g
        m[n:, n:] = np.linalg.inv(g).T
        return m

    def act(self, g, x):
        return self.lifted_matrix(g) @ np.asarray(x, dtype=float)

    def algebra_element(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if self.algebra_dim == 0:
            return np.zeros((self.config_dim, self.config_dim))
        return sum(c * e for c, e in zip(coeffs, self.basis))

    def generator(self, coeffs):
        """Infinitesimal generator ``(xi q, -xi^T p)`` on phase space."""
        xi = self.algebra_element(coeffs)
        n = self.config_dim
        a = np.zeros((2 * n, 2 * n))
        a[:n, :n] = xi
        a[n:, n:] = -xi.T
        return VectorField.linear(a)

    def generators(self):
        return [self.generator(np.eye(self.algebra_dim)[k]) for k in range(self.algebra_dim)]

    def sample(self, rng, count):
        return [self.element(rng.uniform(-np.pi, np.pi, self.param_dim)) for _ in range(count)]

    def split(self, x):
        """Per-factor phase points for a product action."""
        x = np.asarray(x, dtype=float)
        n = self.config_dim
        q, p = x[:n], x[n:]
        out, start = [], 0
        for part in self.parts:
            k = part.config_dim
            out.append(np.concatenate([q[start:start + k], p[start:start + k]]))
            start += k
        return out


def s1_action():
    """Rotations of the plane acting diagonally on ``T*R^2``."""
    def element(theta):
        t = float(np.atleast_1d(theta)[0])
        return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
    return GroupAction("S1", 2, (_J2,), element, 1)


def so3_action():
    basis = tuple(hat(e) for e in np.eye(3))
    return GroupAction("SO3", 3, basis, lambda v: Rotation.from_rotvec(v).as_matrix(), 3)


def trivial_action(n):
    return GroupAction("trivial", n, (), lambda v: np.eye(n), 0)


def product_action(a, b):
    n = a.config_dim + b.config_dim

    def embed(m, first):
        out = np.zeros((n, n))
        if first:
            out[:a.config_dim, :a.config_dim] = m
        else:
            out[a.config_dim:, a.config_dim:] = m
        return out

    basis = tuple(embed(e, True) for e in a.basis) + tuple(embed(e, False) for e in b.basis)

    def element(v):
        v = np.asarray(v, dtype=float)
        return embed(a.element(v[:a.param_dim]), True) + embed(b.element(v[a.param_dim:]), False)
    return GroupAction("product", n, basis, element, a.param_dim + b.param_dim, parts=(a, b))


def is_invariant(action, obj, group_samples, points, tol=1e-10):
    """Invariance residual for a scalar field, fiber map (equivariance) or submanifold."""
    worst = 0.0
    for g in group_samples:
        for x in points:
            x = np.asarray(x, dtype=float)
            gx = action.act(g, x)
            if isinstance(obj, ScalarField):
                r = abs(obj(gx) - obj(x))
            elif isinstance(obj, FiberMap):
                r = float(np.linalg.norm(obj(gx) - action.act(g, obj(x))))
            elif isinstance(obj, Submanifold):
                r = obj.membership_residual(gx)
            else:
                raise TypeError(f"cannot test invariance of {type(obj).__name__}")
            worst = max(worst, r)
    return worst < tol, worst


def generator_matrix(action, z):
    z = np.asarray(z, dtype=float)
    if action.algebra_dim == 0:
        return np.zeros((z.size, 0))
    return np.column_stack([g(z) for g in action.generators()])


def isotropy_dim(action, z, tol=ISOTROPY_TOL):
    m = generator_matrix(action, z)
    if m.shape[1] == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    rank = int(np.sum(s > tol * max(1.0, float(np.linalg.norm(z)))))
    return action.algebra_dim - rank


def _pair_rank(x, n, tol):
    m = np.column_stack([x[:n], x[n:]])
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, float(np.linalg.norm(x)))))


def orbit_type_tag(action, z, tol=ISOTROPY_TOL):
    """Structural orbit-type label: isotropy dimension plus fixed-set data."""
    z = np.asarray(z, dtype=float)
    if action.tag == "trivial":
        return "trivial:free"
    if action.tag == "S1":
        return "S1:fixed" if isotropy_dim(action, z, tol) == 1 else "S1:free"
    if action.tag == "SO3":
        rank = _pair_rank(z, 3, tol)
        return {0: "SO3:origin", 1: "SO3:line", 2: "SO3:frame"}[rank]
    if action.tag == "product":
        return "x".join(orbit_type_tag(p, zp, tol) for p, zp in zip(action.parts, action.split(z)))
    raise CatalogError(f"no orbit-type rule for {action.tag}")


def stratify(action, points, tol=ISOTROPY_TOL):
    """Group point indices by ``(isotropy dimension, orbit-type tag)``."""
    strata = {}
    for i, z in enumerate(points):
        key = (isotropy_dim(action, z, tol), orbit_type_tag(action, z, tol))
        strata.setdefault(key, []).append(i)
    return strata


def isotropy_samples(action, z, rng, count=8, tol=ISOTROPY_TOL):
    """Group elements fixing ``z`` (catalog rules)."""
    z = np.asarray(z, dtype=float)
    n = action.config_dim
    if action.tag == "trivial":
        return [np.eye(n)]
    if action.tag == "S1":
        if isotropy_dim(action, z, tol) == 1:
            return action.sample(rng, count)
        return [np.eye(2)]
    if action.tag == "SO3":
        rank = _pair_rank(z, 3, tol)
        if rank == 0:
            return action.sample(rng, count)
        if rank == 1:
            axis = z[:3] if np.linalg.norm(z[:3]) > np.linalg.norm(z[3:]) else z[3:]
            axis = axis / np.linalg.norm(axis)
            return [Rotation.from_rotvec(a * axis).as_matrix()
                    for a in rng.uniform(-np.pi, np.pi, count)]
        return [np.eye(3)]
    if action.tag == "product":
        a, b = action.parts
        za, zb = action.split(z)
        out = []
        for ga in isotropy_samples(a, za, rng, count, tol):
            for gb in isotropy_samples(b, zb, rng, count, tol):
                m = np.zeros((n, n))
                m[:a.config_dim, :a.config_dim] = ga
                m[a.config_dim:, a.config_dim:] = gb
                out.append(m)
        return out
    raise CatalogError(f"no isotropy rule for {action.tag}")


def sharp_equivariance_residual(action, b, z, group_elements, covectors):
    """``max |k.B#(z) a - B#(z)(k.a)|`` for isotropy elements ``k`` of ``z``.

    Covectors transform by the inverse transpose of the lifted matrix.
    """
    bz = b(z)
    worst = 0.0
    for k in group_elements:
        lk = action.lifted_matrix(k)
        lk_dual = np.linalg.inv(lk).T
        for a in covectors:
            worst = max(worst, float(np.linalg.norm(lk @ bz @ a - bz @ lk_dual @ a)))
    return worst


@dataclass(frozen=True)
class MomentumMap:
    """``J_xi(q, p) = p . xi q`` for a cotangent-lifted linear action."""

    action: GroupAction

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        n = self.action.config_dim
        q, p = x[:n], x[n:]
        return np.array([p @ e @ q for e in self.action.basis])

    def pairing(self, coeffs, x):
        return float(np.asarray(coeffs, dtype=float) @ self(x))

    def component(self, k):
        e = self.action.basis[k]
        n = self.action.config_dim

        def grad(x):
            q, p = x[:n], x[n:]
            return np.concatenate([e.T @ p, e @ q])
        return ScalarField(lambda x: float(x[n:] @ e @ x[:n]), grad, name=f"J{k + 1}")

    def components(self):
        return [self.component(k) for k in range(self.action.algebra_dim)]

    def coadjoint_residual(self, group_elements, points):
        """``J(g x) = Ad*_{g^-1} J(x)`` checked via basis expansion of ``g^-1 E_k g``."""
        basis = np.array([e.ravel() for e in self.action.basis]).T
        worst = 0.0
        for g in group_elements:
            g_inv = np.linalg.inv(g)
            coeff = np.array([np.linalg.lstsq(basis, (g_inv @ e @ g).ravel(), rcond=None)[0]
                              for e in self.action.basis])
            for x in points:
                lhs = self(self.action.act(g, x))
                worst = max(worst, float(np.linalg.norm(lhs - coeff @ self(x))))
        return worst


def momentum_map(action):
    if action.tag not in CATALOG:
        raise CatalogError(f"no momentum map for non-catalog action {action.tag!r}")
    return MomentumMap(action)


def noether_drift(action, b, h, x0, t_final, dt, method="rk4"):
    """Largest change of any momentum component along the flow of ``h``."""
    traj = integrate(hamiltonian_field(b, h), x0, t_final, dt, method)
    jm = momentum_map(action)
    values = np.array([jm(x) for x in traj.states])
    return float(np.max(np.abs(values - values[0]))) if values.size else 0.0


def momentum_fiber(action, mu):
    """``J^-1(O_mu)`` as a constraint submanifold.

    Abelian catalog groups have point orbits, so ``J = mu``; for SO(3) the
    orbit is the sphere ``|J| = |mu|``.
    """
    jm = momentum_map(action)
    comps = jm.components()
    n = action.phase_dim
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if action.tag == "S1":
        return Submanifold.level_set(comps, mu, n)
    if action.tag == "SO3":
        r2 = float(mu @ mu) if mu.size == 3 else float(mu[0] ** 2)
        norm_sq = ScalarField(lambda x: float(jm(x) @ jm(x)),
                              lambda x: 2 * sum(c(x) * c.grad(x) for c in comps))
        return Submanifold.level_set([norm_sq], [r2], n)
    raise CatalogError(f"momentum fiber not catalogued for {action.tag}")


@dataclass
class FiberClassification:
    submanifold: Submanifold
    classification: object
    regular_points: list
    flagged: list

    @property
    def aggregate(self):
        return self.classification.aggregate


def momentum_fiber_coisotropy(action, b, mu, seeds):
    """Classify ``J^-1(O_mu)`` at projections of ``seeds``.

    Seeds where the constraint drops rank, or that project onto a rank-drop
    point, are flagged instead of classified.
    """
    w = momentum_fiber(action, mu)
    regular, flagged = [], []
    for s in seeds:
        s = np.asarray(s, dtype=float)
        if not w.is_regular_at(s):
            flagged.append(s)
            continue
        try:
            z = w.project(s)
        except (OffManifoldError, np.linalg.LinAlgError):
            flagged.append(s)
            continue
        (regular if w.is_regular_at(z) else flagged).append(z)
    cls = classify_submanifold(b, w, regular)
    return FiberClassification(w, cls, regular, flagged)


# rigid body: T*SO(3) in exponential coordinates (theta, p_theta), body momentum Pi

CHART_MARGIN = 1e-3


def right_jacobian(theta):
    """Body angular velocity is ``right_jacobian(theta) @ theta_dot``."""
    theta = np.asarray(theta, dtype=float)
    a = float(np.linalg.norm(theta))
    h = hat(theta)
    if a < 1e-6:
        return np.eye(3) - 0.5 * h + h @ h / 6.0
    return np.eye(3) - (1 - np.cos(a)) / a ** 2 * h + (a - np.sin(a)) / a ** 3 * h @ h


def body_momentum(x):
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x[:3]) >= np.pi - CHART_MARGIN:
        raise ChartError(f"|theta| = {np.linalg.norm(x[:3]):.4f} leaves the exponential chart")
    return np.linalg.solve(right_jacobian(x[:3]).T, x[3:])


def body_momentum_lift(theta, pi):
    """Phase point with chart coordinate ``theta`` and body momentum ``pi``."""
    return np.concatenate([theta, right_jacobian(theta).T @ np.asarray(pi, dtype=float)])


def sample_chart(rng, count, radius=2.5, momentum_box=2.0):
    out = []
    for _ in range(count):
        d = rng.normal(size=3)
        theta = d / np.linalg.norm(d) * radius * rng.uniform() ** (1 / 3)
        out.append(body_momentum_lift(theta, rng.uniform(-momentum_box, momentum_box, 3)))
    return out


def collective(f):
    """``f o body_momentum`` on the T*SO(3) chart (finite-difference gradient)."""
    return ScalarField(lambda x: f(body_momentum(x)), name=f"{f.name}o pi")


def lie_poisson_check(points, f, g):
    """``max |{f o pi, g o pi}_can - {f, g}_LP o pi|`` over chart points."""
    can, lp = canonical(3), lie_poisson_so3()
    upstairs = bracket(can, collective(f), collective(g))
    downstairs = bracket(lp, f, g)
    return max(abs(upstairs(x) - downstairs(body_momentum(x))) for x in points)


def rigid_body_energy(inertia):
    inertia = np.asarray(inertia, dtype=float)
    return ScalarField(lambda m: float(0.5 * np.sum(m * m / inertia)), lambda m: m / inertia,
                       name="rigid_body_energy")


# S^1 on T*R^2: Hilbert invariants and the reduced bracket

def hilbert_invariants():
    """``sigma1 = |q|^2, sigma2 = |p|^2, sigma3 = q.p, sigma4 = q1 p2 - q2 p1``."""
    def sig1(x): return float(x[:2] @ x[:2])
    def sig2(x): return float(x[2:] @ x[2:])
    def sig3(x): return float(x[:2] @ x[2:])
    def sig4(x): return float(x[0] * x[3] - x[1] * x[2])
    return [
        ScalarField(sig1, lambda x: np.concatenate([2 * x[:2], [0.0, 0.0]]), name="sigma1"),
        ScalarField(sig2, lambda x: np.concatenate([[0.0, 0.0], 2 * x[2:]]), name="sigma2"),
        ScalarField(sig3, lambda x: np.concatenate([x[2:], x[:2]]), name="sigma3"),
        ScalarField(sig4, lambda x: np.array([x[3], -x[2], -x[1], x[0]]), name="sigma4"),
    ]


def hilbert_map(x):
    return np.array([s(x) for s in hilbert_invariants()])


def hilbert_jacobian(x):
    return np.array([s.grad(x) for s in hilbert_invariants()])


# (i, j) -> (coefficient, index of sigma) with i < j, 0-based
_S1_TABLE = {(0, 1): (4.0, 2), (0, 2): (2.0, 0), (1, 2): (-2.0, 1)}


@dataclass(frozen=True)
class ReducedBracket:
    i: int
    j: int
    coeff: float
    index: int | None

    def __call__(self, sigma):
        if self.index is None:
            return 0.0
        return self.coeff * float(np.asarray(sigma)[self.index])

    @property
    def expression(self):
        if self.index is None:
            return "0"
        return f"{self.coeff:g}*sigma{self.index + 1}"


def singular_reduced_bracket_s1(i, j):
    """``{sigma_i, sigma_j}`` (1-based indices) as a function of the invariants."""
    if not (1 <= i <= 4 and 1 <= j <= 4):
        raise ValueError("invariant indices run from 1 to 4")
    a, b = i - 1, j - 1
    if (a, b) in _S1_TABLE:
        c, k = _S1_TABLE[(a, b)]
        return ReducedBracket(i, j, c, k)
    if (b, a) in _S1_TABLE:
        c, k = _S1_TABLE[(b, a)]
        return ReducedBracket(i, j, -c, k)
    return ReducedBracket(i, j, 0.0, None)


def reduced_s1_structure():
    """Poisson tensor on invariant space R^4 built from the bracket table."""
    def tensor(sigma):
        m = np.zeros((4, 4))
        for i in range(4):
            for j in range(4):
                m[i, j] = singular_reduced_bracket_s1(i + 1, j + 1)(sigma)
        return m
    sig4 = ScalarField(lambda s: float(s[3]), lambda s: np.array([0.0, 0, 0, 1]), name="sigma4")
    rel = ScalarField(lambda s: float(s[0] * s[1] - s[2] ** 2 - s[3] ** 2),
                      lambda s: np.array([s[1], s[0], -2 * s[2], -2 * s[3]]), name="relation")
    return PoissonStructure(4, tensor, kind="custom", casimirs=(sig4, rel))


def singular_bracket_residual(points):
    """Worst mismatch between canonical brackets of invariants and the table."""
    sig = hilbert_invariants()
    b = canonical(2)
    worst = 0.0
    for x in points:
        s = hilbert_map(x)
        for i in range(4):
            for j in range(4):
                up = bracket(b, sig[i], sig[j])(x)
                worst = max(worst, abs(up - singular_reduced_bracket_s1(i + 1, j + 1)(s)))
    return worst


# upstairs/downstairs reducibility comparison

@dataclass
class CrossCheckScenario:
    name: str
    b: PoissonStructure
    w: Submanifold
    d: Distribution
    points: list
    b_red: PoissonStructure
    w_red: Submanifold
    d_red: Distribution
    projection: Callable[[np.ndarray], np.ndarray]


@dataclass
class CrossCheckResult:
    upstairs: object
    downstairs: object

    @property
    def agree(self):
        return self.upstairs.verdict == self.downstairs.verdict


def reduction_crosscheck(scenario, tol=1e-7):
    down_points = [scenario.projection(x) for x in scenario.points]
    up = reducibility_check(scenario.b, scenario.w, scenario.d, scenario.points, tol)
    down = reducibility_check(scenario.b_red, scenario.w_red, scenario.d_red, down_points, tol)
    return CrossCheckResult(up, down)


def s1_free_scenario(rng, count, level=1.0):
    """``W = {J = level}`` in T*R^2 with D spanned by the S^1 generator."""
    action = s1_action()
    b = canonical(2)
    w = momentum_fiber(action, [level])
    d = Distribution(tuple(action.generators()), 4, name="S1 orbits")
    points = w.sample(rng, count)
    red = reduced_s1_structure()
    sig = [ScalarField(lambda s, k=k: float(s[k]),
                       lambda s, k=k: np.eye(4)[k]) for k in range(4)]
    w_red = Submanifold.level_set([sig[3], red.casimirs[1]], [level, 0.0], 4)
    # generators are tangent to orbits, so their pushforward vanishes
    return CrossCheckScenario("s1_free", b, w, d, points, red, w_red, Distribution.zero(4),
                              hilbert_map)


def rigid_body_scenario(rng, count, inertia=(1.0, 2.0, 3.0), s_max=0.9):
    """Energy-Casimir curve ``{|Pi|^2 = 1, H = 1/4}`` for inertia (1, 2, 3).

    Upstairs lives on the T*SO(3) chart with collective constraints; the
    curve is parametrised by ``Pi_2 = s``.
    """
    inertia = np.asarray(inertia, dtype=float)
    if not np.allclose(inertia, [1.0, 2.0, 3.0]):
        raise CatalogError("rigid-body cross-check curve is tabulated for inertia (1, 2, 3)")
    lp = lie_poisson_so3()
    casimir = lp.casimirs[0]
    energy = rigid_body_energy(inertia)
    values = [1.0, 0.25]
    w_red = Submanifold.level_set([casimir, energy], values, 3)
    d_red = characteristic_distribution(lp, w_red)
    w_up = Submanifold.level_set([collective(casimir), collective(energy)], values, 6)
    d_up = characteristic_distribution(canonical(3), w_up)
    points = []
    for _ in range(count):
        s = rng.uniform(-s_max, s_max)
        pi = np.array([rng.choice([-1, 1]) * np.sqrt(0.25 * (1 - s * s)), s,
                       rng.choice([-1, 1]) * np.sqrt(0.75 * (1 - s * s))])
        d = rng.normal(size=3)
        theta = d / np.linalg.norm(d) * 2.5 * rng.uniform() ** (1 / 3)
        points.append(body_momentum_lift(theta, pi))
    return CrossCheckScenario("rigid_body", canonical(3), w_up, d_up, points, lp, w_red, d_red,
                              body_momentum)


def trivial_scenario(rng, count):
    """Trivial group: the quotient is the space itself."""
    b = canonical(2)
    w = Submanifold.coordinate_zero([3], 4)
    d = characteristic_distribution(b, w)
    points = w.sample(rng, count)
    return CrossCheckScenario("trivial", b, w, d, points, b, w, d, lambda x: np.asarray(x))


def pushforward_residual(scenario, jacobian):
    """Check that ``D pi (D(x))`` lies in ``D_red(pi(x))`` on the scenario points."""
    worst = 0.0
    for x in scenario.points:
        target = scenario.d_red.fiber_at(scenario.projection(x))
        for v in scenario.d.values(x):
            pv = jacobian(x) @ v
            worst = max(worst, float(np.linalg.norm(pv - target.project(pv))))
    return worst
