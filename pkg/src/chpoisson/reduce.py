"""Control subsets, distributions and pointwise Poisson-reducibility checks.

The reducibility test works fibrewise: at a point ``z`` of an embedded
submanifold ``W`` with a regular distribution ``D`` the covectors killing
``D`` are ``D(z)°`` and the condition becomes

    B#(D(z)°)  ⊆  T_zW + D(z).

Rank-drop points of ``D`` are counted separately instead of being judged.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import pointlin
from .pointlin import Subspace
from .poisson import VectorField, bracket, fd_jacobian, lie_bracket

MEMB_TOL = 1e-10
INCLUSION_TOL = 1e-7
REGULAR_TOL = 1e-8


class OffManifoldError(ValueError):
    pass


class SingularPointError(ValueError):
    pass


class ExtensionError(ValueError):
    """A supplied extension is not constant along the distribution."""

    def __init__(self, name, derivative):
        super().__init__(f"extension {name} is not D-invariant: directional derivative "
                         f"{derivative:.3e}")
        self.derivative = derivative


@dataclass(frozen=True)
class Submanifold:
    """Embedded submanifold of R^N given by a constraint and/or a parametrization.

    A constraint ``c: R^N -> R^k`` must have a regular zero level; a
    parametrization maps ``R^d -> R^N``.  With neither, ``W`` is all of R^N.
    """

    ambient_dim: int
    constraint: Optional[Callable[[np.ndarray], np.ndarray]] = None
    constraint_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    parametrization: Optional[Callable[[np.ndarray], np.ndarray]] = None
    param_dim: Optional[int] = None
    param_inverse: Optional[Callable[[np.ndarray], np.ndarray]] = None
    memb_tol: float = MEMB_TOL
    name: str = ""

    @staticmethod
    def whole(n):
        return Submanifold(n, name="whole")

    @staticmethod
    def coordinate_zero(indices, n):
        """``{x_i = 0 for i in indices}``."""
        idx = list(indices)
        jac = np.eye(n)[idx]
        return Submanifold(n, lambda x: x[idx], lambda x: jac, name=f"x{idx}=0")

    @staticmethod
    def level_set(fields, values, n):
        """``{f_i(x) = v_i}`` from scalar fields."""
        values = np.asarray(values, dtype=float)
        return Submanifold(
            n, lambda x: np.array([f(x) for f in fields]) - values,
            lambda x: np.array([f.grad(x) for f in fields]).reshape(len(fields), n))

    @property
    def codim(self):
        if self.constraint is not None:
            return int(np.size(self.constraint(np.zeros(self.ambient_dim))))
        if self.parametrization is not None:
            return self.ambient_dim - self.param_dim
        return 0

    def cvalue(self, z):
        if self.constraint is None:
            return np.zeros(0)
        return np.atleast_1d(np.asarray(self.constraint(np.asarray(z, dtype=float)), dtype=float))

    def cjac(self, z):
        z = np.asarray(z, dtype=float)
        if self.constraint is None:
            return np.zeros((0, self.ambient_dim))
        if self.constraint_jacobian is not None:
            return np.atleast_2d(np.asarray(self.constraint_jacobian(z), dtype=float))
        return np.atleast_2d(fd_jacobian(lambda y: np.atleast_1d(self.constraint(y)), z))

    def membership_residual(self, z):
        if self.constraint is not None:
            return float(np.linalg.norm(self.cvalue(z)))
        if self.parametrization is not None and self.param_inverse is not None:
            z = np.asarray(z, dtype=float)
            return float(np.linalg.norm(self.parametrization(self._param_of(z)) - z))
        return 0.0

    def contains(self, z, tol=None):
        return self.membership_residual(z) < (self.memb_tol if tol is None else tol)

    def is_regular_at(self, z, tol=REGULAR_TOL):
        if self.constraint is None:
            if self.parametrization is None:
                return True
            j = fd_jacobian(self.parametrization, self._param_of(z))
            s = np.linalg.svd(j, compute_uv=False)
            return s.size == self.param_dim and s[-1] > tol
        j = self.cjac(z)
        s = np.linalg.svd(j, compute_uv=False)
        return s.size == j.shape[0] and s[-1] > tol * max(1.0, float(np.linalg.norm(z)))

    def _param_of(self, z):
        if self.param_inverse is None:
            raise ValueError("parametrized submanifold needs param_inverse to locate points")
        return np.asarray(self.param_inverse(np.asarray(z, dtype=float)), dtype=float)

    def tangent_at(self, z):
        z = np.asarray(z, dtype=float)
        if self.constraint is None:
            if self.parametrization is not None:
                return self.tangent_at_param(self._param_of(z))
            return Subspace.full(self.ambient_dim)
        if not self.is_regular_at(z):
            raise SingularPointError(f"constraint jacobian is rank deficient at {z}")
        return pointlin.annihilator(Subspace.span(self.cjac(z), self.ambient_dim, dual=True))

    def tangent_at_param(self, s):
        j = fd_jacobian(self.parametrization, np.asarray(s, dtype=float))
        return Subspace.span(j.T, self.ambient_dim)

    def conormal_at(self, z):
        return pointlin.annihilator(self.tangent_at(z))

    def project(self, z, max_iter=50):
        """Gauss-Newton (minimum-norm step) projection of ``z`` onto the zero set."""
        z = np.asarray(z, dtype=float).copy()
        if self.constraint is None:
            return z
        for _ in range(max_iter):
            c = self.cvalue(z)
            if np.linalg.norm(c) < self.memb_tol:
                return z
            z = z - np.linalg.pinv(self.cjac(z)) @ c
        if np.linalg.norm(self.cvalue(z)) >= self.memb_tol:
            raise OffManifoldError(f"projection did not converge (|c| = "
                                   f"{np.linalg.norm(self.cvalue(z)):.3e})")
        return z

    def sample(self, rng, count, box=(-2.0, 2.0)):
        """Seeded sample points on W; seeds that fail to project are redrawn."""
        lo, hi = box
        if self.parametrization is not None:
            return [np.asarray(self.parametrization(rng.uniform(lo, hi, self.param_dim)))
                    for _ in range(count)]
        out = []
        attempts = 0
        while len(out) < count:
            attempts += 1
            if attempts > 20 * count + 100:
                raise OffManifoldError("could not generate enough points on W")
            try:
                z = self.project(rng.uniform(lo, hi, self.ambient_dim))
            except (OffManifoldError, np.linalg.LinAlgError):
                continue
            if self.is_regular_at(z):
                out.append(z)
        return out


@dataclass(frozen=True)
class Distribution:
    """Distribution spanned by a finite family of vector fields near W."""

    generators: tuple
    ambient_dim: int
    claims: dict = field(default_factory=dict)
    name: str = ""

    @staticmethod
    def zero(n):
        return Distribution((), n, name="zero")

    @staticmethod
    def coordinate(indices, n):
        return Distribution(tuple(VectorField.constant(np.eye(n)[i]) for i in indices), n,
                            name=f"span e{list(indices)}")

    def values(self, z):
        z = np.asarray(z, dtype=float)
        if not self.generators:
            return np.zeros((0, self.ambient_dim))
        return np.array([g(z) for g in self.generators])

    def fiber_at(self, z):
        return Subspace.span(self.values(z), self.ambient_dim)

    def generic_rank(self, points):
        return max((self.fiber_at(z).dim for z in points), default=0)


def dw_fiber(d, w, z):
    """``D(z) cap T_zW``."""
    if not w.contains(z, max(w.memb_tol, 1e3 * w.memb_tol)):
        raise OffManifoldError(f"point is off W by {w.membership_residual(z):.3e}")
    return pointlin.subspace_intersect(d.fiber_at(z), w.tangent_at(z))


@dataclass
class CheckResult:
    verdict: bool
    residuals: list
    skipped: int = 0
    notes: list = field(default_factory=list)

    @property
    def max_residual(self):
        return max(self.residuals, default=0.0)

    @property
    def tested(self):
        return len(self.residuals)


def reducibility_residual(b_at_z, tangent, d_fiber):
    delta = pointlin.annihilator(d_fiber)
    target = pointlin.subspace_sum(tangent, d_fiber)
    return pointlin.inclusion_residual(pointlin.sharp_image(b_at_z, delta), target)


def reducibility_check(b, w, d, points, tol=INCLUSION_TOL):
    """Test ``B#(D(z)°) ⊆ T_zW + D(z)`` at every sample point.

    Points where the constraint jacobian drops rank, or where ``D`` has lower
    rank than elsewhere in the sample, are skipped and counted.
    """
    points = [np.asarray(z, dtype=float) for z in points]
    generic = d.generic_rank(points)
    residuals, skipped, notes = [], 0, []
    for z in points:
        if not w.is_regular_at(z):
            skipped += 1
            notes.append("singular constraint")
            continue
        fiber = d.fiber_at(z)
        if fiber.dim < generic:
            skipped += 1
            notes.append("distribution rank drop")
            continue
        residuals.append(reducibility_residual(b(z), w.tangent_at(z), fiber))
    verdict = bool(residuals) and max(residuals) < tol
    return CheckResult(verdict, residuals, skipped, notes)


COISOTROPIC, COSYMPLECTIC, NEITHER = "coisotropic", "cosymplectic", "neither"


def classify_at(b_at_z, tangent, leaf_tangent, tol=INCLUSION_TOL):
    """Label the point; coisotropy wins when both conditions hold (W open)."""
    char = pointlin.sharp_image(b_at_z, pointlin.annihilator(tangent))
    if pointlin.inclusion_residual(char, tangent) < tol:
        return COISOTROPIC
    meet = pointlin.subspace_intersect(char, tangent)
    spans = pointlin.subspace_sum(tangent, leaf_tangent).dim == tangent.ambient_dim
    if meet.dim == 0 and spans:
        return COSYMPLECTIC
    return NEITHER


@dataclass
class Classification:
    labels: list
    singular: list

    @property
    def aggregate(self):
        kinds = set(self.labels)
        if len(kinds) == 1:
            return kinds.pop()
        return "mixed" if kinds else "empty"

    def count(self, label):
        return self.labels.count(label)


def classify_submanifold(b, w, points, leaf_tangent_at=None, tol=INCLUSION_TOL):
    """Per-point coisotropic/cosymplectic labels; singular points are listed apart."""
    labels, singular = [], []
    for z in points:
        z = np.asarray(z, dtype=float)
        if not w.is_regular_at(z):
            singular.append(z)
            continue
        leaf = Subspace.full(w.ambient_dim) if leaf_tangent_at is None else leaf_tangent_at(z)
        labels.append(classify_at(b(z), w.tangent_at(z), leaf, tol))
    return Classification(labels, singular)


def characteristic_distribution(b, w):
    """Generators ``z -> B(z) grad c_i(z)`` for each constraint component."""
    if w.constraint is None:
        if w.parametrization is not None:
            raise ValueError("characteristic distribution needs a constraint representation")
        return Distribution.zero(w.ambient_dim)
    gens = tuple(VectorField(lambda z, i=i: b(z) @ w.cjac(z)[i], name=f"B# dc{i}")
                 for i in range(w.codim))
    return Distribution(gens, w.ambient_dim, name="characteristic")


@dataclass
class ReducedBracketSample:
    value: float
    value_other: float

    @property
    def residual(self):
        return abs(self.value - self.value_other)


def check_invariant_extension(f, d, z, tol=1e-8, name="f"):
    g = f.grad(z)
    worst = max((abs(float(g @ v)) for v in d.fiber_at(z).basis), default=0.0)
    if worst >= tol * max(1.0, float(np.linalg.norm(g))):
        raise ExtensionError(name, worst)
    return worst


def reduced_bracket_sample(b, w, d, f, g, m, m_other, tol=1e-8):
    """Bracket of D-invariant extensions at two points on the same leaf of ``D_W``.

    The caller guarantees that ``m`` and ``m_other`` lie on one leaf.
    """
    for z in (m, m_other):
        if not w.contains(z, 1e3 * w.memb_tol):
            raise OffManifoldError(f"point is off W by {w.membership_residual(z):.3e}")
        check_invariant_extension(f, d, z, tol, "f")
        check_invariant_extension(g, d, z, tol, "g")
    br = bracket(b, f, g)
    return ReducedBracketSample(br(m), br(m_other))


def involutivity_check(d, points, tol=1e-7):
    """Distance of every ``[X_i, X_j](z)`` to ``D(z)``; returns ``(ok, worst)``."""
    worst = 0.0
    gens = d.generators
    for z in points:
        fiber = d.fiber_at(z)
        for i in range(len(gens)):
            for j in range(i + 1, len(gens)):
                v = lie_bracket(gens[i], gens[j])(z)
                worst = max(worst, float(np.linalg.norm(v - fiber.project(v))))
    return worst < tol, worst


def accessibility_rank(drift, controls, z, depth=2, rank_tol=pointlin.RANK_TOL):
    """Rank at ``z`` of drift, controls and iterated brackets up to ``depth``.

    This is the Lie-algebra rank surrogate for accessibility; full rank does
    not prove controllability.
    """
    base = ([drift] if drift is not None else []) + list(controls)
    fields = list(base)
    layer = list(base)
    for _ in range(depth - 1):
        layer = [lie_bracket(a, b) for a in base for b in layer]
        fields += layer
    z = np.asarray(z, dtype=float)
    if not fields:
        return 0
    return Subspace.span(np.array([f(z) for f in fields]), z.size, rank_tol=rank_tol).dim
