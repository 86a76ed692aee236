"""CH-equivalence: cotangent lifts, matching conditions and control-law recovery.

Conventions.  ``phi: Q1 -> Q2`` and its lift ``phi_star: T*Q2 -> T*Q1`` is
``(qb, pb) -> (phi^-1(qb), Dphi(phi^-1(qb))^T pb)``; ``phi_lower`` is the
inverse map ``T*Q1 -> T*Q2``.  Terms of the matching relation that come from
system 2 are evaluated at ``phi_lower(x)`` and transported by ``T phi_star``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .chsys import (LiftedControl, closed_loop_field, integrate, vertical_lift)
from .pointlin import Subspace
from .poisson import VectorField, fd_jacobian

HM_TOL = 1e-8


class SingularJacobianError(ValueError):
    pass


class MatchingError(ValueError):
    pass


@dataclass(frozen=True)
class PhaseMap:
    """A diffeomorphism ``T*Q2 -> T*Q1`` together with its inverse.

    :func:`cotangent_lift` produces these; arbitrary candidate maps can be
    wrapped directly to exercise the matching checks.
    """

    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    base_dim: int
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def __call__(self, xb):
        return np.asarray(self.forward(np.asarray(xb, dtype=float)), dtype=float)

    def lower(self, x):
        return np.asarray(self.inverse(np.asarray(x, dtype=float)), dtype=float)

    def tangent(self, xb):
        xb = np.asarray(xb, dtype=float)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(xb), dtype=float)
        return fd_jacobian(self.forward, xb)

    def push(self, xb, v):
        """``T phi_star`` applied to a tangent vector at ``xb``."""
        return self.tangent(xb) @ np.asarray(v, dtype=float)

    def then(self, other):
        """``self o other`` (apply ``other`` first)."""
        return PhaseMap(lambda x: self(other(x)), lambda x: other.lower(self.lower(x)),
                        self.base_dim)


def cotangent_lift(phi, phi_inv, dphi=None, base_dim=None, sample=None):
    """Lift of a configuration diffeomorphism to ``phi_star: T*Q2 -> T*Q1``.

    ``dphi`` defaults to a finite-difference jacobian.  When ``sample`` base
    points are given the jacobian is checked for invertibility there.
    """
    def jac(q):
        q = np.asarray(q, dtype=float)
        return np.atleast_2d(dphi(q) if dphi is not None else fd_jacobian(phi, q))

    if sample is not None:
        for q in sample:
            s = np.linalg.svd(jac(q), compute_uv=False)
            if s[-1] < 1e-12 * max(1.0, s[0]):
                raise SingularJacobianError(f"Dphi is singular at {q}")

    def split(x):
        n = x.size // 2 if base_dim is None else base_dim
        return x[:n], x[n:]

    def forward(xb):
        qb, pb = split(xb)
        q = np.atleast_1d(phi_inv(qb))
        return np.concatenate([q, jac(q).T @ pb])

    def inverse(x):
        q, p = split(x)
        return np.concatenate([np.atleast_1d(phi(q)), np.linalg.solve(jac(q).T, p)])

    n = base_dim
    return PhaseMap(forward, inverse, n if n is not None else -1, name="cotangent_lift")


def linear_lift(a):
    """Lift of ``q -> A q``: ``(qb, pb) -> (A^-1 qb, A^T pb)`` with exact tangent map."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[0]
    a_inv = np.linalg.inv(a)
    t = np.zeros((2 * n, 2 * n))
    t[:n, :n] = a_inv
    t[n:, n:] = a.T
    t_inv = np.linalg.inv(t)
    return PhaseMap(lambda xb: t @ xb, lambda x: t_inv @ x, n, jacobian=lambda xb: t,
                    name="linear_lift")


def _base_dim(lift, sys1):
    return lift.base_dim if lift.base_dim >= 0 else sys1.base_dim


@dataclass
class HM1Result:
    verdict: bool
    poisson_residual: float
    w_forward_residual: float
    w_reverse_residual: float


def poisson_map_residual(lift, b1, b2, points):
    """``max |{x_i o phi*, x_j o phi*}_B2 - {x_i, x_j}_B1 o phi*|`` over coordinates."""
    worst = 0.0
    for xb in points:
        t = lift.tangent(xb)
        pulled = t @ b2(xb) @ t.T
        worst = max(worst, float(np.max(np.abs(pulled - b1(lift(xb))))))
    return worst


def check_hm1(lift, b1, b2, w1, w2, points, w1_points=(), tol=HM_TOL):
    """Poisson-map test plus ``W1 = phi*(W2)`` on samples in both directions.

    ``points`` are samples of ``T*Q2`` (the domain of ``phi_star``);
    ``w1_points`` are samples of ``W1`` used for the reverse coverage test.
    """
    points = [np.asarray(x, dtype=float) for x in points]
    pres = poisson_map_residual(lift, b1, b2, points)
    fwd = rev = 0.0
    if w1 is not None and w2 is not None:
        on_w2 = [x for x in points if w2.contains(x, 1e3 * w2.memb_tol)]
        fwd = max((w1.membership_residual(lift(x)) for x in on_w2), default=0.0)
        rev = max((w2.membership_residual(lift.lower(x)) for x in w1_points), default=0.0)
    memb = max(getattr(w1, "memb_tol", 0.0), 1e-10) * 1e3
    return HM1Result(pres < tol and fwd < memb and rev < memb, pres, fwd, rev)


def transported_lift(lift, m2, sys2, x):
    """``T phi_star (vlift(m2) X_H2)`` at ``phi_lower(x)``: the lift of ``phi* m2 phi_*``."""
    xb = lift.lower(x)
    if isinstance(m2, LiftedControl):
        v = m2(xb)
    else:
        v = vertical_lift(m2, sys2.hamiltonian_field(), xb, sys2.lift_reading)
    return lift.push(xb, v)


def matching_rhs(lift, sys1, sys2, x):
    """Right-hand side of the control-law relation at ``x`` in ``T*Q1``.

    ``-X_H1 - vlift(F1) + T phi*(X_H2) + vlift(phi* F2 phi_*)``.  Only its
    fiber part can be absorbed by a control, so the base part is reported by
    :func:`rhs_base_norm`.
    """
    x = np.asarray(x, dtype=float)
    xh1 = sys1.hamiltonian_field()
    xb = lift.lower(x)
    rhs = -xh1(x) + lift.push(xb, sys2.hamiltonian_field()(xb))
    if sys1.force is not None:
        rhs -= vertical_lift(sys1.force, xh1, x, sys1.lift_reading)
    if sys2.force is not None:
        rhs += transported_lift(lift, sys2.force, sys2, x)
    return rhs


def rhs_base_norm(lift, sys1, sys2, x):
    """Norm of the base part of :func:`matching_rhs`; must vanish for the lifts to match."""
    n = _base_dim(lift, sys1)
    return float(np.linalg.norm(matching_rhs(lift, sys1, sys2, x)[:n]))


def _attainable(spec, v, tol):
    if spec is None:
        return True
    if isinstance(spec, Subspace):
        return np.linalg.norm(v - spec.project(v)) < tol
    if isinstance(spec, tuple) and len(spec) == 2:
        lo, hi = (np.asarray(s, dtype=float) for s in spec)
        return bool(np.all(v >= lo - tol) and np.all(v <= hi + tol))
    return bool(spec(v))


@dataclass
class HM2Result:
    verdict: bool
    max_base_residual: float
    unattainable_points: int


def check_hm2(lift, sys1, sys2, points, attainable=None, tol=HM_TOL):
    """Matching RHS must be vertical with fiber part in the attainable set.

    ``attainable`` is a :class:`Subspace` of fiber directions, a ``(lo, hi)``
    box, a predicate, or ``None`` for the whole fiber.
    """
    n = _base_dim(lift, sys1)
    worst, bad = 0.0, 0
    for x in points:
        rhs = matching_rhs(lift, sys1, sys2, x)
        base = float(np.linalg.norm(rhs[:n]))
        worst = max(worst, base)
        if base >= tol or not _attainable(attainable, rhs[n:], tol):
            bad += 1
    return HM2Result(worst < tol and bad == 0, worst, bad)


def solve_control_law(lift, sys1, sys2, u2, x, tol=1e-7):
    """Vertical-lift value of the control ``u1`` that matches ``u2`` at ``x``."""
    x = np.asarray(x, dtype=float)
    rhs = matching_rhs(lift, sys1, sys2, x)
    n = _base_dim(lift, sys1)
    if np.linalg.norm(rhs[:n]) >= tol * max(1.0, np.linalg.norm(rhs)):
        raise MatchingError(f"matching RHS is not vertical (base part "
                            f"{np.linalg.norm(rhs[:n]):.3e})")
    out = rhs + transported_lift(lift, u2, sys2, x)
    out[:n] = 0.0
    return out


def solved_control(lift, sys1, sys2, u2):
    return LiftedControl(lambda x: solve_control_law(lift, sys1, sys2, u2, x),
                         _base_dim(lift, sys1), name="solved_u1")


@dataclass
class ConjugacyResult:
    trajectory_residual: float
    field_residual: float
    traj1: object
    traj2: object


def verify_conjugacy(lift, sys1, u1, sys2, u2, x0_2, t_final, dt, method="rk4"):
    """Integrate both closed loops and compare ``phi*(x2(t))`` with ``x1(t)``."""
    x1_field = closed_loop_field(sys1, u1)
    x2_field = closed_loop_field(sys2, u2)
    x0_2 = np.asarray(x0_2, dtype=float)
    traj2 = integrate(x2_field, x0_2, t_final, dt, method)
    traj1 = integrate(x1_field, lift(x0_2), t_final, dt, method)
    mapped = np.array([lift(x) for x in traj2.states])
    traj_res = float(np.max(np.linalg.norm(mapped - traj1.states, axis=1)))
    stride = max(1, len(traj2.states) // 50)
    field_res = max(float(np.linalg.norm(x1_field(lift(x)) - lift.push(x, x2_field(x))))
                    for x in traj2.states[::stride])
    return ConjugacyResult(traj_res, field_res, traj1, traj2)


def conjugacy_field(lift, x2_field):
    """``T phi* X2 o phi_*`` as a field on ``T*Q1``."""
    return VectorField(lambda x: lift.push(lift.lower(x), x2_field(lift.lower(x))))
