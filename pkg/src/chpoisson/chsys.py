"""Controlled Hamiltonian systems on T*Q charts.

Phase points are flat arrays ``(q_1..q_n, p_1..p_n)``; the first ``base_dim``
entries are base coordinates and the rest are fiber coordinates.  A reduced
system (for instance on so(3)*) uses ``base_dim = 0``, so every direction is
vertical.

Three readings of the vertical lift ``vlift(M) X`` are available:

``pushforward`` (default)
    fiber part of ``DM(x) X(x)``.
``pushforward_at_image``
    fiber part of ``DM(x) X(M(x))``.
``fiber_value``
    the fiber part of ``M(x)`` itself, i.e. ``M`` read as a force covector.

All three leave the base component exactly zero.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .poisson import (PoissonStructure, ScalarField, VectorField, fd_jacobian,
                      hamiltonian_field)

READINGS = ("pushforward", "pushforward_at_image", "fiber_value")
CLAMP_TOL = 1e-6


class NotFiberPreservingError(ValueError):
    pass


class ControlError(ValueError):
    pass


class IntegrationError(RuntimeError):
    def __init__(self, step, t):
        super().__init__(f"non-finite state at step {step} (t = {t:.6g})")
        self.step = step
        self.t = t


@dataclass(frozen=True)
class FiberMap:
    """A map ``(q, p) -> (q, p')`` on phase space."""

    func: Callable[[np.ndarray], np.ndarray]
    base_dim: int
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def jac(self, x):
        x = np.asarray(x, dtype=float)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(x), dtype=float)
        return fd_jacobian(self.func, x)

    @staticmethod
    def identity(base_dim):
        return FiberMap(lambda x: x.copy(), base_dim, lambda x: np.eye(x.size), name="identity")

    @staticmethod
    def zero_section(base_dim):
        """``(q, p) -> (q, 0)``; its vertical lift vanishes under every reading."""
        def func(x):
            y = np.zeros_like(x)
            y[:base_dim] = x[:base_dim]
            return y

        def jac(x):
            j = np.zeros((x.size, x.size))
            j[:base_dim, :base_dim] = np.eye(base_dim)
            return j
        return FiberMap(func, base_dim, jac, name="zero")

    @staticmethod
    def fiber_affine(base_dim, from_base, from_fiber, offset=None):
        """``p' = A q + C p + d``, base untouched."""
        a = np.atleast_2d(np.asarray(from_base, dtype=float))
        c = np.atleast_2d(np.asarray(from_fiber, dtype=float))
        m = c.shape[0]
        a = a.reshape(m, base_dim)
        d = np.zeros(m) if offset is None else np.asarray(offset, dtype=float)
        jac = np.zeros((base_dim + m, base_dim + m))
        jac[:base_dim, :base_dim] = np.eye(base_dim)
        jac[base_dim:, :base_dim] = a
        jac[base_dim:, base_dim:] = c

        def func(x):
            return np.concatenate([x[:base_dim], a @ x[:base_dim] + c @ x[base_dim:] + d])
        return FiberMap(func, base_dim, lambda x: jac, name="fiber_affine")


@dataclass(frozen=True)
class LiftedControl:
    """A control known only through its vertical-lift value at each point."""

    func: Callable[[np.ndarray], np.ndarray]
    base_dim: int
    name: str = ""

    def __call__(self, x):
        v = np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float).copy()
        v[:self.base_dim] = 0.0
        return v


@dataclass
class CHSystem:
    """Phase structure, Hamiltonian, force map, control subset and optional control law."""

    structure: PoissonStructure
    hamiltonian: ScalarField
    base_dim: int
    force: Optional[FiberMap] = None
    control_subset: Optional[object] = None
    control: Optional[object] = None
    lift_reading: str = "pushforward"
    name: str = ""

    def __post_init__(self):
        if self.lift_reading not in READINGS:
            raise ValueError(f"unknown lift reading {self.lift_reading!r}")
        if not 0 <= self.base_dim <= self.structure.dim:
            raise ValueError("base_dim out of range")

    @property
    def dim(self):
        return self.structure.dim

    def hamiltonian_field(self):
        return hamiltonian_field(self.structure, self.hamiltonian)


def fiber_residual(m, x):
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(m(x)[:m.base_dim] - x[:m.base_dim]))


def is_fiber_preserving(m, points, tol=1e-10):
    """Return ``(ok, max_residual)`` for the base-coordinate test."""
    worst = max((fiber_residual(m, x) for x in points), default=0.0)
    return worst < tol, worst


def vertical_lift(m, x_field, x, reading="pushforward", tol=1e-10):
    x = np.asarray(x, dtype=float)
    if fiber_residual(m, x) >= tol * max(1.0, np.linalg.norm(x)):
        raise NotFiberPreservingError(
            f"map moves the base point by {fiber_residual(m, x):.3e}")
    if reading == "pushforward":
        v = m.jac(x) @ x_field(x)
    elif reading == "pushforward_at_image":
        v = m.jac(x) @ x_field(m(x))
    elif reading == "fiber_value":
        v = m(x)
    else:
        raise ValueError(f"unknown lift reading {reading!r}")
    out = np.zeros_like(x)
    out[m.base_dim:] = v[m.base_dim:]
    return out


def _control_term(sys, u, xh, x):
    if isinstance(u, LiftedControl):
        return u(x)
    if sys.control_subset is not None:
        value = u(x)
        resid = sys.control_subset.membership_residual(value)
        if resid > CLAMP_TOL:
            raise ControlError(f"control value leaves W by {resid:.3e}")
        # only the fiber_value reading consumes the value itself
        if sys.lift_reading == "fiber_value" and resid > sys.control_subset.memb_tol:
            out = np.zeros_like(x)
            out[u.base_dim:] = sys.control_subset.project(value)[u.base_dim:]
            return out
    return vertical_lift(u, xh, x, sys.lift_reading)


def closed_loop_field(sys, u=None):
    """``X_H + vlift(F) X_H + vlift(u) X_H``."""
    u = u if u is not None else sys.control
    if u is None:
        raise ControlError("no control law supplied and the system has none")
    xh = sys.hamiltonian_field()
    force = sys.force

    def func(x):
        out = xh(x)
        if force is not None:
            out = out + vertical_lift(force, xh, x, sys.lift_reading)
        return out + _control_term(sys, u, xh, x)
    return VectorField(func, name="closed_loop")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def to_csv(self, hamiltonian=None, casimirs=()):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        n = self.states.shape[1]
        header = ["t"] + [f"x{i + 1}" for i in range(n)]
        if hamiltonian is not None:
            header.append("H")
        header += [c.name or f"C{i + 1}" for i, c in enumerate(casimirs)]
        writer.writerow(header)
        for t, x in zip(self.times, self.states):
            row = [repr(float(t))] + [repr(float(v)) for v in x]
            if hamiltonian is not None:
                row.append(repr(hamiltonian(x)))
            row += [repr(c(x)) for c in casimirs]
            writer.writerow(row)
        return buf.getvalue()

    def to_json(self):
        return json.dumps({"t": self.times.tolist(), "states": self.states.tolist(),
                           "diagnostics": self.diagnostics}, sort_keys=True)


def _rk4_step(f, x, dt):
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _midpoint_step(f, x, dt):
    return x + dt * f(x + 0.5 * dt * f(x))


def integrate(x_field, x0, t_final, dt, method="rk4"):
    """Fixed-step integration; the final step is shortened to land on ``t_final``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    step = {"rk4": _rk4_step, "midpoint": _midpoint_step}.get(method)
    if step is None:
        raise ValueError(f"unknown method {method!r}")
    nsteps = int(np.ceil(t_final / dt - 1e-9)) if t_final > 0 else 0
    x = np.asarray(x0, dtype=float).copy()
    times = np.empty(nsteps + 1)
    states = np.empty((nsteps + 1, x.size))
    times[0], states[0] = 0.0, x
    t = 0.0
    for k in range(1, nsteps + 1):
        h = min(dt, t_final - t) if k == nsteps else dt
        x = step(x_field, x, h)
        t = t_final if k == nsteps else k * dt
        if not np.all(np.isfinite(x)):
            raise IntegrationError(k, t)
        times[k], states[k] = t, x
    return Trajectory(times, states)


@dataclass
class DiagnosticsReport:
    energy: np.ndarray
    casimirs: np.ndarray
    energy_drift: float
    casimir_drift: float
    dhdt_residual: float
    energy_monotone_decreasing: bool


def diagnostics(traj, sys, x_field=None, casimirs=None):
    """Energy and Casimir histories along ``traj``.

    ``dhdt_residual`` is ``max |dH . X|`` along the trajectory for the field
    that generated it (defaults to the uncontrolled Hamiltonian field).
    """
    casimirs = sys.structure.casimirs if casimirs is None else casimirs
    x_field = x_field if x_field is not None else sys.hamiltonian_field()
    energy = np.array([sys.hamiltonian(x) for x in traj.states])
    cas = np.array([[c(x) for c in casimirs] for x in traj.states]).reshape(len(energy), -1)
    dhdt = max(abs(float(sys.hamiltonian.grad(x) @ x_field(x))) for x in traj.states)
    cas_drift = float(np.max(np.abs(cas - cas[0]))) if cas.size else 0.0
    report = DiagnosticsReport(
        energy=energy, casimirs=cas,
        energy_drift=float(np.max(np.abs(energy - energy[0]))),
        casimir_drift=cas_drift, dhdt_residual=dhdt,
        energy_monotone_decreasing=bool(np.all(np.diff(energy) <= 1e-14)))
    traj.diagnostics.update(energy_drift=report.energy_drift, casimir_drift=cas_drift,
                            dhdt_residual=dhdt)
    return report
