"""Poisson tensors on coordinate domains, brackets and Hamiltonian fields."""
from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

FD_REL_STEP = 1e-5
JACOBI_TOL = 1e-5

_fd_rel_step = ContextVar("fd_rel_step", default=FD_REL_STEP)


@contextmanager
def fd_step_override(rel):
    """Use ``rel`` as the relative finite-difference step inside the block."""
    token = _fd_rel_step.set(float(rel))
    try:
        yield
    finally:
        _fd_rel_step.reset(token)


def fd_step(x, rel=None):
    rel = _fd_rel_step.get() if rel is None else rel
    return rel * max(1.0, float(np.linalg.norm(x)))


def fd_gradient(func, x, rel=None):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    h = fd_step(x, rel)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (func(x + e) - func(x - e)) / (2 * h)
    return grad


def fd_jacobian(func, x, rel=None):
    """Central-difference jacobian, columns are partial derivatives."""
    x = np.asarray(x, dtype=float)
    h = fd_step(x, rel)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(func(x + e)) - np.asarray(func(x - e))) / (2 * h))
    return np.column_stack(cols) if cols else np.zeros((0, 0))


@dataclass(frozen=True)
class ScalarField:
    """A smooth function with an optional analytic gradient."""

    func: Callable[[np.ndarray], float]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd_rel_step: Optional[float] = None
    name: str = ""

    def __call__(self, x):
        return float(self.func(np.asarray(x, dtype=float)))

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(x), dtype=float)
        return fd_gradient(self.func, x, self.fd_rel_step)

    def fd_grad(self, x, rel=None):
        return fd_gradient(self.func, np.asarray(x, dtype=float),
                           self.fd_rel_step if rel is None else rel)

    def __add__(self, other):
        other = _as_field(other)
        return ScalarField(lambda x: self(x) + other(x),
                           _maybe(self, other, lambda x: self.grad(x) + other.grad(x)))

    def __sub__(self, other):
        other = _as_field(other)
        return ScalarField(lambda x: self(x) - other(x),
                           _maybe(self, other, lambda x: self.grad(x) - other.grad(x)))

    def __mul__(self, other):
        other = _as_field(other)
        return ScalarField(lambda x: self(x) * other(x),
                           _maybe(self, other,
                                  lambda x: self(x) * other.grad(x) + other(x) * self.grad(x)))

    __radd__ = __add__
    __rmul__ = __mul__

    def compose(self, phase_map, jacobian=None):
        """Pull back by a map ``x -> phase_map(x)``; gradient via ``jacobian`` if given."""
        grad = None
        if jacobian is not None and self.gradient is not None:
            grad = lambda x: jacobian(x).T @ self.grad(phase_map(x))
        return ScalarField(lambda x: self(phase_map(x)), grad)

    @staticmethod
    def constant(c=0.0):
        return ScalarField(lambda x: c, lambda x: np.zeros_like(x), name=f"const({c})")

    @staticmethod
    def coordinate(i):
        def grad(x):
            g = np.zeros_like(x)
            g[i] = 1.0
            return g
        return ScalarField(lambda x: x[i], grad, name=f"x{i}")

    @staticmethod
    def quadratic(matrix, linear=None, const=0.0):
        """``0.5 x^T A x + b.x + c`` with ``A`` symmetrised."""
        a = np.asarray(matrix, dtype=float)
        a = 0.5 * (a + a.T)
        b = np.zeros(a.shape[0]) if linear is None else np.asarray(linear, dtype=float)
        return ScalarField(lambda x: 0.5 * x @ a @ x + b @ x + const, lambda x: a @ x + b,
                           name="quadratic")


def _as_field(obj):
    if isinstance(obj, ScalarField):
        return obj
    return ScalarField.constant(float(obj))


def _maybe(f, g, grad):
    return grad if (f.gradient is not None and g.gradient is not None) else None


@dataclass(frozen=True)
class VectorField:
    func: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd_rel_step: Optional[float] = None
    name: str = ""

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def jac(self, x):
        x = np.asarray(x, dtype=float)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(x), dtype=float)
        return fd_jacobian(self.func, x, self.fd_rel_step)

    def __add__(self, other):
        jac = None
        if self.jacobian is not None and other.jacobian is not None:
            jac = lambda x: self.jac(x) + other.jac(x)
        return VectorField(lambda x: self(x) + other(x), jac)

    def scaled(self, c):
        jac = None if self.jacobian is None else (lambda x: c * self.jac(x))
        return VectorField(lambda x: c * self(x), jac)

    @staticmethod
    def constant(v):
        v = np.asarray(v, dtype=float)
        return VectorField(lambda x: v.copy(), lambda x: np.zeros((v.size, v.size)))

    @staticmethod
    def linear(matrix):
        a = np.asarray(matrix, dtype=float)
        return VectorField(lambda x: a @ x, lambda x: a)


@dataclass(frozen=True)
class PoissonStructure:
    """A Poisson tensor given pointwise by its antisymmetric matrix ``B(x)``."""

    dim: int
    tensor: Callable[[np.ndarray], np.ndarray]
    kind: str = "custom"
    casimirs: tuple = field(default_factory=tuple)

    def __call__(self, x):
        b = np.asarray(self.tensor(np.asarray(x, dtype=float)), dtype=float)
        if b.shape != (self.dim, self.dim):
            raise ValueError(f"tensor returned shape {b.shape}, expected {(self.dim, self.dim)}")
        return b

    def sharp(self, x, alpha):
        return self(x) @ np.asarray(alpha, dtype=float)

    def antisymmetry_residual(self, points):
        return max((float(np.linalg.norm(self(x) + self(x).T)) for x in points), default=0.0)


def canonical(n):
    """Canonical symplectic tensor on ``T*R^n`` in ``(q_1..q_n, p_1..p_n)`` order."""
    b = np.zeros((2 * n, 2 * n))
    b[:n, n:] = np.eye(n)
    b[n:, :n] = -np.eye(n)
    b.setflags(write=False)
    return PoissonStructure(2 * n, lambda x: b, kind="canonical-symplectic")


def hat(v):
    """3x3 matrix of ``w -> v x w``."""
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


def lie_poisson_so3():
    """Minus Lie-Poisson structure on so(3)*: ``{f,g}(mu) = -mu . (grad f x grad g)``."""
    norm_sq = ScalarField(lambda m: float(m @ m), lambda m: 2 * m, name="|mu|^2")
    return PoissonStructure(3, hat, kind="lie-poisson", casimirs=(norm_sq,))


def bracket(b, f, g):
    """``{f, g}(x) = df(x) . B(x) dg(x)`` as a new scalar field."""
    return ScalarField(lambda x: float(f.grad(x) @ b(x) @ g.grad(x)), name="bracket")


def hamiltonian_field(b, h):
    return VectorField(lambda x: b(x) @ h.grad(x), name="X_H")


def jacobi_residual(b, f, g, h, points):
    """Largest cyclic sum ``{f,{g,h}} + {g,{h,f}} + {h,{f,g}}`` over ``points``."""
    points = list(points)
    if not points:
        raise ValueError("jacobi_residual needs at least one sample point")
    terms = (bracket(b, f, bracket(b, g, h)),
             bracket(b, g, bracket(b, h, f)),
             bracket(b, h, bracket(b, f, g)))
    return max(abs(sum(t(x) for t in terms)) for x in points)


def coordinate_jacobi_residual(b, points):
    """Jacobi residual maximised over all coordinate triples."""
    fields = [ScalarField.coordinate(i) for i in range(b.dim)]
    worst = 0.0
    for i in range(b.dim):
        for j in range(i + 1, b.dim):
            for k in range(j + 1, b.dim):
                worst = max(worst, jacobi_residual(b, fields[i], fields[j], fields[k], points))
    return worst


def lie_bracket(x_field, y_field):
    """``[X, Y](x) = JY(x) X(x) - JX(x) Y(x)``."""
    return VectorField(lambda z: y_field.jac(z) @ x_field(z) - x_field.jac(z) @ y_field(z),
                       name="lie_bracket")


def casimir_residual(b, c, points):
    return max((float(np.linalg.norm(b(x) @ c.grad(x))) for x in points), default=0.0)


def sample_box(rng, count, dim, box=(-2.0, 2.0)):
    lo, hi = box
    return rng.uniform(lo, hi, size=(count, dim))
