"""Linear algebra of subspaces at a single point of a manifold.

Tangent subspaces and covector subspaces share one representation, a
:class:`Subspace` carrying an orthonormal basis (stored as rows) and a flag
saying whether it lives in the tangent or the cotangent space.  All rank
decisions go through singular values with a relative threshold.

Sign convention for ``B#``: the covector ``alpha`` is sent to ``B @ alpha``,
so that for the canonical tensor on ``(q, p)`` coordinates ``B# dH`` yields
``qdot = dH/dp`` and ``pdot = -dH/dq``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_TOL = 1e-9
# absolute floor below which a singular value is treated as zero regardless of scale
ABS_TOL = 1e-12
ANTISYM_TOL = 1e-10


class DimensionError(ValueError):
    pass


class FlagMismatchError(ValueError):
    pass


class NotAntisymmetricError(ValueError):
    def __init__(self, norm):
        super().__init__(f"tensor is not antisymmetric: ||B + B^T|| = {norm:.3e}")
        self.norm = norm


def _orthonormal_rows(vectors, rank_tol=RANK_TOL, scale=None):
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    if vectors.size == 0:
        return np.zeros((0, vectors.shape[-1]))
    _, s, vt = np.linalg.svd(vectors, full_matrices=False)
    ref = s[0] if scale is None else max(s[0], scale)
    keep = s > max(rank_tol * ref, ABS_TOL)
    return vt[keep]


@dataclass(frozen=True, eq=False)
class Subspace:
    """A linear subspace of R^N (tangent) or its dual (cotangent).

    ``basis`` holds orthonormal rows; an empty basis is the zero subspace.
    Use :meth:`span` to build one from arbitrary (possibly dependent) vectors.
    """

    ambient_dim: int
    basis: np.ndarray
    dual: bool = False

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float).reshape(-1, self.ambient_dim) \
            if np.size(self.basis) else np.zeros((0, self.ambient_dim))
        if basis.shape[1] != self.ambient_dim:
            raise DimensionError(
                f"basis vectors have length {basis.shape[1]}, ambient_dim is {self.ambient_dim}")
        if basis.shape[0] > self.ambient_dim:
            raise DimensionError("more basis vectors than ambient dimension")
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @classmethod
    def span(cls, vectors, ambient_dim=None, dual=False, rank_tol=RANK_TOL, scale=None):
        """Span of ``vectors`` (rows), orthonormalised.

        ``scale`` sets the magnitude against which small singular values are
        judged; by default the largest singular value of ``vectors`` is used.
        """
        arr = np.asarray(vectors, dtype=float)
        if ambient_dim is None:
            if arr.ndim != 2 or arr.shape[1] == 0:
                raise DimensionError("ambient_dim required for an empty vector list")
            ambient_dim = arr.shape[1]
        if arr.size == 0:
            return cls.zero(ambient_dim, dual)
        arr = np.atleast_2d(arr)
        if arr.shape[1] != ambient_dim:
            raise DimensionError(
                f"vectors have length {arr.shape[1]}, ambient_dim is {ambient_dim}")
        return cls(ambient_dim, _orthonormal_rows(arr, rank_tol, scale), dual)

    @classmethod
    def zero(cls, ambient_dim, dual=False):
        return cls(ambient_dim, np.zeros((0, ambient_dim)), dual)

    @classmethod
    def full(cls, ambient_dim, dual=False):
        return cls(ambient_dim, np.eye(ambient_dim), dual)

    @classmethod
    def coordinate(cls, indices, ambient_dim, dual=False):
        """Span of the coordinate vectors ``e_i`` for ``i`` in ``indices``."""
        return cls(ambient_dim, np.eye(ambient_dim)[list(indices)], dual)

    @property
    def dim(self):
        return self.basis.shape[0]

    def projector(self):
        return self.basis.T @ self.basis

    def project(self, v):
        return self.basis.T @ (self.basis @ np.asarray(v, dtype=float))

    def contains(self, v, tol=1e-8):
        v = np.asarray(v, dtype=float)
        return np.linalg.norm(v - self.project(v)) < tol

    def __repr__(self):
        kind = "cotangent" if self.dual else "tangent"
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim}, {kind})"


def _check_compatible(u, v):
    if u.ambient_dim != v.ambient_dim:
        raise DimensionError(f"ambient dims differ: {u.ambient_dim} vs {v.ambient_dim}")
    if u.dual != v.dual:
        raise FlagMismatchError("cannot combine a tangent subspace with a cotangent subspace")


def annihilator(v, rank_tol=RANK_TOL):
    """All covectors vanishing on ``v`` (or vectors killed by a covector space)."""
    n = v.ambient_dim
    if v.dim == 0:
        return Subspace.full(n, not v.dual)
    _, s, vt = np.linalg.svd(v.basis, full_matrices=True)
    rank = int(np.sum(s > max(rank_tol * s[0], ABS_TOL)))
    return Subspace(n, vt[rank:], not v.dual)


def check_antisymmetric(b, tol=ANTISYM_TOL):
    b = np.asarray(b, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DimensionError(f"tensor must be square, got shape {b.shape}")
    norm = np.linalg.norm(b + b.T)
    if norm >= tol * max(1.0, np.linalg.norm(b)):
        raise NotAntisymmetricError(norm)
    return b


def sharp_image(b_at_m, w, rank_tol=RANK_TOL):
    """Image ``B#(W)`` of a covector subspace under the tensor matrix."""
    b = check_antisymmetric(b_at_m)
    if not w.dual:
        raise FlagMismatchError("sharp_image expects a cotangent (dual) subspace")
    if b.shape[0] != w.ambient_dim:
        raise DimensionError(f"tensor is {b.shape[0]}-dim, subspace ambient is {w.ambient_dim}")
    if w.dim == 0:
        return Subspace.zero(w.ambient_dim)
    images = (b @ w.basis.T).T
    return Subspace.span(images, w.ambient_dim, dual=False, rank_tol=rank_tol,
                         scale=np.linalg.norm(b, 2))


def subspace_sum(u, v, rank_tol=RANK_TOL):
    _check_compatible(u, v)
    return Subspace.span(np.vstack([u.basis, v.basis]), u.ambient_dim, u.dual, rank_tol)


def subspace_intersect(u, v, rank_tol=RANK_TOL):
    """``U cap V`` computed as ``(U° + V°)°``."""
    _check_compatible(u, v)
    return annihilator(subspace_sum(annihilator(u, rank_tol), annihilator(v, rank_tol), rank_tol),
                       rank_tol)


def inclusion_residual(u, v):
    """Largest distance from a unit vector of ``U`` to ``V``."""
    _check_compatible(u, v)
    if u.dim == 0:
        return 0.0
    diff = u.basis - u.basis @ v.projector()
    return float(np.max(np.linalg.norm(diff, axis=1)))


def is_subspace_of(u, v, tol=1e-8):
    return inclusion_residual(u, v) < tol


def subspace_distance(u, v):
    """Sine of the largest principal angle; 1 when dimensions differ."""
    _check_compatible(u, v)
    if u.dim != v.dim:
        return 1.0
    if u.dim == 0:
        return 0.0
    return float(np.linalg.norm(u.projector() - v.projector(), 2))


def principal_angles(u, v):
    _check_compatible(u, v)
    if u.dim == 0 or v.dim == 0:
        return np.zeros(0)
    s = np.linalg.svd(u.basis @ v.basis.T, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))


def verify_characteristic_identity(b_at_m, v, leaf_tangent, rank_tol=RANK_TOL):
    """Distance between ``B#((B#(V°))°)`` and ``V cap T(leaf)``.

    Zero (up to rounding) whenever ``leaf_tangent`` really is the tangent
    space of the symplectic leaf through the point.
    """
    if v.dual or leaf_tangent.dual:
        raise FlagMismatchError("V and the leaf tangent must be tangent subspaces")
    lhs = sharp_image(b_at_m, annihilator(sharp_image(b_at_m, annihilator(v, rank_tol),
                                                      rank_tol), rank_tol), rank_tol)
    rhs = subspace_intersect(v, leaf_tangent, rank_tol)
    return subspace_distance(lhs, rhs)
