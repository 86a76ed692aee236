"""Builtin function library that scenario files may reference.

Every object in a scenario is a JSON mapping with a ``builtin`` key plus
coefficient data.  Builders raise :class:`SpecError` carrying the JSON path
of the offending entry so the parser can report all problems at once.
"""
from __future__ import annotations

import numpy as np

from .. import symmetry
from ..chsys import FiberMap
from ..poisson import PoissonStructure, ScalarField, VectorField, canonical, lie_poisson_so3
from ..reduce import Distribution, Submanifold, characteristic_distribution


class SpecError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


def _need(spec, key, path):
    if not isinstance(spec, dict):
        raise SpecError(path, "expected an object")
    if key not in spec:
        raise SpecError(f"{path}.{key}", "missing required field")
    return spec[key]


def _array(value, path, shape=None):
    try:
        a = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise SpecError(path, "expected numeric data") from None
    if shape is not None and a.shape != shape:
        raise SpecError(path, f"shape {a.shape} does not match expected {shape}")
    if not np.all(np.isfinite(a)):
        raise SpecError(path, "non-finite coefficient")
    return a


def _index(value, dim, path):
    if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value < dim:
        raise SpecError(path, f"index must be an integer in [0, {dim})")
    return value


def _kind(spec, path, table):
    name = _need(spec, "builtin", path)
    if name not in table:
        raise SpecError(f"{path}.builtin", f"unknown builtin {name!r}; "
                                           f"known: {', '.join(sorted(table))}")
    return table[name]


# polynomials

def polynomial(terms, dim):
    """``sum c * prod x_i^e_i`` with an exact gradient."""
    coeffs = np.array([c for c, _ in terms], dtype=float)
    exps = np.array([e for _, e in terms], dtype=int).reshape(len(terms), dim)

    def value(x):
        return float(coeffs @ np.prod(x ** exps, axis=1)) if len(terms) else 0.0

    def grad(x):
        g = np.zeros(dim)
        for c, e in zip(coeffs, exps):
            for i in np.nonzero(e)[0]:
                d = e.copy()
                d[i] -= 1
                g[i] += c * e[i] * np.prod(x ** d)
        return g
    return ScalarField(value, grad, name="polynomial")


def _poly_terms(spec, dim, path):
    terms = _need(spec, "terms", path)
    if not isinstance(terms, list):
        raise SpecError(f"{path}.terms", "expected a list of [coefficient, exponents]")
    out = []
    for k, t in enumerate(terms):
        tp = f"{path}.terms[{k}]"
        if not (isinstance(t, list) and len(t) == 2 and isinstance(t[1], list)):
            raise SpecError(tp, "expected [coefficient, exponents]")
        e = t[1]
        if len(e) != dim:
            raise SpecError(f"{tp}[1]", f"exponent list has length {len(e)}, expected {dim}")
        if not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in e):
            raise SpecError(f"{tp}[1]", "exponents must be nonnegative integers")
        out.append((float(_array(t[0], f"{tp}[0]", ())), e))
    return out


# scalar fields

def _scalar_polynomial(spec, dim, path):
    return polynomial(_poly_terms(spec, dim, path), dim)


def _scalar_quadratic(spec, dim, path):
    m = _array(_need(spec, "matrix", path), f"{path}.matrix", (dim, dim))
    lin = spec.get("linear")
    lin = None if lin is None else _array(lin, f"{path}.linear", (dim,))
    const = float(_array(spec.get("const", 0.0), f"{path}.const", ()))
    return ScalarField.quadratic(m, lin, const)


def _scalar_coordinate(spec, dim, path):
    return ScalarField.coordinate(_index(_need(spec, "index", path), dim, f"{path}.index"))


def _scalar_constant(spec, dim, path):
    return ScalarField.constant(float(_array(spec.get("value", 0.0), f"{path}.value", ())))


def _scalar_rigid_body(spec, dim, path):
    if dim != 3:
        raise SpecError(path, f"rigid_body_energy lives on so(3)*, got dimension {dim}")
    inertia = _array(_need(spec, "inertia", path), f"{path}.inertia", (3,))
    if np.any(inertia <= 0):
        raise SpecError(f"{path}.inertia", "moments of inertia must be positive")
    return symmetry.rigid_body_energy(inertia)


def _scalar_norm_squared(spec, dim, path):
    return ScalarField(lambda x: float(x @ x), lambda x: 2 * x, name="|x|^2")


def _scalar_momentum(spec, dim, path):
    action = build_action(_need(spec, "group", path), f"{path}.group")
    if action.phase_dim != dim:
        raise SpecError(path, f"group acts on dimension {action.phase_dim}, system has {dim}")
    k = _index(_need(spec, "component", path), action.algebra_dim, f"{path}.component")
    return symmetry.momentum_map(action).component(k)


def _scalar_momentum_norm_squared(spec, dim, path):
    action = build_action(_need(spec, "group", path), f"{path}.group")
    if action.phase_dim != dim:
        raise SpecError(path, f"group acts on dimension {action.phase_dim}, system has {dim}")
    comps = symmetry.momentum_map(action).components()
    return ScalarField(lambda x: sum(c(x) ** 2 for c in comps),
                       lambda x: 2 * sum(c(x) * c.grad(x) for c in comps), name="|J|^2")


def _scalar_sum(spec, dim, path):
    parts = _need(spec, "terms", path)
    if not isinstance(parts, list) or not parts:
        raise SpecError(f"{path}.terms", "expected a nonempty list of scalar fields")
    fields = [build_scalar(p, dim, f"{path}.terms[{k}]") for k, p in enumerate(parts)]
    out = fields[0]
    for f in fields[1:]:
        out = out + f
    return out


SCALARS = {
    "polynomial": _scalar_polynomial,
    "quadratic": _scalar_quadratic,
    "coordinate": _scalar_coordinate,
    "constant": _scalar_constant,
    "rigid_body_energy": _scalar_rigid_body,
    "norm_squared": _scalar_norm_squared,
    "momentum": _scalar_momentum,
    "momentum_norm_squared": _scalar_momentum_norm_squared,
    "sum": _scalar_sum,
}


def build_scalar(spec, dim, path):
    return _kind(spec, path, SCALARS)(spec, dim, path)


# vector fields

def _vector_constant(spec, dim, path):
    return VectorField.constant(_array(_need(spec, "vector", path), f"{path}.vector", (dim,)))


def _vector_linear(spec, dim, path):
    return VectorField.linear(_array(_need(spec, "matrix", path), f"{path}.matrix", (dim, dim)))


def _vector_polynomial(spec, dim, path):
    comps = _need(spec, "components", path)
    if not isinstance(comps, list) or len(comps) != dim:
        raise SpecError(f"{path}.components", f"expected {dim} polynomial components")
    fields = [polynomial(_poly_terms(c, dim, f"{path}.components[{k}]"), dim)
              for k, c in enumerate(comps)]
    return VectorField(lambda x: np.array([f(x) for f in fields]),
                       lambda x: np.array([f.grad(x) for f in fields]), name="polynomial_field")


def _vector_hamiltonian(spec, dim, path):
    b = build_structure(_need(spec, "structure", path), f"{path}.structure")
    if b.dim != dim:
        raise SpecError(f"{path}.structure", f"dimension {b.dim} does not match {dim}")
    h = build_scalar(_need(spec, "hamiltonian", path), dim, f"{path}.hamiltonian")
    return VectorField(lambda x: b(x) @ h.grad(x), name="X_H")


VECTORS = {
    "constant": _vector_constant,
    "linear": _vector_linear,
    "polynomial": _vector_polynomial,
    "hamiltonian": _vector_hamiltonian,
}


def build_vector(spec, dim, path):
    return _kind(spec, path, VECTORS)(spec, dim, path)


# Poisson structures

def _tensor_polynomial(spec, path):
    dim = _need(spec, "dim", path)
    if not isinstance(dim, int) or dim < 1:
        raise SpecError(f"{path}.dim", "expected a positive integer")
    entries = _need(spec, "entries", path)
    if not isinstance(entries, list):
        raise SpecError(f"{path}.entries", "expected a list of {i, j, terms}")
    upper = []
    for k, e in enumerate(entries):
        ep = f"{path}.entries[{k}]"
        i = _index(_need(e, "i", ep), dim, f"{ep}.i")
        j = _index(_need(e, "j", ep), dim, f"{ep}.j")
        if i >= j:
            raise SpecError(ep, "give entries above the diagonal (i < j); the rest follow "
                                "by antisymmetry")
        upper.append((i, j, polynomial(_poly_terms(e, dim, ep), dim)))

    def tensor(x):
        b = np.zeros((dim, dim))
        for i, j, f in upper:
            b[i, j] = f(x)
            b[j, i] = -b[i, j]
        return b
    return PoissonStructure(dim, tensor, kind="polynomial")


def _tensor_canonical(spec, path):
    n = _need(spec, "n", path)
    if not isinstance(n, int) or n < 1:
        raise SpecError(f"{path}.n", "expected a positive integer")
    return canonical(n)


STRUCTURES = {
    "canonical": _tensor_canonical,
    "lie_poisson_so3": lambda spec, path: lie_poisson_so3(),
    "reduced_s1": lambda spec, path: symmetry.reduced_s1_structure(),
    "polynomial": _tensor_polynomial,
}


def build_structure(spec, path):
    return _kind(spec, path, STRUCTURES)(spec, path)


# fiber maps

def _fiber_affine(spec, base_dim, dim, path):
    m = dim - base_dim
    a = _array(spec.get("from_base", np.zeros((m, base_dim))), f"{path}.from_base", (m, base_dim))
    c = _array(spec.get("from_fiber", np.zeros((m, m))), f"{path}.from_fiber", (m, m))
    d = _array(spec.get("offset", np.zeros(m)), f"{path}.offset", (m,))
    return FiberMap.fiber_affine(base_dim, a, c, d)


FIBER_MAPS = {
    "identity": lambda spec, base_dim, dim, path: FiberMap.identity(base_dim),
    "zero_section": lambda spec, base_dim, dim, path: FiberMap.zero_section(base_dim),
    "fiber_affine": _fiber_affine,
}


def build_fiber_map(spec, base_dim, dim, path):
    return _kind(spec, path, FIBER_MAPS)(spec, base_dim, dim, path)


# submanifolds

def _sub_coordinate_zero(spec, dim, path):
    idx = _need(spec, "indices", path)
    if not isinstance(idx, list) or not idx:
        raise SpecError(f"{path}.indices", "expected a nonempty list of indices")
    return Submanifold.coordinate_zero(
        [_index(i, dim, f"{path}.indices[{k}]") for k, i in enumerate(idx)], dim)


def _sub_level_set(spec, dim, path):
    fields = _need(spec, "fields", path)
    if not isinstance(fields, list) or not fields:
        raise SpecError(f"{path}.fields", "expected a nonempty list of scalar fields")
    built = [build_scalar(f, dim, f"{path}.fields[{k}]") for k, f in enumerate(fields)]
    values = _array(spec.get("values", [0.0] * len(built)), f"{path}.values", (len(built),))
    return Submanifold.level_set(built, values, dim)


def _sub_momentum_fiber(spec, dim, path):
    action = build_action(_need(spec, "group", path), f"{path}.group")
    if action.phase_dim != dim:
        raise SpecError(path, f"group acts on dimension {action.phase_dim}, system has {dim}")
    mu = _array(_need(spec, "mu", path), f"{path}.mu")
    return symmetry.momentum_fiber(action, mu)


SUBMANIFOLDS = {
    "whole": lambda spec, dim, path: Submanifold.whole(dim),
    "coordinate_zero": _sub_coordinate_zero,
    "level_set": _sub_level_set,
    "momentum_fiber": _sub_momentum_fiber,
}


def build_submanifold(spec, dim, path):
    return _kind(spec, path, SUBMANIFOLDS)(spec, dim, path)


# distributions

def _dist_coordinate(spec, dim, b, w, path):
    idx = _need(spec, "indices", path)
    if not isinstance(idx, list):
        raise SpecError(f"{path}.indices", "expected a list of indices")
    return Distribution.coordinate([_index(i, dim, f"{path}.indices[{k}]")
                                    for k, i in enumerate(idx)], dim)


def _dist_generators(spec, dim, b, w, path):
    fields = _need(spec, "fields", path)
    if not isinstance(fields, list):
        raise SpecError(f"{path}.fields", "expected a list of vector fields")
    return Distribution(tuple(build_vector(f, dim, f"{path}.fields[{k}]")
                              for k, f in enumerate(fields)), dim)


def _dist_characteristic(spec, dim, b, w, path):
    if w is None or w.constraint is None:
        raise SpecError(path, "characteristic distribution needs a constraint submanifold")
    return characteristic_distribution(b, w)


def _dist_group_orbits(spec, dim, b, w, path):
    action = build_action(_need(spec, "group", path), f"{path}.group")
    if action.phase_dim != dim:
        raise SpecError(path, f"group acts on dimension {action.phase_dim}, system has {dim}")
    return Distribution(tuple(action.generators()), dim, name=f"{action.tag} orbits")


DISTRIBUTIONS = {
    "zero": lambda spec, dim, b, w, path: Distribution.zero(dim),
    "coordinate": _dist_coordinate,
    "generators": _dist_generators,
    "characteristic": _dist_characteristic,
    "group_orbits": _dist_group_orbits,
}


def build_distribution(spec, dim, b, w, path):
    return _kind(spec, path, DISTRIBUTIONS)(spec, dim, b, w, path)


# group actions

def build_action(spec, path):
    if isinstance(spec, str):
        table = {"S1": symmetry.s1_action, "SO3": symmetry.so3_action}
        if spec not in table:
            raise SpecError(path, f"unknown group {spec!r}; known: S1, SO3, trivial:<n>, "
                                  "product")
        return table[spec]()
    if isinstance(spec, dict):
        kind = _need(spec, "builtin", path)
        if kind == "trivial":
            n = _need(spec, "n", path)
            if not isinstance(n, int) or n < 1:
                raise SpecError(f"{path}.n", "expected a positive integer")
            return symmetry.trivial_action(n)
        if kind == "product":
            parts = _need(spec, "factors", path)
            if not isinstance(parts, list) or len(parts) != 2:
                raise SpecError(f"{path}.factors", "expected exactly two factors")
            return symmetry.product_action(build_action(parts[0], f"{path}.factors[0]"),
                                           build_action(parts[1], f"{path}.factors[1]"))
        raise SpecError(f"{path}.builtin", f"unknown group builtin {kind!r}")
    raise SpecError(path, "expected a group name or object")
