"""Check types a scenario can request.

Each type has a ``prepare`` step, run at parse time, that builds the objects
it needs (raising :class:`SpecError` with a path), and a ``run`` step that
returns an :class:`Outcome`.  The runner turns outcomes into report records.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .. import equiv, pointlin, poisson, reduce, symmetry
from ..chsys import FiberMap, closed_loop_field, diagnostics, integrate
from ..pointlin import Subspace
from .builtins import (SpecError, _array, _need, build_action, build_distribution,
                       build_fiber_map, build_scalar, build_submanifold,
                       build_vector)
from .scenario import build_system


@dataclass
class Outcome:
    tested: int
    skipped: int
    residual: float
    passed: bool
    details: dict = field(default_factory=dict)


@dataclass
class RunContext:
    rng: np.random.Generator
    count: int
    box: tuple
    tol: float
    trajectory_dir: Path | None = None
    check_id: str = ""

    def sample(self, dim):
        return list(poisson.sample_box(self.rng, self.count, dim, self.box))


@dataclass(frozen=True)
class CheckType:
    name: str
    anchor: str
    default_tol: float
    prepare: Callable
    run: Callable


CHECK_TYPES = {}


def register(name, anchor, default_tol):
    def wrap(pair):
        prepare, run = pair()
        CHECK_TYPES[name] = CheckType(name, anchor, default_tol, prepare, run)
        return pair
    return wrap


def _number(spec, key, default, path, positive=True):
    value = spec.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"{path}.{key}", "expected a number")
    if positive and value <= 0:
        raise SpecError(f"{path}.{key}", "must be positive")
    return value


def _choice(spec, key, default, options, path):
    value = spec.get(key, default)
    if value not in options:
        raise SpecError(f"{path}.{key}", f"expected one of {', '.join(map(str, options))}")
    return value


def _submanifold(spec, env, path, required=True):
    if "submanifold" in spec:
        return build_submanifold(spec["submanifold"], env.dim, f"{path}.submanifold")
    if env.system.control_subset is not None:
        return env.system.control_subset
    if required:
        raise SpecError(f"{path}.submanifold", "no submanifold given and the system has no "
                                               "control subset")
    return None


def _points_on(w, ctx):
    return w.sample(ctx.rng, ctx.count, ctx.box)


def _leaf_rule(spec, env, path):
    leaf = _choice(spec, "leaf", "full", ("full", "so3_sphere"), path)
    if leaf == "full":
        return None
    if env.dim != 3:
        raise SpecError(f"{path}.leaf", "so3_sphere leaves need a 3-dimensional system")
    return lambda z: pointlin.annihilator(Subspace.span([z], 3, dual=True))


def _finite(x):
    return float(x) if np.isfinite(x) else float("inf")


# Poisson structure

@register("antisymmetry", "tensor matrix is antisymmetric: |B + B^T|", 1e-12)
def _antisymmetry():
    def prepare(spec, env, path):
        return {}

    def run(objs, env, ctx):
        pts = ctx.sample(env.dim)
        r = env.system.structure.antisymmetry_residual(pts)
        return Outcome(len(pts), 0, r, r < ctx.tol)
    return prepare, run


@register("jacobi", "Jacobi identity: cyclic sum of nested brackets", 1e-5)
def _jacobi():
    def prepare(spec, env, path):
        fields = spec.get("fields")
        if fields is None:
            return {"fields": None}
        if not isinstance(fields, list) or len(fields) != 3:
            raise SpecError(f"{path}.fields", "expected three scalar fields")
        return {"fields": [build_scalar(f, env.dim, f"{path}.fields[{k}]")
                           for k, f in enumerate(fields)]}

    def run(objs, env, ctx):
        b = env.system.structure
        pts = ctx.sample(env.dim)
        if objs["fields"] is None:
            r = poisson.coordinate_jacobi_residual(b, pts)
        else:
            r = poisson.jacobi_residual(b, *objs["fields"], pts)
        return Outcome(len(pts), 0, r, r < ctx.tol)
    return prepare, run


@register("casimir", "Casimir annihilated by the tensor: |B grad C|", 1e-8)
def _casimir():
    def prepare(spec, env, path):
        if "field" in spec:
            return {"fields": [build_scalar(spec["field"], env.dim, f"{path}.field")]}
        if not env.system.structure.casimirs:
            raise SpecError(f"{path}.field", "structure has no catalogued Casimir; give one")
        return {"fields": list(env.system.structure.casimirs)}

    def run(objs, env, ctx):
        pts = ctx.sample(env.dim)
        r = max(poisson.casimir_residual(env.system.structure, c, pts) for c in objs["fields"])
        return Outcome(len(pts), 0, r, r < ctx.tol)
    return prepare, run


@register("characteristic_identity",
          "sharp of the annihilator of sharp(V°) equals V cap T(leaf)", 1e-8)
def _char_identity():
    def prepare(spec, env, path):
        return {"leaf": _leaf_rule(spec, env, path)}

    def run(objs, env, ctx):
        b, n = env.system.structure, env.dim
        worst = 0.0
        for x in ctx.sample(n):
            k = int(ctx.rng.integers(0, n + 1))
            v = Subspace.span(ctx.rng.normal(size=(k, n)), n) if k else Subspace.zero(n)
            leaf = Subspace.full(n) if objs["leaf"] is None else objs["leaf"](x)
            worst = max(worst, pointlin.verify_characteristic_identity(b(x), v, leaf))
        return Outcome(ctx.count, 0, worst, worst < ctx.tol)
    return prepare, run


# reduction

@register("reducibility", "pointwise reducibility: sharp(D°) inside TW + D", 1e-7)
def _reducibility():
    def prepare(spec, env, path):
        w = _submanifold(spec, env, path)
        d = build_distribution(spec.get("distribution", {"builtin": "characteristic"}),
                               env.dim, env.system.structure, w, f"{path}.distribution")
        return {"w": w, "d": d}

    def run(objs, env, ctx):
        pts = _points_on(objs["w"], ctx)
        res = reduce.reducibility_check(env.system.structure, objs["w"], objs["d"], pts, ctx.tol)
        notes = sorted(set(res.notes))
        return Outcome(res.tested, res.skipped, res.max_residual, res.verdict,
                       {"skip_reasons": notes})
    return prepare, run


@register("classify", "coisotropic / cosymplectic classification of W", 1e-7)
def _classify():
    def prepare(spec, env, path):
        expect = _choice(spec, "expect", None,
                         (reduce.COISOTROPIC, reduce.COSYMPLECTIC, reduce.NEITHER), path)
        return {"w": _submanifold(spec, env, path), "expect": expect,
                "leaf": _leaf_rule(spec, env, path)}

    def run(objs, env, ctx):
        pts = _points_on(objs["w"], ctx)
        cls = reduce.classify_submanifold(env.system.structure, objs["w"], pts, objs["leaf"],
                                          ctx.tol)
        tested = len(cls.labels)
        wrong = tested - cls.count(objs["expect"])
        counts = {k: cls.count(k) for k in sorted(set(cls.labels))}
        return Outcome(tested, len(cls.singular), wrong / tested if tested else 0.0,
                       tested > 0 and wrong == 0,
                       {"expect": objs["expect"], "labels": counts,
                        "residual_meaning": "fraction of points with another label"})
    return prepare, run


@register("involutivity", "distribution closed under Lie brackets", 1e-7)
def _involutivity():
    def prepare(spec, env, path):
        w = _submanifold(spec, env, path, required=False)
        d = build_distribution(_need(spec, "distribution", path), env.dim,
                               env.system.structure, w, f"{path}.distribution")
        return {"w": w, "d": d}

    def run(objs, env, ctx):
        pts = _points_on(objs["w"], ctx) if objs["w"] is not None else ctx.sample(env.dim)
        ok, worst = reduce.involutivity_check(objs["d"], pts, ctx.tol)
        return Outcome(len(pts), 0, worst, ok)
    return prepare, run


def _leaf_partner(d, z, rng, span=0.5, steps=50):
    """Flow from ``z`` along a random combination of the generators of ``d``."""
    coeffs = rng.uniform(-span, span, len(d.generators))
    field_ = poisson.VectorField(lambda x: sum(c * g(x) for c, g in zip(coeffs, d.generators)))
    return integrate(field_, z, 1.0, 1.0 / steps).states[-1]


@register("reduced_bracket", "reduced bracket independent of the leaf representative", 1e-7)
def _reduced_bracket():
    def prepare(spec, env, path):
        w = _submanifold(spec, env, path)
        d = build_distribution(spec.get("distribution", {"builtin": "characteristic"}),
                               env.dim, env.system.structure, w, f"{path}.distribution")
        f = build_scalar(_need(spec, "f", path), env.dim, f"{path}.f")
        g = build_scalar(_need(spec, "g", path), env.dim, f"{path}.g")
        return {"w": w, "d": d, "f": f, "g": g}

    def run(objs, env, ctx):
        w, d = objs["w"], objs["d"]
        worst = 0.0
        for z in _points_on(w, ctx):
            other = _leaf_partner(d, z, ctx.rng)
            s = reduce.reduced_bracket_sample(env.system.structure, w, d, objs["f"], objs["g"],
                                              z, other)
            worst = max(worst, s.residual)
        return Outcome(ctx.count, 0, worst, worst < ctx.tol)
    return prepare, run


@register("accessibility", "Lie-bracket rank of drift and control fields", 0.5)
def _accessibility():
    def prepare(spec, env, path):
        controls = _need(spec, "controls", path)
        if not isinstance(controls, list):
            raise SpecError(f"{path}.controls", "expected a list of vector fields")
        fields = [build_vector(c, env.dim, f"{path}.controls[{k}]")
                  for k, c in enumerate(controls)]
        depth = spec.get("depth", 2)
        if not isinstance(depth, int) or depth < 1:
            raise SpecError(f"{path}.depth", "expected a positive integer")
        expect = spec.get("expect_rank", env.dim)
        drift = env.system.hamiltonian_field() if spec.get("drift", True) else None
        return {"controls": fields, "depth": depth, "expect": expect, "drift": drift}

    def run(objs, env, ctx):
        pts = ctx.sample(env.dim)
        ranks = [reduce.accessibility_rank(objs["drift"], objs["controls"], z, objs["depth"])
                 for z in pts]
        deficit = max(0, objs["expect"] - min(ranks))
        return Outcome(len(pts), 0, float(deficit), deficit == 0,
                       {"min_rank": min(ranks), "expect_rank": objs["expect"],
                        "residual_meaning": "rank deficit"})
    return prepare, run


# dynamics

SIMULATE_EXPECT = ("energy_conserved", "casimirs_conserved", "energy_decreasing")


@register("simulate", "closed-loop simulation with energy and Casimir bookkeeping", 1e-8)
def _simulate():
    def prepare(spec, env, path):
        x0 = _array(_need(spec, "x0", path), f"{path}.x0", (env.dim,))
        t_final = _number(spec, "t_final", 1.0, path)
        dt = _number(spec, "dt", 1e-2, path)
        method = _choice(spec, "method", "rk4", ("rk4", "midpoint"), path)
        control = _choice(spec, "control", "system", ("system", "none"), path)
        expect = spec.get("expect", ["energy_conserved"])
        if not isinstance(expect, list) or any(e not in SIMULATE_EXPECT for e in expect):
            raise SpecError(f"{path}.expect", f"expected a list drawn from {SIMULATE_EXPECT}")
        sys = env.system
        u = sys.control if control == "system" and sys.control is not None else \
            FiberMap.zero_section(sys.base_dim)
        return {"x0": x0, "t_final": t_final, "dt": dt, "method": method, "u": u,
                "expect": expect}

    def run(objs, env, ctx):
        sys = env.system
        field_ = closed_loop_field(sys, objs["u"])
        traj = integrate(field_, objs["x0"], objs["t_final"], objs["dt"], objs["method"])
        diag = diagnostics(traj, sys, field_)
        parts = {}
        if "energy_conserved" in objs["expect"]:
            parts["energy_drift"] = diag.energy_drift
        if "casimirs_conserved" in objs["expect"]:
            parts["casimir_drift"] = diag.casimir_drift
        if "energy_decreasing" in objs["expect"]:
            parts["energy_increase"] = max(0.0, float(np.max(np.diff(diag.energy), initial=0.0)))
        residual = max(parts.values(), default=0.0)
        if ctx.trajectory_dir is not None:
            ctx.trajectory_dir.mkdir(parents=True, exist_ok=True)
            out = ctx.trajectory_dir / f"{ctx.check_id}.csv"
            out.write_text(traj.to_csv(sys.hamiltonian, sys.structure.casimirs))
        details = {k: _finite(v) for k, v in parts.items()}
        details.update(steps=len(traj.times) - 1, final_energy=_finite(diag.energy[-1]),
                       energy_drop=_finite(diag.energy[0] - diag.energy[-1]))
        return Outcome(len(traj.times), 0, residual, residual < ctx.tol, details)
    return prepare, run


# symmetry

def _action(spec, env, path):
    action = build_action(_need(spec, "group", path), f"{path}.group")
    if action.phase_dim != env.dim:
        raise SpecError(f"{path}.group", f"group acts on dimension {action.phase_dim}, "
                                         f"system has {env.dim}")
    return action


@register("momentum_fiber", "momentum-map preimage of a coadjoint orbit is coisotropic", 1e-7)
def _momentum_fiber():
    def prepare(spec, env, path):
        action = _action(spec, env, path)
        mu = _array(_need(spec, "mu", path), f"{path}.mu", (action.algebra_dim,))
        n_sing = spec.get("singular_seeds", 5)
        if not isinstance(n_sing, int) or n_sing < 0:
            raise SpecError(f"{path}.singular_seeds", "expected a nonnegative integer")
        return {"action": action, "mu": mu, "singular": n_sing}

    def run(objs, env, ctx):
        action = objs["action"]
        n = action.config_dim
        seeds = ctx.sample(env.dim)
        singular = []
        for _ in range(objs["singular"]):
            q = ctx.rng.uniform(*ctx.box, n)
            singular.append(np.concatenate([q, ctx.rng.uniform(-1, 1) * q]))
        b = env.system.structure
        fc = symmetry.momentum_fiber_coisotropy(action, b, objs["mu"], seeds)
        missed = len(symmetry.momentum_fiber_coisotropy(action, b, objs["mu"],
                                                        singular).regular_points)
        cls = fc.classification
        tested = len(cls.labels)
        wrong = tested - cls.count(reduce.COISOTROPIC)
        details = {"labels": {k: cls.count(k) for k in sorted(set(cls.labels))},
                   "neither": cls.count(reduce.NEITHER), "flagged": len(fc.flagged),
                   "singular_seeds": len(singular), "singular_seeds_unflagged": missed,
                   "residual_meaning": "fraction of regular points not coisotropic"}
        return Outcome(tested, len(fc.flagged) + len(singular), wrong / tested if tested else 0.0,
                       tested > 0 and wrong == 0 and missed == 0, details)
    return prepare, run


@register("lie_poisson", "collective brackets on T*SO(3) match the so(3)* bracket", 1e-6)
def _lie_poisson():
    def prepare(spec, env, path):
        return {}

    def run(objs, env, ctx):
        pts = symmetry.sample_chart(ctx.rng, ctx.count)
        coords = [poisson.ScalarField.coordinate(i) for i in range(3)]
        worst = max(symmetry.lie_poisson_check(pts, coords[i], coords[j])
                    for i in range(3) for j in range(3))
        return Outcome(len(pts), 0, worst, worst < ctx.tol, {"pairs": 9})
    return prepare, run


@register("singular_bracket", "S1 invariant brackets close on the Hilbert invariants", 1e-9)
def _singular_bracket():
    def prepare(spec, env, path):
        return {}

    def run(objs, env, ctx):
        pts = ctx.sample(4)
        br = symmetry.singular_bracket_residual(pts)
        rel = max(abs(s[0] * s[1] - s[2] ** 2 - s[3] ** 2)
                  for s in (symmetry.hilbert_map(x) for x in pts))
        worst = max(br, rel)
        return Outcome(len(pts), 0, worst, worst < ctx.tol,
                       {"bracket_residual": br, "relation_residual": rel})
    return prepare, run


@register("isotropy_equivariance",
          "isotropy elements commute with the sharp map at fixed points", 1e-8)
def _isotropy_equivariance():
    def prepare(spec, env, path):
        return {"action": _action(spec, env, path)}

    def run(objs, env, ctx):
        action = objs["action"]
        n = action.config_dim
        pts = ctx.sample(env.dim) + [np.zeros(env.dim)]
        if action.tag == "SO3":
            q = ctx.rng.normal(size=n)
            pts.append(np.concatenate([q, 0.5 * q]))
        strata = symmetry.stratify(action, pts)
        worst = 0.0
        for z in pts:
            ks = symmetry.isotropy_samples(action, z, ctx.rng)
            cov = ctx.rng.normal(size=(3, env.dim))
            worst = max(worst, symmetry.sharp_equivariance_residual(
                action, env.system.structure, z, ks, cov))
        summary = {f"{k[0]}:{k[1]}": len(v) for k, v in sorted(strata.items())}
        return Outcome(len(pts), 0, worst, worst < ctx.tol, {"strata": summary})
    return prepare, run


@register("noether", "momentum map conserved along an invariant Hamiltonian flow", 1e-7)
def _noether():
    def prepare(spec, env, path):
        action = _action(spec, env, path)
        h = (build_scalar(spec["hamiltonian"], env.dim, f"{path}.hamiltonian")
             if "hamiltonian" in spec else env.system.hamiltonian)
        x0 = spec.get("x0")
        x0 = None if x0 is None else _array(x0, f"{path}.x0", (env.dim,))
        return {"action": action, "h": h, "x0": x0, "t_final": _number(spec, "t_final", 5.0, path),
                "dt": _number(spec, "dt", 1e-2, path)}

    def run(objs, env, ctx):
        x0 = objs["x0"] if objs["x0"] is not None else ctx.sample(env.dim)[0]
        r = symmetry.noether_drift(objs["action"], env.system.structure, objs["h"], x0,
                                   objs["t_final"], objs["dt"])
        return Outcome(1, 0, r, r < ctx.tol)
    return prepare, run


@register("invariance", "object invariant (or equivariant) under the group", 1e-10)
def _invariance():
    def prepare(spec, env, path):
        action = _action(spec, env, path)
        target = _choice(spec, "object", "hamiltonian",
                         ("hamiltonian", "force", "control", "control_subset"), path)
        obj = getattr(env.system, target)
        if obj is None:
            raise SpecError(f"{path}.object", f"system has no {target}")
        return {"action": action, "obj": obj}

    def run(objs, env, ctx):
        obj = objs["obj"]
        pts = _points_on(obj, ctx) if isinstance(obj, reduce.Submanifold) else \
            ctx.sample(env.dim)
        group = objs["action"].sample(ctx.rng, 8)
        ok, worst = symmetry.is_invariant(objs["action"], obj, group, pts, ctx.tol)
        return Outcome(len(pts), 0, worst, ok)
    return prepare, run


@register("coadjoint_equivariance", "momentum map is coadjoint equivariant", 1e-10)
def _coadjoint():
    def prepare(spec, env, path):
        return {"action": _action(spec, env, path)}

    def run(objs, env, ctx):
        action = objs["action"]
        pts = ctx.sample(env.dim)
        r = symmetry.momentum_map(action).coadjoint_residual(action.sample(ctx.rng, 8), pts)
        return Outcome(len(pts), 0, r, r < ctx.tol)
    return prepare, run


@register("reduction_crosscheck",
          "upstairs and quotient reducibility verdicts agree", 1e-7)
def _crosscheck():
    factories = {"s1_free": symmetry.s1_free_scenario,
                 "rigid_body": symmetry.rigid_body_scenario,
                 "trivial": symmetry.trivial_scenario}

    def prepare(spec, env, path):
        return {"factory": factories[_choice(spec, "variant", None, tuple(factories), path)]}

    def run(objs, env, ctx):
        sc = objs["factory"](ctx.rng, ctx.count)
        res = symmetry.reduction_crosscheck(sc, ctx.tol)
        up, down = res.upstairs, res.downstairs
        details = {"upstairs_verdict": up.verdict, "downstairs_verdict": down.verdict,
                   "upstairs_residual": up.max_residual, "downstairs_residual": down.max_residual,
                   "residual_meaning": "largest reducibility residual on either side"}
        return Outcome(up.tested, up.skipped, max(up.max_residual, down.max_residual),
                       res.agree, details)
    return prepare, run


# CH-equivalence

def _pair(spec, env, path):
    """Build ``(lift, sys1, sys2, u2)`` for the matching checks."""
    pspec = _need(spec, "pair", path)
    pp = f"{path}.pair"
    m = _array(_need(pspec, "phi_matrix", pp), f"{pp}.phi_matrix")
    if m.ndim != 2 or m.shape[0] != m.shape[1] or abs(np.linalg.det(m)) < 1e-12:
        raise SpecError(f"{pp}.phi_matrix", "expected an invertible square matrix")
    lift = equiv.linear_lift(m)
    sys1 = env.system
    if "system2" in pspec:
        sys2 = build_system(pspec["system2"], f"{pp}.system2").system
    else:
        sys2 = None
    if sys1.dim != 2 * m.shape[0]:
        raise SpecError(f"{pp}.phi_matrix", f"map acts on configuration dimension "
                                            f"{m.shape[0]}, system has {sys1.dim // 2}")
    if pspec.get("pullback_hamiltonian", False):
        t = lift.tangent(np.zeros(sys1.dim))
        h1 = sys1.hamiltonian
        h2 = h1.compose(lambda xb: t @ xb, lambda xb: t)
        if sys2 is None:
            raise SpecError(f"{pp}.system2", "pullback_hamiltonian needs a second system")
        sys2 = type(sys2)(sys2.structure, h2, sys2.base_dim, sys2.force, sys2.control_subset,
                          sys2.control, sys2.lift_reading, "system2")
    if sys2 is None:
        raise SpecError(f"{pp}.system2", "missing second system")
    u2 = build_fiber_map(pspec.get("u2", {"builtin": "zero_section"}), sys2.base_dim, sys2.dim,
                         f"{pp}.u2")
    return {"lift": lift, "sys1": sys1, "sys2": sys2, "u2": u2}


@register("matching_poisson", "cotangent lift is a Poisson map matching the control subsets",
          1e-8)
def _hm1():
    def prepare(spec, env, path):
        return _pair(spec, env, path)

    def run(objs, env, ctx):
        sys1, sys2 = objs["sys1"], objs["sys2"]
        pts = ctx.sample(sys2.dim)
        res = equiv.check_hm1(objs["lift"], sys1.structure, sys2.structure, sys1.control_subset,
                              sys2.control_subset, pts, tol=ctx.tol)
        worst = max(res.poisson_residual, res.w_forward_residual, res.w_reverse_residual)
        return Outcome(len(pts), 0, worst, res.verdict,
                       {"poisson_residual": res.poisson_residual})
    return prepare, run


@register("matching_dynamics", "dynamics mismatch is vertical and absorbable by controls", 1e-8)
def _hm2():
    def prepare(spec, env, path):
        return _pair(spec, env, path)

    def run(objs, env, ctx):
        pts = ctx.sample(objs["sys1"].dim)
        res = equiv.check_hm2(objs["lift"], objs["sys1"], objs["sys2"], pts, tol=ctx.tol)
        return Outcome(len(pts), 0, res.max_base_residual, res.verdict,
                       {"unattainable_points": res.unattainable_points})
    return prepare, run


@register("conjugacy", "solved control law makes the closed loops conjugate", 1e-6)
def _conjugacy():
    def prepare(spec, env, path):
        objs = _pair(spec, env, path)
        objs["x0"] = _array(_need(spec, "x0", path), f"{path}.x0", (objs["sys2"].dim,))
        objs["t_final"] = _number(spec, "t_final", 10.0, path)
        objs["dt"] = _number(spec, "dt", 1e-3, path)
        objs["control"] = _choice(spec, "control", "solved", ("solved", "zero"), path)
        objs["expect"] = _choice(spec, "expect", "match", ("match", "mismatch"), path)
        return objs

    def run(objs, env, ctx):
        lift, sys1, sys2, u2 = objs["lift"], objs["sys1"], objs["sys2"], objs["u2"]
        if objs["control"] == "solved":
            u1 = equiv.solved_control(lift, sys1, sys2, u2)
        else:
            u1 = FiberMap.zero_section(sys1.base_dim)
        res = equiv.verify_conjugacy(lift, sys1, u1, sys2, u2, objs["x0"], objs["t_final"],
                                       objs["dt"])
        r = res.trajectory_residual
        passed = r < ctx.tol if objs["expect"] == "match" else r > ctx.tol
        return Outcome(len(res.traj1.times), 0, r, passed,
                       {"field_residual": res.field_residual, "control": objs["control"],
                        "expect": objs["expect"]})
    return prepare, run
