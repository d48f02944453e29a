"""Symbolic optimization model: validation, instantiation, modification, lookup.

The model IR is the single source of truth for every other module. A model is
a collection of named index sets, parameters, variables, constraint families
and one objective; every named component carries a human-authored description
used for grounding natural-language queries. ``instantiate`` expands the IR
into a sparse standard-form instance with full provenance (which parameter
instance produced each coefficient), which is what makes targeted what-if
modifications and rhs-slack restoration possible downstream.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Union


class ModelError(Exception):
    """Base error for model construction and manipulation."""


class UnknownTargetError(ModelError):
    def __init__(self, target: str, suggestions: list[str]):
        self.target = target
        self.suggestions = suggestions
        hint = f" (did you mean: {', '.join(suggestions)}?)" if suggestions else ""
        super().__init__(f"unknown component {target!r}{hint}")


class AmbiguousLookupError(ModelError):
    def __init__(self, query: str, candidates: list[str]):
        self.query = query
        self.candidates = candidates
        super().__init__(
            f"lookup {query!r} is ambiguous; candidates: {', '.join(candidates)}"
        )


class NotFoundError(ModelError):
    def __init__(self, query: str, suggestions: list[str]):
        self.query = query
        self.suggestions = suggestions
        hint = f" (did you mean: {', '.join(suggestions)}?)" if suggestions else ""
        super().__init__(f"no component matches {query!r}{hint}")


class InstantiationError(ModelError):
    pass


# --------------------------------------------------------------------------
# Expression atoms.  An index element is either a concrete label or an index
# variable bound by a constraint-family binder or a `sum over` binder.

@dataclass(frozen=True)
class Idx:
    kind: str  # "label" | "var"
    text: str

    def __post_init__(self):
        if self.kind not in ("label", "var"):
            raise ModelError(f"bad index kind {self.kind!r}")


@dataclass(frozen=True)
class Ref:
    """Reference to a parameter or variable, possibly indexed.

    Source position is carried for diagnostics but excluded from equality,
    so structural round-trip laws are unaffected."""

    name: str
    indices: tuple[Idx, ...] = ()
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Term:
    """``coef_value * coef_param * var``; var of None means a constant term."""

    coef_value: float = 1.0
    coef_param: Optional[Ref] = None
    var: Optional[Ref] = None


@dataclass(frozen=True)
class Sum:
    """``sign * sum over index_var in set_name: body``."""

    index_var: str
    set_name: str
    body: tuple["ExprItem", ...]
    sign: float = 1.0


ExprItem = Union[Term, Sum]


@dataclass(frozen=True)
class LinExpr:
    items: tuple[ExprItem, ...] = ()


# --------------------------------------------------------------------------
# Named components.

@dataclass(frozen=True)
class IndexSet:
    name: str
    members: tuple[str, ...]
    desc: str = ""


@dataclass
class Parameter:
    name: str
    index_sets: tuple[str, ...] = ()
    values: dict[tuple[str, ...], float] = field(default_factory=dict)
    desc: str = ""
    # Assigned by validate_model; derived data, so excluded from equality.
    side: Optional[str] = field(default=None, compare=False)

    @property
    def is_scalar(self) -> bool:
        return not self.index_sets


@dataclass(frozen=True)
class Variable:
    name: str
    index_sets: tuple[str, ...] = ()
    domain: str = "continuous"  # continuous | integer | binary
    lower: float = 0.0
    upper: float = math.inf
    desc: str = ""

    def effective_bounds(self) -> tuple[float, float]:
        if self.domain == "binary":
            return (max(self.lower, 0.0), min(self.upper, 1.0))
        return (self.lower, self.upper)


@dataclass(frozen=True)
class Constraint:
    name: str
    binders: tuple[tuple[str, str], ...] = ()  # (index var, set name)
    body: LinExpr = field(default_factory=LinExpr)
    sense: str = "<="  # <= | >= | =
    rhs_value: Optional[float] = None
    rhs_param: Optional[Ref] = None
    desc: str = ""

    @property
    def index_sets(self) -> tuple[str, ...]:
        return tuple(s for _, s in self.binders)


@dataclass(frozen=True)
class Objective:
    sense: str = "min"  # min | max
    body: LinExpr = field(default_factory=LinExpr)
    desc: str = ""


@dataclass
class Metadata:
    name: str = "model"
    # unsolved | optimal | infeasible | unbounded; cache only, not identity.
    status: str = field(default="unsolved", compare=False)


@dataclass
class ModelIR:
    sets: dict[str, IndexSet] = field(default_factory=dict)
    parameters: dict[str, Parameter] = field(default_factory=dict)
    variables: dict[str, Variable] = field(default_factory=dict)
    constraints: dict[str, Constraint] = field(default_factory=dict)
    objective: Objective = field(default_factory=Objective)
    metadata: Metadata = field(default_factory=Metadata)

    def component_names(self) -> list[str]:
        return (
            list(self.sets)
            + list(self.parameters)
            + list(self.variables)
            + list(self.constraints)
        )

    def copy(self) -> "ModelIR":
        """Deep enough copy: parameter value dicts are fresh, expressions are
        immutable and shared."""
        return ModelIR(
            sets=dict(self.sets),
            parameters={
                k: Parameter(p.name, p.index_sets, dict(p.values), p.desc, p.side)
                for k, p in self.parameters.items()
            },
            variables=dict(self.variables),
            constraints=dict(self.constraints),
            objective=self.objective,
            metadata=Metadata(self.metadata.name, self.metadata.status),
        )


# --------------------------------------------------------------------------
# Validation.

@dataclass(frozen=True)
class Violation:
    path: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    sides: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


def _index_tuples(ir: ModelIR, set_names: Iterable[str]) -> list[tuple[str, ...]]:
    """All concrete index tuples, sorted lexicographically."""
    member_lists = []
    for s in set_names:
        if s not in ir.sets:
            return []
        member_lists.append(ir.sets[s].members)
    return sorted(itertools.product(*member_lists))


def _check_ref(
    ir: ModelIR,
    ref: Ref,
    declared_sets: tuple[str, ...],
    bound: dict[str, str],
    path: str,
    out: list[Violation],
) -> None:
    if len(ref.indices) != len(declared_sets):
        out.append(
            Violation(
                path,
                f"{ref.name!r} expects {len(declared_sets)} indices, got {len(ref.indices)}",
            )
        )
        return
    for pos, (idx, set_name) in enumerate(zip(ref.indices, declared_sets)):
        if idx.kind == "var":
            if idx.text not in bound:
                out.append(Violation(path, f"unbound index variable {idx.text!r}"))
            elif bound[idx.text] != set_name:
                out.append(
                    Violation(
                        path,
                        f"index variable {idx.text!r} ranges over {bound[idx.text]!r}, "
                        f"but position {pos} of {ref.name!r} is indexed by {set_name!r}",
                    )
                )
        else:
            members = ir.sets[set_name].members if set_name in ir.sets else ()
            if idx.text not in members:
                out.append(
                    Violation(path, f"unknown index {idx.text!r} for set {set_name!r}")
                )


def _check_expr(
    ir: ModelIR,
    expr: LinExpr,
    binders: dict[str, str],
    path: str,
    out: list[Violation],
    sides: dict[str, set],
    side_tag: str,
) -> None:
    for term, bound in _walk_refs_with_binders(expr, binders):
        if term.var is not None:
            if term.var.name not in ir.variables:
                out.append(Violation(path, f"unknown variable {term.var.name!r}"))
            else:
                _check_ref(
                    ir, term.var, ir.variables[term.var.name].index_sets, bound, path, out
                )
        if term.coef_param is not None:
            pname = term.coef_param.name
            if pname not in ir.parameters:
                out.append(Violation(path, f"unknown parameter {pname!r}"))
            else:
                _check_ref(
                    ir, term.coef_param, ir.parameters[pname].index_sets, bound, path, out
                )
                sides.setdefault(pname, set()).add(side_tag)


def _walk_refs_with_binders(expr: LinExpr, binders: dict[str, str]):
    def rec(items, bound):
        for item in items:
            if isinstance(item, Sum):
                yield from rec(item.body, {**bound, item.index_var: item.set_name})
            else:
                yield item, bound

    yield from rec(expr.items, dict(binders))


def validate_model(ir: ModelIR) -> ValidationReport:
    """Check every IR invariant; violations are data, not exceptions.

    Also computes each parameter's `side` tag (objective-cost, constraint-lhs
    or constraint-rhs) and stores it on the Parameter, since downstream
    sensitivity and restoration decisions hinge on it.
    """
    out: list[Violation] = []
    sides: dict[str, set] = {}

    names_seen: dict[str, str] = {}
    for kind, names in (
        ("set", ir.sets),
        ("parameter", ir.parameters),
        ("variable", ir.variables),
        ("constraint", ir.constraints),
    ):
        for n in names:
            if n in names_seen:
                out.append(
                    Violation(n, f"duplicate component name (also a {names_seen[n]})")
                )
            names_seen[n] = kind

    for s in ir.sets.values():
        if len(set(s.members)) != len(s.members):
            out.append(Violation(s.name, "set members must be distinct"))
        if not s.desc:
            out.append(Violation(s.name, "description required"))

    for p in ir.parameters.values():
        if not p.desc:
            out.append(Violation(p.name, "description required"))
        for s in p.index_sets:
            if s not in ir.sets:
                out.append(Violation(p.name, f"unknown set {s!r}"))
        valid_tuples = set(_index_tuples(ir, p.index_sets)) if p.index_sets else {()}
        for key, v in p.values.items():
            if key not in valid_tuples:
                out.append(Violation(p.name, f"unknown index {key!r}"))
            if not math.isfinite(v):
                out.append(Violation(p.name, f"non-finite value at {key!r}"))
        missing = valid_tuples - set(p.values)
        if p.index_sets and missing:
            shown = sorted(missing)[:3]
            out.append(Violation(p.name, f"missing values for indices {shown}"))

    for v in ir.variables.values():
        if not v.desc:
            out.append(Violation(v.name, "description required"))
        for s in v.index_sets:
            if s not in ir.sets:
                out.append(Violation(v.name, f"unknown set {s!r}"))
        if v.domain not in ("continuous", "integer", "binary"):
            out.append(Violation(v.name, f"unknown domain {v.domain!r}"))
        lo, hi = v.effective_bounds()
        if lo > hi:
            out.append(Violation(v.name, f"empty bound interval [{lo}, {hi}]"))

    for c in ir.constraints.values():
        if not c.desc:
            out.append(Violation(c.name, "description required"))
        binders = {}
        for ivar, s in c.binders:
            if s not in ir.sets:
                out.append(Violation(c.name, f"unknown set {s!r}"))
            binders[ivar] = s
        if c.sense not in ("<=", ">=", "="):
            out.append(Violation(c.name, f"unknown sense {c.sense!r}"))
        _check_expr(ir, c.body, binders, c.name, out, sides, "constraint-lhs")
        if c.rhs_param is not None:
            pname = c.rhs_param.name
            if pname not in ir.parameters:
                out.append(Violation(c.name, f"unknown parameter {pname!r} in rhs"))
            else:
                _check_ref(
                    ir, c.rhs_param, ir.parameters[pname].index_sets, binders, c.name, out
                )
                sides.setdefault(pname, set()).add("constraint-rhs")
        elif c.rhs_value is None:
            out.append(Violation(c.name, "constraint has no rhs"))

    if not ir.objective.body.items:
        out.append(Violation("objective", "objective expression is empty"))
    if ir.objective.sense not in ("min", "max"):
        out.append(Violation("objective", f"unknown sense {ir.objective.sense!r}"))
    _check_expr(ir, ir.objective.body, {}, "objective", out, sides, "objective-cost")

    final_sides: dict[str, str] = {}
    for pname, tags in sides.items():
        if len(tags) > 1:
            out.append(
                Violation(
                    pname,
                    "ambiguous side: parameter used as "
                    + " and ".join(sorted(tags)),
                )
            )
        else:
            final_sides[pname] = next(iter(tags))
    for pname, p in ir.parameters.items():
        p.side = final_sides.get(pname)

    return ValidationReport(violations=out, sides=final_sides)


# --------------------------------------------------------------------------
# Instantiation to standard form.

@dataclass(frozen=True)
class RowId:
    constraint: str
    indices: tuple[str, ...] = ()

    def label(self) -> str:
        if self.indices:
            return f"{self.constraint}[{','.join(self.indices)}]"
        return self.constraint


@dataclass(frozen=True)
class ColId:
    variable: str
    indices: tuple[str, ...] = ()

    def label(self) -> str:
        if self.indices:
            return f"{self.variable}[{','.join(self.indices)}]"
        return self.variable


@dataclass(frozen=True)
class ParamInstance:
    name: str
    indices: tuple[str, ...] = ()

    def label(self) -> str:
        if self.indices:
            return f"{self.name}[{','.join(self.indices)}]"
        return self.name


@dataclass
class Instance:
    """Standard-form expansion: objective-sense c'x over rows A x (sense) b."""

    rows: list[RowId]
    cols: list[ColId]
    a: dict[tuple[int, int], float]
    b: list[float]
    senses: list[str]
    c: list[float]
    objective_sense: str
    offset: float
    lower: list[float]
    upper: list[float]
    integrality: list[bool]
    # provenance: every nonzero of A maps to the parameter instances (or a
    # literal marker) that produced it; each rhs maps to its source.
    a_prov: dict[tuple[int, int], tuple[ParamInstance, ...]]
    b_prov: list[Optional[ParamInstance]]

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def n(self) -> int:
        return len(self.cols)

    @property
    def p(self) -> int:
        return sum(1 for f in self.integrality if f)

    def col_index(self) -> dict[ColId, int]:
        return {cid: j for j, cid in enumerate(self.cols)}

    def dense(self):
        import numpy as np

        mat = np.zeros((self.m, self.n))
        for (i, j), v in self.a.items():
            mat[i, j] = v
        return mat


def _resolve_indices(ref: Ref, env: dict[str, str]) -> tuple[str, ...]:
    out = []
    for idx in ref.indices:
        out.append(env[idx.text] if idx.kind == "var" else idx.text)
    return tuple(out)


def _param_value(ir: ModelIR, name: str, indices: tuple[str, ...], where: str) -> float:
    p = ir.parameters[name]
    try:
        v = p.values[indices]
    except KeyError:
        raise InstantiationError(
            f"{where}: parameter {ParamInstance(name, indices).label()} has no value"
        )
    if not math.isfinite(v):
        raise InstantiationError(
            f"{where}: parameter {ParamInstance(name, indices).label()} is non-finite ({v})"
        )
    return v


def _accumulate_expr(
    ir: ModelIR,
    expr_items: tuple[ExprItem, ...],
    env: dict[str, str],
    sign: float,
    coeffs: dict[tuple[str, tuple[str, ...]], float],
    prov: dict[tuple[str, tuple[str, ...]], list[ParamInstance]],
    where: str,
) -> float:
    """Fold expression items into per-variable coefficients; returns the
    accumulated constant part."""
    const = 0.0
    for item in expr_items:
        if isinstance(item, Sum):
            if item.set_name not in ir.sets:
                raise InstantiationError(f"{where}: unknown set {item.set_name!r}")
            for member in ir.sets[item.set_name].members:
                const += _accumulate_expr(
                    ir,
                    item.body,
                    {**env, item.index_var: member},
                    sign * item.sign,
                    coeffs,
                    prov,
                    where,
                )
            continue
        coef = sign * item.coef_value
        sources: list[ParamInstance] = []
        if item.coef_param is not None:
            pidx = _resolve_indices(item.coef_param, env)
            coef *= _param_value(ir, item.coef_param.name, pidx, where)
            sources.append(ParamInstance(item.coef_param.name, pidx))
        if item.var is None:
            const += coef
            continue
        vidx = _resolve_indices(item.var, env)
        key = (item.var.name, vidx)
        coeffs[key] = coeffs.get(key, 0.0) + coef
        prov.setdefault(key, []).extend(sources)
    return const


def instantiate(ir: ModelIR) -> Instance:
    """Expand the IR to a standard-form instance.

    Ordering is deterministic: families in declaration order, index tuples in
    lexicographic order. Constants appearing in a constraint body are folded
    into the rhs.
    """
    cols: list[ColId] = []
    col_meta: list[Variable] = []
    for v in ir.variables.values():
        tuples = _index_tuples(ir, v.index_sets) if v.index_sets else [()]
        for t in tuples:
            cols.append(ColId(v.name, t))
            col_meta.append(v)
    if not cols:
        raise InstantiationError("model declares no variable instances")
    col_of = {cid: j for j, cid in enumerate(cols)}

    rows: list[RowId] = []
    a: dict[tuple[int, int], float] = {}
    a_prov: dict[tuple[int, int], tuple[ParamInstance, ...]] = {}
    b: list[float] = []
    senses: list[str] = []
    b_prov: list[Optional[ParamInstance]] = []

    for con in ir.constraints.values():
        binder_vars = [bv for bv, _ in con.binders]
        tuples = _index_tuples(ir, con.index_sets) if con.binders else [()]
        for t in tuples:
            env = dict(zip(binder_vars, t))
            row = len(rows)
            coeffs: dict[tuple[str, tuple[str, ...]], float] = {}
            prov: dict[tuple[str, tuple[str, ...]], list[ParamInstance]] = {}
            where = RowId(con.name, t).label()
            const = _accumulate_expr(ir, con.body.items, env, 1.0, coeffs, prov, where)
            if con.rhs_param is not None:
                pidx = _resolve_indices(con.rhs_param, env)
                rhs = _param_value(ir, con.rhs_param.name, pidx, where)
                b_prov.append(ParamInstance(con.rhs_param.name, pidx))
            else:
                rhs = float(con.rhs_value)
                b_prov.append(None)
            rows.append(RowId(con.name, t))
            senses.append(con.sense)
            b.append(rhs - const)
            for (vname, vidx), coef in coeffs.items():
                key = (vname, vidx)
                try:
                    j = col_of[ColId(vname, vidx)]
                except KeyError:
                    raise InstantiationError(
                        f"{where}: unknown variable instance {ColId(vname, vidx).label()}"
                    )
                if coef != 0.0:
                    a[(row, j)] = coef
                    a_prov[(row, j)] = tuple(prov.get(key, ()))

    if not rows:
        raise InstantiationError("model has no constraint instances")

    c = [0.0] * len(cols)
    obj_coeffs: dict[tuple[str, tuple[str, ...]], float] = {}
    obj_prov: dict[tuple[str, tuple[str, ...]], list[ParamInstance]] = {}
    offset = _accumulate_expr(
        ir, ir.objective.body.items, {}, 1.0, obj_coeffs, obj_prov, "objective"
    )
    for (vname, vidx), coef in obj_coeffs.items():
        try:
            j = col_of[ColId(vname, vidx)]
        except KeyError:
            raise InstantiationError(
                f"objective: unknown variable instance {ColId(vname, vidx).label()}"
            )
        c[j] = coef

    lower = []
    upper = []
    integ = []
    for var in col_meta:
        lo, hi = var.effective_bounds()
        lower.append(lo)
        upper.append(hi)
        integ.append(var.domain in ("integer", "binary"))

    for vec, what in ((b, "rhs"), (c, "cost")):
        for v in vec:
            if not math.isfinite(v):
                raise InstantiationError(f"non-finite {what} value {v}")

    return Instance(
        rows=rows,
        cols=cols,
        a=a,
        b=b,
        senses=senses,
        c=c,
        objective_sense=ir.objective.sense,
        offset=offset,
        lower=lower,
        upper=upper,
        integrality=integ,
        a_prov=a_prov,
        b_prov=b_prov,
    )


# --------------------------------------------------------------------------
# Modification.

@dataclass(frozen=True)
class Modification:
    """A targeted change to a parameter instance or a variable bound."""

    target: str
    indices: tuple[str, ...] = ()
    kind: str = "set-to"  # set-to | add-delta | scale-by
    magnitude: float = 0.0
    bound: Optional[str] = None  # None => parameter; "lower"/"upper" => var bound
    units_note: str = ""

    def label(self) -> str:
        base = ParamInstance(self.target, self.indices).label()
        if self.bound:
            base += f".{self.bound}"
        return base


def edit_distance(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def suggest_names(query: str, names: Iterable[str], max_distance: int = 2) -> list[str]:
    scored = [(edit_distance(query.lower(), n.lower()), n) for n in names]
    return [n for d, n in sorted(scored) if d <= max_distance]


def _apply_kind(old: float, kind: str, magnitude: float) -> float:
    if kind == "set-to":
        return float(magnitude)
    if kind == "add-delta":
        return old + float(magnitude)
    if kind == "scale-by":
        return old * float(magnitude)
    raise ModelError(f"unknown modification kind {kind!r}")


def apply_modification(ir: ModelIR, mods: list[Modification]) -> ModelIR:
    """Return a new ModelIR with mods applied; the input is left untouched
    and the new model's solve-status cache is reset."""
    new = ir.copy()
    new.metadata.status = "unsolved"
    for mod in mods:
        if mod.bound is not None:
            if mod.target not in new.variables:
                raise UnknownTargetError(
                    mod.target, suggest_names(mod.target, new.variables)
                )
            var = new.variables[mod.target]
            if mod.indices:
                raise ModelError(
                    f"bound modifications apply to the whole family {mod.target!r}"
                )
            lo, hi = var.lower, var.upper
            if mod.bound == "lower":
                lo = _apply_kind(lo, mod.kind, mod.magnitude)
            elif mod.bound == "upper":
                hi = _apply_kind(hi, mod.kind, mod.magnitude)
            else:
                raise ModelError(f"unknown bound {mod.bound!r}")
            new.variables[mod.target] = replace(var, lower=lo, upper=hi)
            continue
        if mod.target not in new.parameters:
            raise UnknownTargetError(
                mod.target, suggest_names(mod.target, new.parameters)
            )
        param = new.parameters[mod.target]
        key = tuple(mod.indices)
        if key not in param.values:
            valid = [ParamInstance(mod.target, k).label() for k in param.values]
            raise UnknownTargetError(mod.label(), suggest_names(mod.label(), valid))
        param.values[key] = _apply_kind(param.values[key], mod.kind, mod.magnitude)
    return new


# --------------------------------------------------------------------------
# Component lookup.

@dataclass
class ComponentView:
    kind: str  # set | parameter | variable | constraint | objective
    name: str
    desc: str
    index_sets: tuple[str, ...] = ()
    entries: list[tuple[tuple[str, ...], object]] = field(default_factory=list)
    extra: dict = field(default_factory=dict)


_STOPWORDS = frozenset(
    "the a an of for to in at on and or is are what how many much value values".split()
)


def _keyword_candidates(ir: ModelIR, query: str) -> list[str]:
    """Name-substring matches outrank description-keyword matches; an
    ambiguity within the winning tier is surfaced, never guessed."""
    q = query.lower()
    qtokens = [t for t in q.replace("_", " ").split() if t not in _STOPWORDS]
    name_hits, desc_hits = [], []
    for name in ir.component_names():
        comp_desc = _component_desc(ir, name).lower()
        name_l = name.lower()
        if q and q in name_l:
            name_hits.append(name)
        elif q and q in comp_desc:
            desc_hits.append(name)
        elif qtokens and all(t in name_l or t in comp_desc for t in qtokens):
            desc_hits.append(name)
    return name_hits if name_hits else desc_hits


def _component_desc(ir: ModelIR, name: str) -> str:
    if name in ir.sets:
        return ir.sets[name].desc
    if name in ir.parameters:
        return ir.parameters[name].desc
    if name in ir.variables:
        return ir.variables[name].desc
    if name in ir.constraints:
        return ir.constraints[name].desc
    return ""


def lookup_component(
    ir: ModelIR,
    name: str,
    indices: Optional[tuple[str, ...]] = None,
    solution=None,
) -> ComponentView:
    """Resolve a component by exact name, then by unique keyword match.

    Partial index tuples act as a prefix wildcard over instances. When a
    SolveResult is supplied, variable views carry solved values and
    constraint views carry dual values.
    """
    if name == "objective" or (name not in ir.component_names() and name in ("obj",)):
        view = ComponentView(
            kind="objective",
            name="objective",
            desc=ir.objective.desc or "objective function",
            extra={"sense": ir.objective.sense},
        )
        if solution is not None and solution.status == "optimal":
            view.extra["value"] = solution.objective
        return view

    resolved = name if name in ir.component_names() else None
    if resolved is None:
        cands = _keyword_candidates(ir, name)
        if len(cands) == 1:
            resolved = cands[0]
        elif len(cands) > 1:
            raise AmbiguousLookupError(name, sorted(cands))
        else:
            raise NotFoundError(name, suggest_names(name, ir.component_names()))

    prefix = tuple(indices) if indices else ()

    def match(t: tuple[str, ...]) -> bool:
        return t[: len(prefix)] == prefix

    if resolved in ir.sets:
        s = ir.sets[resolved]
        return ComponentView("set", s.name, s.desc, entries=[((), list(s.members))])

    if resolved in ir.parameters:
        p = ir.parameters[resolved]
        entries = [(t, v) for t, v in sorted(p.values.items()) if match(t)]
        if prefix and not entries:
            valid = sorted({t[: len(prefix)] for t in p.values})[:5]
            raise NotFoundError(
                f"{resolved}[{','.join(prefix)}]",
                [ParamInstance(resolved, t).label() for t in valid],
            )
        return ComponentView(
            "parameter", p.name, p.desc, p.index_sets, entries, {"side": p.side}
        )

    if resolved in ir.variables:
        v = ir.variables[resolved]
        tuples = [t for t in (_index_tuples(ir, v.index_sets) if v.index_sets else [()])]
        tuples = [t for t in tuples if match(t)]
        entries: list[tuple[tuple[str, ...], object]] = []
        if solution is not None and solution.primal is not None:
            for t in tuples:
                entries.append((t, solution.primal.get(ColId(v.name, t))))
        else:
            entries = [(t, None) for t in tuples]
        return ComponentView(
            "variable", v.name, v.desc, v.index_sets, entries, {"domain": v.domain}
        )

    con = ir.constraints[resolved]
    tuples = _index_tuples(ir, con.index_sets) if con.binders else [()]
    tuples = [t for t in tuples if match(t)]
    entries = []
    if solution is not None and solution.duals is not None:
        for t in tuples:
            entries.append((t, solution.duals.get(RowId(con.name, t))))
    else:
        entries = [(t, None) for t in tuples]
    return ComponentView(
        "constraint", con.name, con.desc, con.index_sets, entries, {"sense": con.sense}
    )
