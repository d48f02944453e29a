"""Solution-specific explanation strategies over a model and its solver.

Five deterministic operations: IIS isolation by deletion filter, elastic
feasibility restoration on right-hand-side parameters, shadow-price
sensitivity from LP duals, what-if evaluation of concrete modifications, and
counterfactual (why-not) constraints. All operations are pure with respect to
their inputs; they copy the model before touching anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .model import (
    ColId,
    Constraint,
    Instance,
    Modification,
    ModelIR,
    ParamInstance,
    UnknownTargetError,
    apply_modification,
    instantiate,
    suggest_names,
    validate_model,
)
from .omif import ConstraintSpec
from .solver import check_feasible, solve_instance, solve_lp

LHS_IMMUTABLE_WARNING = (
    "left-hand-side coefficients are treated as immutable: relaxing them "
    "would require solving a nonconvex problem, which this tool does not "
    "attempt. Consider adjusting right-hand-side parameters instead."
)

WHAT_IF_SUGGESTION = (
    "you can evaluate a specific modification instead: state how much the "
    "parameter should change and ask for the resulting objective."
)


class ExplainError(Exception):
    pass


# --------------------------------------------------------------------------
# IIS via deletion filter.

@dataclass(frozen=True)
class Member:
    kind: str  # row | lower | upper
    index: int  # row index or column index
    label: str

    def describe(self, ir: ModelIR) -> str:
        if self.kind == "row":
            cname = self.label.split("[")[0]
            con = ir.constraints.get(cname)
            return con.desc if con else self.label
        vname = self.label.split("[")[0].split(":")[0]
        var = ir.variables.get(vname)
        side = "lower bound" if self.kind == "lower" else "upper bound"
        return f"{side} of {var.desc if var else vname}"


@dataclass
class IISResult:
    members: list[Member]
    oracle_calls: int
    indeterminate: bool = False

    def labels(self) -> list[str]:
        return [m.label for m in self.members]


def _subsystem(
    instance: Instance,
    active_rows: Sequence[int],
    active_bounds: set[tuple[int, str]],
) -> Instance:
    rows = [instance.rows[i] for i in active_rows]
    remap = {old: new for new, old in enumerate(active_rows)}
    a = {
        (remap[i], j): v for (i, j), v in instance.a.items() if i in remap
    }
    a_prov = {
        (remap[i], j): p for (i, j), p in instance.a_prov.items() if i in remap
    }
    lower = [
        lo if (j, "lower") in active_bounds else -math.inf
        for j, lo in enumerate(instance.lower)
    ]
    upper = [
        up if (j, "upper") in active_bounds else math.inf
        for j, up in enumerate(instance.upper)
    ]
    return Instance(
        rows=rows,
        cols=instance.cols,
        a=a,
        b=[instance.b[i] for i in active_rows],
        senses=[instance.senses[i] for i in active_rows],
        c=[0.0] * instance.n,
        objective_sense="min",
        offset=0.0,
        lower=lower,
        upper=upper,
        integrality=instance.integrality,
        a_prov=a_prov,
        b_prov=[instance.b_prov[i] for i in active_rows],
    )


def _all_members(instance: Instance) -> list[Member]:
    members = [
        Member("row", i, rid.label()) for i, rid in enumerate(instance.rows)
    ]
    for j, cid in enumerate(instance.cols):
        if math.isfinite(instance.lower[j]):
            members.append(Member("lower", j, f"{cid.label()} >= {instance.lower[j]:g}"))
    for j, cid in enumerate(instance.cols):
        if math.isfinite(instance.upper[j]):
            members.append(Member("upper", j, f"{cid.label()} <= {instance.upper[j]:g}"))
    return members


def compute_iis(ir: ModelIR) -> IISResult:
    """Deletion filter: probe constraints in declaration order, then bounds.

    The result is infeasible as a system, and removing any single member
    makes it feasible (unless an oracle call came back indeterminate, in
    which case the result is only guaranteed to contain an IIS).
    """
    instance = instantiate(ir)
    calls = 0
    status = check_feasible(instance)
    calls += 1
    if status == "feasible":
        raise ExplainError("model is feasible; there is no infeasible subset")

    members = _all_members(instance)
    active_rows = set(range(instance.m))
    active_bounds = {
        (m.index, m.kind) for m in members if m.kind in ("lower", "upper")
    }
    kept: list[Member] = []
    indeterminate = False

    for mem in members:
        if mem.kind == "row":
            trial_rows = sorted(active_rows - {mem.index})
            trial_bounds = active_bounds
        else:
            trial_rows = sorted(active_rows)
            trial_bounds = active_bounds - {(mem.index, mem.kind)}
        sub = _subsystem(instance, trial_rows, trial_bounds)
        st = check_feasible(sub)
        calls += 1
        if st == "infeasible":
            # Still infeasible without it: drop permanently.
            if mem.kind == "row":
                active_rows.discard(mem.index)
            else:
                active_bounds.discard((mem.index, mem.kind))
        else:
            if st == "indeterminate":
                indeterminate = True
            kept.append(mem)

    return IISResult(members=kept, oracle_calls=calls, indeterminate=indeterminate)


def iis_subsystem_status(ir: ModelIR, members: Sequence[Member]) -> str:
    """Feasibility of exactly the given members (used by tests/verification)."""
    instance = instantiate(ir)
    rows = sorted(m.index for m in members if m.kind == "row")
    bounds = {(m.index, m.kind) for m in members if m.kind in ("lower", "upper")}
    return check_feasible(_subsystem(instance, rows, bounds))


# --------------------------------------------------------------------------
# Elastic feasibility restoration.

@dataclass
class SlackAssignment:
    param: ParamInstance
    delta: float  # signed rhs change
    magnitude: float
    direction: str  # raise | lower | none
    weight: float
    rows: list[str]


@dataclass
class RejectedAdjustable:
    label: str
    reason: str
    warning: str


@dataclass
class RestorationPlan:
    adjustments: list[SlackAssignment]
    total_penalty: float
    rejected: list[RejectedAdjustable]
    certificate: dict[str, float]  # feasible point of the restored model
    certified: bool
    defaulted: bool = False  # adjustable set derived from the IIS


def _expand_adjustables(
    ir: ModelIR, refs: Sequence[tuple[str, Optional[tuple[str, ...]]]]
) -> tuple[list[ParamInstance], list[RejectedAdjustable]]:
    chosen: list[ParamInstance] = []
    rejected: list[RejectedAdjustable] = []
    for name, indices in refs:
        if name not in ir.parameters:
            raise UnknownTargetError(name, suggest_names(name, ir.parameters))
        p = ir.parameters[name]
        if indices is None:
            instances = [ParamInstance(name, t) for t in sorted(p.values)]
        else:
            key = tuple(indices)
            if key not in p.values:
                valid = [ParamInstance(name, t).label() for t in sorted(p.values)]
                raise UnknownTargetError(
                    ParamInstance(name, key).label(), suggest_names(name, valid)
                )
            instances = [ParamInstance(name, key)]
        if p.side != "constraint-rhs":
            reason = "lhs-parameter" if p.side == "constraint-lhs" else (
                p.side or "unused-parameter"
            )
            for pi in instances:
                rejected.append(
                    RejectedAdjustable(pi.label(), reason, LHS_IMMUTABLE_WARNING)
                )
            continue
        chosen.extend(instances)
    # De-duplicate, preserving order.
    seen = set()
    unique = []
    for pi in chosen:
        if pi not in seen:
            seen.add(pi)
            unique.append(pi)
    return unique, rejected


def restore_feasibility(
    ir: ModelIR,
    adjustable: Optional[Sequence[tuple[str, Optional[tuple[str, ...]]]]] = None,
    weights: Optional[dict[str, float]] = None,
) -> RestorationPlan:
    """Minimal weighted rhs adjustments that make the model feasible.

    Each adjustable rhs parameter instance gets a nonnegative raise/lower
    slack pair, both penalized; <= rows end up raised, >= rows lowered, and
    equality rows may move either way. Left-hand-side parameters are never
    solved: they land in the rejected list with the immutability warning.
    """
    instance = instantiate(ir)
    if check_feasible(instance) != "infeasible":
        raise ExplainError("model is feasible; nothing to restore")

    defaulted = not adjustable
    if defaulted:
        iis = compute_iis(ir)
        rows_in_iis = [m.index for m in iis.members if m.kind == "row"]
        pis: list[ParamInstance] = []
        for i in rows_in_iis:
            src = instance.b_prov[i]
            if src is not None and src not in pis:
                pis.append(src)
        rejected: list[RejectedAdjustable] = []
        if not pis:
            raise ExplainError(
                "insufficient adjustables: no rhs parameter feeds the "
                "conflicting constraints "
                f"({', '.join(m.label for m in iis.members)})"
            )
    else:
        pis, rejected = _expand_adjustables(ir, adjustable)
        if not pis:
            raise ExplainError(
                "no adjustable right-hand-side parameters remain after filtering; "
                + "; ".join(r.label + ": " + r.reason for r in rejected)
            )

    weights = weights or {}

    def weight_of(pi: ParamInstance) -> float:
        return float(weights.get(pi.label(), weights.get(pi.name, 1.0)))

    rows_of: dict[ParamInstance, list[int]] = {pi: [] for pi in pis}
    for i, src in enumerate(instance.b_prov):
        if src in rows_of:
            rows_of[src].append(i)

    # Elastic instance: original columns plus a (raise, lower) pair per
    # adjustable instance; original objective dropped.
    cols = list(instance.cols)
    lower = list(instance.lower)
    upper = list(instance.upper)
    integrality = list(instance.integrality)
    c = [0.0] * instance.n
    a = dict(instance.a)
    slack_cols: dict[ParamInstance, tuple[int, int]] = {}
    for pi in pis:
        j_up = len(cols)
        cols.append(ColId(f"__slack_up__{pi.label()}", ()))
        cols.append(ColId(f"__slack_dn__{pi.label()}", ()))
        for j in (j_up, j_up + 1):
            lower.append(0.0)
            upper.append(math.inf)
            integrality.append(False)
            c.append(weight_of(pi))
        slack_cols[pi] = (j_up, j_up + 1)
        for i in rows_of[pi]:
            # rhs becomes b + up - dn  =>  move slacks to the lhs.
            a[(i, j_up)] = -1.0
            a[(i, j_up + 1)] = 1.0

    elastic = Instance(
        rows=list(instance.rows),
        cols=cols,
        a=a,
        b=list(instance.b),
        senses=list(instance.senses),
        c=c,
        objective_sense="min",
        offset=0.0,
        lower=lower,
        upper=upper,
        integrality=integrality,
        a_prov={},
        b_prov=list(instance.b_prov),
    )
    res = solve_instance(elastic)
    if res.status != "optimal":
        iis = compute_iis(ir)
        covered = {i for pi in pis for i in rows_of[pi]}
        missing = [
            m.label
            for m in iis.members
            if not (m.kind == "row" and m.index in covered)
        ]
        raise ExplainError(
            "insufficient adjustables: the chosen parameters cannot resolve the "
            "conflict; uncovered members: " + ", ".join(missing)
        )

    adjustments: list[SlackAssignment] = []
    total = 0.0
    for pi in pis:
        j_up, j_dn = slack_cols[pi]
        up = res.primal[cols[j_up]]
        dn = res.primal[cols[j_dn]]
        delta = up - dn
        magnitude = abs(delta)
        total += weight_of(pi) * (up + dn)
        direction = "raise" if delta > 1e-9 else ("lower" if delta < -1e-9 else "none")
        adjustments.append(
            SlackAssignment(
                param=pi,
                delta=delta,
                magnitude=magnitude,
                direction=direction,
                weight=weight_of(pi),
                rows=[instance.rows[i].label() for i in rows_of[pi]],
            )
        )

    mods = [
        Modification(adj.param.name, adj.param.indices, "add-delta", adj.delta)
        for adj in adjustments
        if adj.magnitude > 1e-12
    ]
    certified = False
    if mods:
        restored = apply_modification(ir, mods)
        certified = check_feasible(instantiate(restored)) == "feasible"
    point = {
        cid.label(): res.primal[cid]
        for cid in instance.cols
    }
    return RestorationPlan(
        adjustments=adjustments,
        total_penalty=total,
        rejected=rejected,
        certificate=point,
        certified=certified,
        defaulted=defaulted,
    )


# --------------------------------------------------------------------------
# Sensitivity.

@dataclass
class SensitivityReport:
    param: str
    shadow_price: Optional[float] = None
    degenerate: bool = False
    validity_note: str = ""
    not_supported: Optional[str] = None  # lhs-parameter | milp-model
    suggestion: str = ""
    row: str = ""
    objective: Optional[float] = None


def sensitivity(
    ir: ModelIR, name: str, indices: tuple[str, ...] = ()
) -> SensitivityReport:
    """Shadow price of an rhs parameter from LP duality.

    MILP models and non-rhs parameters are answered with a not-supported
    report carrying a what-if conversion suggestion instead of an error.
    """
    if name not in ir.parameters:
        raise UnknownTargetError(name, suggest_names(name, ir.parameters))
    p = ir.parameters[name]
    key = tuple(indices)
    if key not in p.values:
        valid = [ParamInstance(name, t).label() for t in sorted(p.values)]
        raise UnknownTargetError(
            ParamInstance(name, key).label(), suggest_names(name, valid)
        )
    label = ParamInstance(name, key).label()
    instance = instantiate(ir)
    if instance.p > 0:
        return SensitivityReport(
            param=label,
            not_supported="milp-model",
            suggestion="duality-based sensitivity does not apply to models with "
            "integer decisions; " + WHAT_IF_SUGGESTION,
        )
    if p.side != "constraint-rhs":
        return SensitivityReport(
            param=label,
            not_supported="lhs-parameter",
            suggestion="this parameter is not a constraint right-hand side, so "
            "its effect cannot be read from dual values; " + WHAT_IF_SUGGESTION,
        )
    pi = ParamInstance(name, key)
    rows = [i for i, src in enumerate(instance.b_prov) if src == pi]
    if not rows:
        return SensitivityReport(
            param=label,
            shadow_price=0.0,
            validity_note="parameter instance does not appear in any constraint",
        )
    if len(rows) > 1:
        labels = ", ".join(instance.rows[i].label() for i in rows)
        raise ExplainError(
            f"aggregate parameter: {label} sets the rhs of several rows "
            f"({labels}); query per-row"
        )
    res = solve_lp(instance)
    if res.status != "optimal":
        raise ExplainError(f"model must be solved to optimality first (status: {res.status})")
    row = instance.rows[rows[0]]
    note = "local, basis-stable"
    if res.degenerate:
        note += "; the optimum is degenerate, so the dual value may not be unique"
    return SensitivityReport(
        param=label,
        shadow_price=res.duals[row],
        degenerate=res.degenerate,
        validity_note=note,
        row=row.label(),
        objective=res.objective,
    )


# --------------------------------------------------------------------------
# What-if evaluation.

@dataclass
class ChangedVariable:
    name: str
    before: Optional[float]
    after: Optional[float]
    change: float


@dataclass
class WhatIfReport:
    modifications: list[str]
    baseline_status: str
    baseline_objective: Optional[float]
    new_status: str
    new_objective: Optional[float]
    delta: Optional[float]
    changed_variables: list[ChangedVariable]
    notes: list[str] = field(default_factory=list)


def evaluate_modification(
    ir: ModelIR, mods: list[Modification], top_k: int = 10
) -> WhatIfReport:
    """Apply modifications, re-solve, report objective and variable deltas."""
    instance = instantiate(ir)
    base = solve_instance(instance)
    new_ir = apply_modification(ir, mods)
    new_instance = instantiate(new_ir)
    new = solve_instance(new_instance)

    notes = []
    eq_param_rows = {
        src.label()
        for i, src in enumerate(instance.b_prov)
        if src is not None and instance.senses[i] == "="
    }
    for mod in mods:
        if mod.kind == "scale-by" and mod.bound is None and mod.label() in eq_param_rows:
            notes.append(
                f"scaling {mod.label()}, the rhs of an equality row; the balance "
                "it encodes is rescaled, not relaxed"
            )

    delta = None
    if base.objective is not None and new.objective is not None:
        delta = new.objective - base.objective

    changed: list[ChangedVariable] = []
    if base.primal is not None and new.primal is not None:
        diffs = []
        for cid in instance.cols:
            b_v = base.primal.get(cid)
            n_v = new.primal.get(cid)
            if b_v is None or n_v is None:
                continue
            diffs.append((abs(n_v - b_v), cid, b_v, n_v))
        diffs.sort(key=lambda t: (-t[0], t[1].label()))
        for mag, cid, b_v, n_v in diffs[:top_k]:
            if mag > 1e-9:
                changed.append(ChangedVariable(cid.label(), b_v, n_v, n_v - b_v))

    def _echo(mod: Modification) -> str:
        verb = {"set-to": "set to", "add-delta": "changed by", "scale-by": "scaled by"}[
            mod.kind
        ]
        note = f" ({mod.units_note})" if mod.units_note else ""
        return f"{mod.label()} {verb} {mod.magnitude:g}{note}"

    return WhatIfReport(
        modifications=[_echo(m) for m in mods],
        baseline_status=base.status,
        baseline_objective=base.objective,
        new_status=new.status,
        new_objective=new.objective,
        delta=delta,
        changed_variables=changed,
        notes=notes,
    )


# --------------------------------------------------------------------------
# Why-not counterfactuals.

@dataclass
class WhyNotReport:
    specs: list[str]
    baseline_status: str
    baseline_objective: Optional[float]
    counterfactual_status: str
    counterfactual_objective: Optional[float]
    delta: Optional[float]
    iis: Optional[IISResult] = None
    iis_descriptions: list[str] = field(default_factory=list)


def attach_counterfactuals(ir: ModelIR, specs: Sequence[ConstraintSpec]) -> ModelIR:
    """New model with the specs attached as extra constraint rows."""
    aug = ir.copy()
    for k, spec in enumerate(specs, 1):
        name = f"counterfactual_{k}"
        while name in aug.component_names():
            name += "_"
        aug.constraints[name] = Constraint(
            name=name,
            binders=(),
            body=spec.body,
            sense=spec.sense,
            rhs_value=spec.rhs_value,
            rhs_param=spec.rhs_param,
            desc=f"counterfactual condition: {spec.text or 'added constraint'}",
        )
    report = validate_model(aug)
    if not report.ok:
        raise ExplainError(
            "counterfactual constraints do not validate: "
            + "; ".join(f"{v.path}: {v.message}" for v in report.violations)
        )
    return aug


def apply_counterfactual(ir: ModelIR, specs: Sequence[ConstraintSpec]) -> WhyNotReport:
    """Force the user's alternative and report the objective trade-off.

    If the forced alternative is impossible, the report carries the IIS of
    the augmented model so the explanation can say which requirements clash.
    """
    instance = instantiate(ir)
    base = solve_instance(instance)
    aug = attach_counterfactuals(ir, specs)
    aug_instance = instantiate(aug)
    counter = solve_instance(aug_instance)

    delta = None
    if base.objective is not None and counter.objective is not None:
        delta = counter.objective - base.objective

    iis = None
    descriptions: list[str] = []
    if counter.status == "infeasible":
        iis = compute_iis(aug)
        descriptions = [m.describe(aug) for m in iis.members]

    return WhyNotReport(
        specs=[s.text or "added constraint" for s in specs],
        baseline_status=base.status,
        baseline_objective=base.objective,
        counterfactual_status=counter.status,
        counterfactual_objective=counter.objective,
        delta=delta,
        iis=iis,
        iis_descriptions=descriptions,
    )
