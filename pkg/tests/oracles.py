"""Independent oracles the tests check the real implementation against.

Nothing here shares code paths with src/: instantiation is re-derived by a
separate dense expansion, LP feasibility/optimality goes through
scipy.optimize.linprog, MILP optima come from exhaustive enumeration of the
binary columns, IIS families from subset enumeration, and restoration
penalties from grid search.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog

from optexplain.model import Instance, ModelIR, Sum


# --------------------------------------------------------------------------
# Independent dense expansion of a ModelIR.

def _eval_items(ir: ModelIR, items, env, sign, coeffs, const):
    for item in items:
        if isinstance(item, Sum):
            for member in ir.sets[item.set_name].members:
                child_env = dict(env)
                child_env[item.index_var] = member
                const = _eval_items(
                    ir, item.body, child_env, sign * item.sign, coeffs, const
                )
            continue
        coef = sign * item.coef_value
        if item.coef_param is not None:
            key = tuple(
                env[i.text] if i.kind == "var" else i.text
                for i in item.coef_param.indices
            )
            coef *= ir.parameters[item.coef_param.name].values[key]
        if item.var is None:
            const += coef
            continue
        vkey = (
            item.var.name,
            tuple(env[i.text] if i.kind == "var" else i.text for i in item.var.indices),
        )
        coeffs[vkey] = coeffs.get(vkey, 0.0) + coef
    return const


def dense_expand(ir: ModelIR):
    """Re-derive (rows, cols, A, b, senses, c, offset) from first principles."""
    cols = []
    for v in ir.variables.values():
        if v.index_sets:
            members = [ir.sets[s].members for s in v.index_sets]
            for t in sorted(itertools.product(*members)):
                cols.append((v.name, t))
        else:
            cols.append((v.name, ()))
    col_of = {c: j for j, c in enumerate(cols)}

    rows, senses, b = [], [], []
    A = []
    for con in ir.constraints.values():
        binder_vars = [bv for bv, _ in con.binders]
        if con.binders:
            members = [ir.sets[s].members for _, s in con.binders]
            tuples = sorted(itertools.product(*members))
        else:
            tuples = [()]
        for t in tuples:
            env = dict(zip(binder_vars, t))
            coeffs: dict = {}
            const = _eval_items(ir, con.body.items, env, 1.0, coeffs, 0.0)
            if con.rhs_param is not None:
                key = tuple(
                    env[i.text] if i.kind == "var" else i.text
                    for i in con.rhs_param.indices
                )
                rhs = ir.parameters[con.rhs_param.name].values[key]
            else:
                rhs = con.rhs_value
            row = np.zeros(len(cols))
            for vkey, coef in coeffs.items():
                row[col_of[vkey]] = coef
            rows.append((con.name, t))
            A.append(row)
            senses.append(con.sense)
            b.append(rhs - const)

    c = np.zeros(len(cols))
    coeffs: dict = {}
    offset = _eval_items(ir, ir.objective.body.items, {}, 1.0, coeffs, 0.0)
    for vkey, coef in coeffs.items():
        c[col_of[vkey]] = coef
    return rows, cols, np.array(A), np.array(b), senses, c, offset


# --------------------------------------------------------------------------
# LP oracle via scipy.

def _scipy_arrays(instance: Instance, bounds_override=None, rows=None):
    rows = list(range(instance.m)) if rows is None else list(rows)
    A = instance.dense()
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for i in rows:
        if instance.senses[i] == "<=":
            A_ub.append(A[i])
            b_ub.append(instance.b[i])
        elif instance.senses[i] == ">=":
            A_ub.append(-A[i])
            b_ub.append(-instance.b[i])
        else:
            A_eq.append(A[i])
            b_eq.append(instance.b[i])
    bounds = bounds_override or [
        (
            None if math.isinf(instance.lower[j]) else instance.lower[j],
            None if math.isinf(instance.upper[j]) else instance.upper[j],
        )
        for j in range(instance.n)
    ]
    return (
        np.array(A_ub) if A_ub else None,
        np.array(b_ub) if b_ub else None,
        np.array(A_eq) if A_eq else None,
        np.array(b_eq) if b_eq else None,
        bounds,
    )


def lp_solve_scipy(instance: Instance, sense_override=None):
    """(status, objective in declared sense, x) via scipy's HiGHS."""
    sense = sense_override or instance.objective_sense
    sign = -1.0 if sense == "max" else 1.0
    c = sign * np.array(instance.c)
    A_ub, b_ub, A_eq, b_eq, bounds = _scipy_arrays(instance)
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs")
    if res.status == 0:
        return "optimal", sign * res.fun + instance.offset, res.x
    if res.status == 2:
        return "infeasible", None, None
    if res.status == 3:
        return "unbounded", None, None
    return "other", None, None


def feasible_scipy(instance: Instance, rows=None, bounds_override=None) -> bool:
    A_ub, b_ub, A_eq, b_eq, bounds = _scipy_arrays(instance, bounds_override, rows)
    res = linprog(
        np.zeros(instance.n), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
        bounds=bounds, method="highs",
    )
    return res.status == 0


# --------------------------------------------------------------------------
# MILP oracle: enumerate binary columns, scipy-LP the continuous remainder.

def milp_enumerate(instance: Instance):
    """(status, objective) by exhaustive enumeration of binary columns."""
    binary_cols = [j for j in range(instance.n) if instance.integrality[j]]
    for j in binary_cols:
        assert instance.lower[j] >= 0 and instance.upper[j] <= 1, (
            "enumeration oracle needs binary integer columns"
        )
    sign = -1.0 if instance.objective_sense == "max" else 1.0
    best = None
    for assignment in itertools.product((0.0, 1.0), repeat=len(binary_cols)):
        bounds = [
            (
                None if math.isinf(instance.lower[j]) else instance.lower[j],
                None if math.isinf(instance.upper[j]) else instance.upper[j],
            )
            for j in range(instance.n)
        ]
        for j, v in zip(binary_cols, assignment):
            bounds[j] = (v, v)
        A_ub, b_ub, A_eq, b_eq, bounds = _scipy_arrays(instance, bounds)
        res = linprog(
            sign * np.array(instance.c), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq,
            b_eq=b_eq, bounds=bounds, method="highs",
        )
        if res.status == 0:
            value = sign * res.fun + instance.offset
            if best is None or (
                value > best + 1e-12 if instance.objective_sense == "max"
                else value < best - 1e-12
            ):
                best = value
    if best is None:
        return "infeasible", None
    return "optimal", best


# --------------------------------------------------------------------------
# IIS family enumeration (LP instances only).

def _members_of(instance: Instance):
    members = [("row", i) for i in range(instance.m)]
    for j in range(instance.n):
        if math.isfinite(instance.lower[j]):
            members.append(("lower", j))
    for j in range(instance.n):
        if math.isfinite(instance.upper[j]):
            members.append(("upper", j))
    return members


def _subset_feasible(instance: Instance, subset) -> bool:
    rows = [i for kind, i in subset if kind == "row"]
    bounds = []
    active = set(subset)
    for j in range(instance.n):
        lo = instance.lower[j] if ("lower", j) in active else -math.inf
        hi = instance.upper[j] if ("upper", j) in active else math.inf
        bounds.append(
            (None if math.isinf(lo) else lo, None if math.isinf(hi) else hi)
        )
    return feasible_scipy(instance, rows=rows, bounds_override=bounds)


def enumerate_iis_family(instance: Instance, max_members: int = 12):
    """All irreducible infeasible subsets, by brute-force subset enumeration."""
    members = _members_of(instance)
    assert len(members) <= max_members, f"{len(members)} members; too many to enumerate"
    infeasible_sets = []
    for r in range(1, len(members) + 1):
        for subset in itertools.combinations(members, r):
            if not _subset_feasible(instance, subset):
                infeasible_sets.append(frozenset(subset))
    minimal = []
    for s in infeasible_sets:
        if not any(other < s for other in infeasible_sets):
            minimal.append(s)
    return minimal


def member_labels(instance: Instance, subset) -> frozenset:
    out = []
    for kind, idx in subset:
        if kind == "row":
            out.append(instance.rows[idx].label())
        else:
            out.append(f"{kind}:{instance.cols[idx].label()}")
    return frozenset(out)


# --------------------------------------------------------------------------
# Restoration grid search.

def grid_min_delta(make_instance, lo=0.0, hi=5.0, step=1e-3, coarse=0.25):
    """Smallest delta in [lo, hi] whose instance is feasible (scipy check).

    Relaxation feasibility is monotone in delta, so a coarse scan brackets
    the threshold and a fine scan at `step` resolution pins it down; the
    result equals a full-resolution scan.
    """
    lo_infeasible = lo
    found = None
    k = 0
    while True:
        delta = lo + k * coarse
        if delta > hi + 1e-12:
            break
        if feasible_scipy(make_instance(delta)):
            found = delta
            break
        lo_infeasible = delta
        k += 1
    if found is None:
        return None
    n = int(round((found - lo_infeasible) / step))
    for j in range(n + 1):
        delta = lo_infeasible + j * step
        if feasible_scipy(make_instance(delta)):
            return delta
    return found
