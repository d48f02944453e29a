"""Instance-level LP/MILP solving on top of the two-phase simplex core.

General variable bounds are reduced to the simplex standard form internally:
finite lower bounds are shifted out, free variables are split, finite upper
bounds become extra rows. Reported duals cover exactly the instance's own
rows, re-signed to the declared objective sense so shadow prices read
naturally. Branch and bound explores best-bound-first with deterministic tie
breaking; branching bounds are passed down as extra rows in the original
variable space.

Note: a root relaxation that is unbounded is reported as "unbounded" even
though the integer problem could in principle be infeasible instead.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import ColId, Instance, RowId
from .simplex import DEFAULT_MAX_PIVOTS, solve_standard

INT_TOL = 1e-6
DEFAULT_NODE_LIMIT = 100_000

ExtraRow = tuple[int, str, float]  # (column index, sense, bound value) in x space


@dataclass
class SolveResult:
    status: str  # optimal | infeasible | unbounded | iteration-limit | node-limit
    primal: Optional[dict[ColId, float]] = None
    objective: Optional[float] = None  # declared sense, offset included
    duals: Optional[dict[RowId, float]] = None
    reduced_costs: Optional[dict[ColId, float]] = None
    degenerate: bool = False
    pivots: int = 0
    basis: list[int] = field(default_factory=list)
    # MILP fields
    incumbent_objective: Optional[float] = None
    best_bound: Optional[float] = None
    gap: Optional[float] = None
    node_count: int = 0


@dataclass
class _InternalForm:
    A: np.ndarray
    b: np.ndarray
    senses: list[str]
    c: np.ndarray
    # per original column: ("shift", internal j, lower) or
    # ("split", j_plus, j_minus)
    colmap: list[tuple]
    m_orig: int


def _build_internal(instance: Instance, extra_rows: tuple[ExtraRow, ...]) -> _InternalForm:
    n = instance.n
    m = instance.m
    sign = -1.0 if instance.objective_sense == "max" else 1.0

    colmap: list[tuple] = []
    n_int = 0
    for j in range(n):
        lo = instance.lower[j]
        if math.isinf(lo):
            colmap.append(("split", n_int, n_int + 1))
            n_int += 2
        else:
            colmap.append(("shift", n_int, lo))
            n_int += 1

    bound_rows: list[tuple[int, float]] = []  # (col, upper) in x space
    for j in range(n):
        if math.isfinite(instance.upper[j]):
            bound_rows.append((j, instance.upper[j]))

    m_int = m + len(bound_rows) + len(extra_rows)
    A = np.zeros((m_int, n_int))
    b = np.zeros(m_int)
    senses = list(instance.senses)
    b[:m] = instance.b

    def put(row: int, j: int, coef: float) -> None:
        entry = colmap[j]
        if entry[0] == "shift":
            _, jj, lo = entry
            A[row, jj] += coef
            b[row] -= coef * lo
        else:
            _, jp, jm = entry
            A[row, jp] += coef
            A[row, jm] -= coef

    for (i, j), v in instance.a.items():
        put(i, j, v)

    r = m
    for j, ub in bound_rows:
        put(r, j, 1.0)
        b[r] += ub
        senses.append("<=")
        r += 1
    for j, s, v in extra_rows:
        put(r, j, 1.0)
        b[r] += v
        senses.append(s)
        r += 1

    c = np.zeros(n_int)
    for j in range(n):
        coef = sign * instance.c[j]
        entry = colmap[j]
        if entry[0] == "shift":
            c[entry[1]] += coef
        else:
            c[entry[1]] += coef
            c[entry[2]] -= coef
    return _InternalForm(A, b, senses, c, colmap, m)


def _recover_x(form: _InternalForm, t: np.ndarray) -> np.ndarray:
    x = np.zeros(len(form.colmap))
    for j, entry in enumerate(form.colmap):
        if entry[0] == "shift":
            x[j] = t[entry[1]] + entry[2]
        else:
            x[j] = t[entry[1]] - t[entry[2]]
    return x


def solve_lp(
    instance: Instance,
    relax_integrality: bool = False,
    extra_rows: tuple[ExtraRow, ...] = (),
    max_pivots: int = DEFAULT_MAX_PIVOTS,
) -> SolveResult:
    """Solve the continuous problem; integrality is ignored when requested.

    On an optimal solve, duals and reduced costs are populated for the
    instance's rows/columns in the declared objective sense.
    """
    if instance.p > 0 and not relax_integrality:
        raise ValueError(
            "instance has integer columns; call solve_milp or relax explicitly"
        )
    form = _build_internal(instance, tuple(extra_rows))
    res = solve_standard(form.A, form.b, form.senses, form.c, max_pivots)
    if res.status != "optimal":
        return SolveResult(status=res.status, pivots=res.pivots)

    x = _recover_x(form, res.x)
    obj = float(np.dot(instance.c, x)) + instance.offset
    sign = -1.0 if instance.objective_sense == "max" else 1.0

    y = res.y[: form.m_orig] * sign
    duals = {rid: float(y[i]) for i, rid in enumerate(instance.rows)}
    primal = {cid: float(x[j]) for j, cid in enumerate(instance.cols)}

    # Reduced costs straight from the declared-sense data: c_j - y' A_j.
    rc = np.array(instance.c, dtype=float)
    for (i, j), v in instance.a.items():
        rc[j] -= y[i] * v
    reduced = {cid: float(rc[j]) for j, cid in enumerate(instance.cols)}

    return SolveResult(
        status="optimal",
        primal=primal,
        objective=obj,
        duals=duals,
        reduced_costs=reduced,
        degenerate=res.degenerate,
        pivots=res.pivots,
        basis=list(res.basis),
    )


def _fractional_column(instance: Instance, primal: dict[ColId, float]):
    """Most fractional integer column, ties by lowest column index."""
    best_j, best_score, best_val = None, INT_TOL, 0.0
    for j, cid in enumerate(instance.cols):
        if not instance.integrality[j]:
            continue
        v = primal[cid]
        frac = v - math.floor(v)
        score = min(frac, 1.0 - frac)
        if score > best_score:
            best_j, best_score, best_val = j, score, v
    return best_j, best_val


def solve_milp(
    instance: Instance,
    node_limit: int = DEFAULT_NODE_LIMIT,
    max_pivots: int = DEFAULT_MAX_PIVOTS,
    extra_rows: tuple[ExtraRow, ...] = (),
) -> SolveResult:
    """Branch and bound over LP relaxations.

    Node selection is best-bound with creation-order tie breaking; branching
    picks the most fractional integer column (lowest index on ties).
    """
    if instance.p == 0:
        return solve_lp(instance, extra_rows=extra_rows, max_pivots=max_pivots)

    def minspace(v: float) -> float:
        return v if instance.objective_sense == "min" else -v

    root = solve_lp(
        instance, relax_integrality=True, extra_rows=extra_rows, max_pivots=max_pivots
    )
    if root.status in ("infeasible", "unbounded", "iteration-limit"):
        return SolveResult(status=root.status, pivots=root.pivots, node_count=1)

    counter = 0
    heap: list[tuple[float, int, tuple[ExtraRow, ...], SolveResult]] = []
    heapq.heappush(heap, (minspace(root.objective), counter, extra_rows, root))
    incumbent: Optional[SolveResult] = None
    inc_min = math.inf
    nodes = 1
    hit_limit = False
    popped_bound = math.inf

    while heap:
        bound_min, _, extra, res = heapq.heappop(heap)
        if bound_min >= inc_min - 1e-9:
            continue
        j, v = _fractional_column(instance, res.primal)
        if j is None:
            if bound_min < inc_min:
                incumbent, inc_min = res, bound_min
            continue
        if nodes + 2 > node_limit:
            hit_limit = True
            popped_bound = bound_min  # still-open node, part of the bound
            break
        for sense, val in (("<=", math.floor(v)), (">=", math.ceil(v))):
            child_extra = extra + ((j, sense, float(val)),)
            child = solve_lp(
                instance, relax_integrality=True, extra_rows=child_extra,
                max_pivots=max_pivots,
            )
            nodes += 1
            counter += 1
            if child.status == "optimal" and minspace(child.objective) < inc_min - 1e-9:
                heapq.heappush(
                    heap, (minspace(child.objective), counter, child_extra, child)
                )

    open_bound = min((entry[0] for entry in heap), default=math.inf)
    open_bound = min(open_bound, popped_bound)
    if incumbent is None:
        if hit_limit:
            return SolveResult(status="node-limit", node_count=nodes)
        return SolveResult(status="infeasible", node_count=nodes)

    best_min = min(inc_min, open_bound) if hit_limit else inc_min
    gap = abs(inc_min - best_min) / max(1.0, abs(inc_min))
    status = "node-limit" if hit_limit and gap > 1e-6 else "optimal"

    primal = {}
    for j, cid in enumerate(instance.cols):
        v = incumbent.primal[cid]
        if instance.integrality[j] and abs(v - round(v)) <= INT_TOL:
            v = float(round(v))
        primal[cid] = v
    obj = incumbent.objective
    best_bound = best_min if instance.objective_sense == "min" else -best_min
    return SolveResult(
        status=status,
        primal=primal,
        objective=obj,
        duals=None,
        reduced_costs=None,
        degenerate=incumbent.degenerate,
        pivots=incumbent.pivots,
        basis=list(incumbent.basis),
        incumbent_objective=obj,
        best_bound=best_bound,
        gap=gap,
        node_count=nodes,
    )


def check_feasible(
    instance: Instance, extra_rows: tuple[ExtraRow, ...] = ()
) -> str:
    """feasible | infeasible | indeterminate, respecting integrality."""
    zero = Instance(
        rows=instance.rows,
        cols=instance.cols,
        a=instance.a,
        b=instance.b,
        senses=instance.senses,
        c=[0.0] * instance.n,
        objective_sense="min",
        offset=0.0,
        lower=instance.lower,
        upper=instance.upper,
        integrality=instance.integrality,
        a_prov=instance.a_prov,
        b_prov=instance.b_prov,
    )
    if instance.p > 0:
        res = solve_milp(zero, extra_rows=extra_rows)
    else:
        res = solve_lp(zero, extra_rows=extra_rows)
    if res.status == "optimal":
        return "feasible"
    if res.status == "infeasible":
        return "infeasible"
    return "indeterminate"


def solve_instance(instance: Instance) -> SolveResult:
    """Dispatch to the LP or MILP solver based on integrality."""
    return solve_milp(instance) if instance.p > 0 else solve_lp(instance)
