"""Two-phase primal simplex over min c'x s.t. A x {<=,>=,=} b, x >= 0.

Dense tableau implementation sized for desk-scale models. Pivot selection is
Dantzig's rule (most negative reduced cost, lowest index on ties) with an
automatic switch to Bland's rule after a run of degenerate pivots, which
guarantees termination. Duals are recovered at the end from the final basis
(solve B' y = c_B), which is more robust than reading them off the tableau.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

FEAS_TOL = 1e-6
PIVOT_TOL = 1e-9
DEGENERATE_RUN_FOR_BLAND = 1000
DEFAULT_MAX_PIVOTS = 50_000


@dataclass
class StdResult:
    status: str  # optimal | infeasible | unbounded | iteration-limit
    x: Optional[np.ndarray] = None  # structural part only (first n entries)
    objective: Optional[float] = None
    y: Optional[np.ndarray] = None  # one dual per input row
    reduced_costs: Optional[np.ndarray] = None  # structural columns
    pivots: int = 0
    degenerate: bool = False
    basis: list[int] = field(default_factory=list)


class _Tableau:
    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int]):
        m, _ = A.shape
        self.T = np.hstack([A, b.reshape(m, 1)]).astype(float)
        self.basis = list(basis)
        self.pivots = 0
        self.degenerate_run = 0

    def reduced_costs(self, c: np.ndarray) -> np.ndarray:
        cb = c[self.basis]
        # z_j - c_j computed from the current tableau rows.
        return c - cb @ self.T[:, :-1]

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        piv = T[row, col]
        T[row] /= piv
        for i in range(T.shape[0]):
            if i != row and abs(T[i, col]) > 0.0:
                T[i] -= T[i, col] * T[row]
        self.basis[row] = col
        self.pivots += 1

    def run(self, c: np.ndarray, max_pivots: int) -> str:
        """Minimize c'x from the current basic feasible tableau.

        Returns "optimal", "unbounded" or "iteration-limit".
        """
        m = self.T.shape[0]
        while True:
            if self.pivots >= max_pivots:
                return "iteration-limit"
            rc = self.reduced_costs(c)
            use_bland = self.degenerate_run >= DEGENERATE_RUN_FOR_BLAND
            col = -1
            if use_bland:
                for j in range(len(rc)):
                    if rc[j] < -PIVOT_TOL:
                        col = j
                        break
            else:
                j = int(np.argmin(rc))
                if rc[j] < -PIVOT_TOL:
                    col = j
            if col < 0:
                return "optimal"

            # Ratio test: smallest b_i / a_ij over a_ij > 0; ties broken by
            # lowest leaving basis index (Bland-compatible, deterministic).
            best_ratio = None
            best_row = -1
            for i in range(m):
                a = self.T[i, col]
                if a > PIVOT_TOL:
                    ratio = self.T[i, -1] / a
                    if (
                        best_ratio is None
                        or ratio < best_ratio - PIVOT_TOL
                        or (
                            abs(ratio - best_ratio) <= PIVOT_TOL
                            and self.basis[i] < self.basis[best_row]
                        )
                    ):
                        best_ratio = ratio
                        best_row = i
            if best_row < 0:
                return "unbounded"
            if best_ratio is not None and abs(best_ratio) <= FEAS_TOL:
                self.degenerate_run += 1
            else:
                self.degenerate_run = 0
            self.pivot(best_row, col)


def solve_standard(
    A: np.ndarray,
    b: np.ndarray,
    senses: list[str],
    c: np.ndarray,
    max_pivots: int = DEFAULT_MAX_PIVOTS,
) -> StdResult:
    """Solve min c'x s.t. A x (senses) b, x >= 0 by two-phase simplex."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m, n = A.shape

    if m == 0:
        # No rows at all: x = 0 is optimal unless some cost is negative.
        if np.any(c < -PIVOT_TOL):
            return StdResult(status="unbounded")
        return StdResult(
            status="optimal",
            x=np.zeros(n),
            objective=0.0,
            y=np.zeros(0),
            reduced_costs=c.copy(),
        )

    # Normalize rows so b >= 0, remembering the flip factor to restore duals.
    flip = np.ones(m)
    senses = list(senses)
    A = A.copy()
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1.0
            b[i] *= -1.0
            flip[i] = -1.0
            if senses[i] == "<=":
                senses[i] = ">="
            elif senses[i] == ">=":
                senses[i] = "<="

    # Augment with slack/surplus and artificial columns.
    slack_cols = []
    art_cols = []
    blocks = [A]
    for i, s in enumerate(senses):
        if s == "<=":
            col = np.zeros((m, 1))
            col[i, 0] = 1.0
            blocks.append(col)
            slack_cols.append((i, n + len(slack_cols) + len(art_cols)))
        elif s == ">=":
            col = np.zeros((m, 1))
            col[i, 0] = -1.0
            blocks.append(col)
            slack_cols.append((i, n + len(slack_cols) + len(art_cols)))
        elif s != "=":
            raise ValueError(f"unknown sense {s!r}")
    n_slack = len(slack_cols)
    # Artificials: one for each >= or = row (a <= row's slack can start basic).
    needs_art = [i for i, s in enumerate(senses) if s in (">=", "=")]
    for k, i in enumerate(needs_art):
        col = np.zeros((m, 1))
        col[i, 0] = 1.0
        blocks.append(col)
        art_cols.append((i, n + n_slack + k))
    full = np.hstack(blocks)
    total = full.shape[1]

    basis = [0] * m
    slack_of_row = dict(slack_cols)
    art_of_row = dict(art_cols)
    for i, s in enumerate(senses):
        basis[i] = art_of_row[i] if i in art_of_row else slack_of_row[i]

    tab = _Tableau(full, b, basis)
    if art_cols:
        c1 = np.zeros(total)
        for _, j in art_cols:
            c1[j] = 1.0
        status = tab.run(c1, max_pivots)
        if status != "optimal":
            # Phase 1 is bounded below by 0, so "unbounded" here means
            # numerical trouble; report it as an iteration limit.
            return StdResult(status="iteration-limit", pivots=tab.pivots)
        phase1_obj = float(c1[tab.basis] @ tab.T[:, -1])
        if phase1_obj > FEAS_TOL:
            return StdResult(status="infeasible", pivots=tab.pivots)
        # Drive residual artificials out of the basis (or drop their rows if
        # the row is redundant).
        art_set = {j for _, j in art_cols}
        for i in range(m):
            if tab.basis[i] in art_set:
                pivoted = False
                for j in range(n + n_slack):
                    if abs(tab.T[i, j]) > PIVOT_TOL:
                        tab.pivot(i, j)
                        pivoted = True
                        break
                if not pivoted:
                    # Redundant row: zero it so the artificial stays harmless.
                    tab.T[i, :] = 0.0
        # Forbid artificial columns from re-entering phase 2.
        for j in art_set:
            tab.T[:, j] = 0.0

    c2 = np.zeros(total)
    c2[:n] = c
    status = tab.run(c2, max_pivots)
    if status == "iteration-limit":
        return StdResult(status="iteration-limit", pivots=tab.pivots)
    if status == "unbounded":
        return StdResult(status="unbounded", pivots=tab.pivots)

    x_full = np.zeros(total)
    for i, j in enumerate(tab.basis):
        x_full[j] = tab.T[i, -1]
    x_full = np.where(np.abs(x_full) < 1e-11, 0.0, x_full)
    x = x_full[:n]
    objective = float(c @ x)

    # Duals from the final basis of the pristine augmented system; a basic
    # artificial only survives on a redundant (zeroed) row, where its original
    # unit column keeps the basis matrix nonsingular and forces y_i = 0.
    B = full[:, tab.basis]
    cb = c2[tab.basis]
    try:
        y_tab = np.linalg.solve(B.T, cb)
    except np.linalg.LinAlgError:
        y_tab, *_ = np.linalg.lstsq(B.T, cb, rcond=None)
    rc = c - y_tab @ A  # A is the row-flipped matrix, matching y_tab
    y = y_tab * flip  # duals in the caller's original row orientation

    degenerate = any(
        abs(tab.T[i, -1]) <= FEAS_TOL for i in range(m) if tab.basis[i] < n + n_slack
    )
    return StdResult(
        status="optimal",
        x=x,
        objective=objective,
        y=y,
        reduced_costs=rc,
        pivots=tab.pivots,
        degenerate=degenerate,
        basis=list(tab.basis),
    )
