"""Acceptance criteria, one test per criterion, each printing PASS/FAIL.

Tolerances are pinned here exactly as stated; runtime budgets are asserted
per criterion. Run with `pytest tests/test_acceptance.py -v -s` to see the
per-criterion lines.
"""

import random
import time

import numpy as np

from conftest import (
    ALL_FIXTURES,
    DATASET_DIR,
    INFEASIBLE_FIXTURES,
    LP_FIXTURES,
    MILP_FIXTURES,
    fixture_text,
    load_fixture,
)
from oracles import enumerate_iis_family, grid_min_delta, member_labels, milp_enumerate

from optexplain.agents import PipelineConfig
from optexplain.explain import (
    apply_counterfactual,
    compute_iis,
    evaluate_modification,
    iis_subsystem_status,
    restore_feasibility,
    sensitivity,
)
from optexplain.harness import CLASSES, report_digest, run_eval
from optexplain.model import Modification, apply_modification, instantiate
from optexplain.omif import parse_constraint_dsl, parse_model
from optexplain.solver import solve_lp, solve_milp


class Criterion:
    def __init__(self, name: str, budget_s: float):
        self.name = name
        self.budget_s = budget_s
        self.t0 = time.perf_counter()

    def finish(self):
        elapsed = time.perf_counter() - self.t0
        ok = elapsed < self.budget_s
        print(f"[{'PASS' if ok else 'FAIL'}] {self.name} ({elapsed:.2f}s / {self.budget_s:.0f}s budget)")
        assert ok, f"{self.name}: runtime {elapsed:.2f}s exceeds {self.budget_s}s"


def test_acceptance_solver_correctness():
    crit = Criterion("solver correctness: strong duality, complementary slackness, MILP oracle", 1.0)
    for name in LP_FIXTURES:
        inst = instantiate(load_fixture(name))
        res = solve_lp(inst)
        assert res.status == "optimal"
        x = np.array([res.primal[cid] for cid in inst.cols])
        y = np.array([res.duals[rid] for rid in inst.rows])
        assert abs(float(np.dot(inst.c, x)) + inst.offset - res.objective) <= 1e-9
        assert abs((res.objective - inst.offset) - float(np.dot(y, inst.b))) <= 1e-6
        slack = inst.dense() @ x - np.array(inst.b)
        assert np.all(np.abs(y * slack) <= 1e-6)
        # Primal feasibility at 1e-6.
        for i in range(inst.m):
            lhs = float(inst.dense()[i] @ x)
            if inst.senses[i] == "<=":
                assert lhs <= inst.b[i] + 1e-6
            elif inst.senses[i] == ">=":
                assert lhs >= inst.b[i] - 1e-6
            else:
                assert abs(lhs - inst.b[i]) <= 1e-6
    for name in MILP_FIXTURES:
        inst = instantiate(load_fixture(name))
        assert inst.p <= 20
        res = solve_milp(inst)
        status, best = milp_enumerate(inst)
        assert res.status == status == "optimal"
        assert abs(res.objective - best) <= 1e-6
        for j, cid in enumerate(inst.cols):
            if inst.integrality[j]:
                assert abs(res.primal[cid] - round(res.primal[cid])) <= 1e-6
    crit.finish()


def test_acceptance_iis_properties():
    crit = Criterion("IIS: infeasible set, single-deletion feasible, in enumerated family", 5.0)
    for name in INFEASIBLE_FIXTURES:
        ir = load_fixture(name)
        result = compute_iis(ir)
        assert iis_subsystem_status(ir, result.members) == "infeasible"
        for k in range(len(result.members)):
            subset = result.members[:k] + result.members[k + 1 :]
            assert iis_subsystem_status(ir, subset) == "feasible"
        inst = instantiate(ir)
        members = inst.m + sum(
            1 for j in range(inst.n)
            if np.isfinite(inst.lower[j]) or np.isfinite(inst.upper[j])
        )
        if members <= 12:
            family = [member_labels(inst, s) for s in enumerate_iis_family(inst)]
            assert frozenset(result.labels()) in family
    crit.finish()


def test_acceptance_elastic_restoration():
    crit = Criterion("restoration: certified feasible, grid-oracle penalty, lhs warned not solved", 2.0)
    infprod = load_fixture("infprod")
    plan = restore_feasibility(infprod, [("machine_cap", ())])
    oracle = grid_min_delta(
        lambda d: instantiate(
            apply_modification(infprod, [Modification("machine_cap", (), "add-delta", d)])
        )
    )
    assert abs(plan.total_penalty - oracle) <= 1e-3
    assert abs(plan.total_penalty - 1.0) <= 1e-3  # infprod delta = 1
    assert plan.certified

    inftransport = load_fixture("inftransport")
    plan2 = restore_feasibility(inftransport, [("supply", ("s1",))])
    oracle2 = grid_min_delta(
        lambda d: instantiate(
            apply_modification(
                inftransport, [Modification("supply", ("s1",), "add-delta", d)]
            )
        ),
        hi=15.0,
    )
    assert abs(plan2.total_penalty - oracle2) <= 1e-3
    assert plan2.certified

    # Left-hand-side requests are warned about and never enter the solve.
    plan3 = restore_feasibility(infprod, [("labor_per_x", ()), ("machine_cap", ())])
    assert plan3.rejected and plan3.rejected[0].reason == "lhs-parameter"
    assert "immutable" in plan3.rejected[0].warning
    assert all(a.param.name != "labor_per_x" for a in plan3.adjustments)
    crit.finish()


def test_acceptance_sensitivity():
    crit = Criterion("sensitivity: finite-difference match, MILP/lhs not-supported conversion", 1.0)
    h = 1e-4
    for name in LP_FIXTURES:
        ir = load_fixture(name)
        for pname, param in ir.parameters.items():
            if param.side != "constraint-rhs":
                continue
            for key in param.values:
                report = sensitivity(ir, pname, key)
                if report.not_supported or report.degenerate:
                    continue
                v0 = solve_lp(instantiate(ir)).objective
                bumped = apply_modification(ir, [Modification(pname, key, "add-delta", h)])
                v1 = solve_lp(instantiate(bumped)).objective
                assert abs((v1 - v0) / h - report.shadow_price) <= 1e-4
    prod = load_fixture("prod")
    assert abs(sensitivity(prod, "labor_cap").shadow_price - 2.0) <= 1e-4
    milp = sensitivity(load_fixture("knapsack"), "capacity")
    assert milp.not_supported == "milp-model"
    assert "evaluate a specific modification" in milp.suggestion
    lhs = sensitivity(prod, "labor_per_x")
    assert lhs.not_supported == "lhs-parameter"
    assert "evaluate a specific modification" in lhs.suggestion
    crit.finish()


def test_acceptance_whatif_whynot():
    crit = Criterion("what-if deltas vs re-solve; counterfactuals never improve; IIS on infeasible", 2.0)
    prod = load_fixture("prod")
    report = evaluate_modification(prod, [Modification("labor_cap", (), "set-to", 5)])
    resolved = solve_lp(
        instantiate(apply_modification(prod, [Modification("labor_cap", (), "set-to", 5)]))
    )
    assert abs(report.new_objective - resolved.objective) <= 1e-9
    assert abs(report.delta - 2.0) <= 1e-9  # prod labor 4 -> 5 implies +2

    cases = [
        ("prod", "y <= 0"),
        ("prod", "x + y >= 10"),
        ("facility", "open['f1'] <= 0"),
        ("facility", "sum over f in FACILITIES: open[f] <= 0"),
        ("knapsack", "take['i2'] + take['i3'] >= 2"),
        ("transport", "ship['s1','m1'] + ship['s1','m2'] <= 0"),
    ]
    for name, text in cases:
        ir = load_fixture(name)
        spec = parse_constraint_dsl(text, ir).spec
        why = apply_counterfactual(ir, [spec])
        if why.counterfactual_objective is not None:
            if ir.objective.sense == "max":
                assert why.counterfactual_objective <= why.baseline_objective + 1e-9
            else:
                assert why.counterfactual_objective >= why.baseline_objective - 1e-9
        else:
            assert why.counterfactual_status == "infeasible"
            assert why.iis is not None and why.iis.members
    crit.finish()


def test_acceptance_pipeline_determinism_gate():
    crit = Criterion("gold replay: 100% per class, byte-identical reports, numeric gate", 30.0)
    first = run_eval(str(DATASET_DIR), lm_mode="stub")
    second = run_eval(str(DATASET_DIR), lm_mode="stub")
    for cls in CLASSES:
        assert first["classes"][cls]["accuracy"] == 100.0, cls
    assert report_digest(first) == report_digest(second)
    assert first["numeric_gate_ok"]
    assert all(v["numeric_gate_ok"] for v in first["items"])
    crit.finish()


def test_acceptance_parser_robustness():
    crit = Criterion("parser: 10,000-case fuzz with zero crashes; round-trip fixed point", 30.0)
    rng = random.Random(20250809)
    printable = "{}[]()<>=:,*+-#'\"\\ \n\tabcdefgXYZ_0123456789.eE"
    ir = load_fixture("prod")
    for k in range(10_000):
        n = rng.randint(0, 80)
        if k % 3 == 0:
            text = "".join(chr(rng.randint(0, 255)) for _ in range(n))
        else:
            text = "".join(rng.choice(printable) for _ in range(n))
        if k % 2 == 0:
            result = parse_model(text)
            assert result.model is not None or result.diagnostics
        else:
            result = parse_constraint_dsl(text, ir)
            assert result.spec is not None or result.diagnostics

    from optexplain.omif import serialize_model

    for name in ALL_FIXTURES:
        first = parse_model(fixture_text(name))
        text1 = serialize_model(first.model)
        second = parse_model(text1)
        assert second.ok and second.model == first.model
        assert serialize_model(second.model) == text1
    crit.finish()


def test_acceptance_ablation_flags():
    crit = Criterion("ablations: three complete reports; --no-predefined fails gated classes", 60.0)
    for config in (PipelineConfig(reminder=False), PipelineConfig(illustrator=False)):
        report = run_eval(str(DATASET_DIR), lm_mode="stub", config=config)
        for cls in CLASSES:
            assert report["classes"][cls]["total"] == 5
            assert report["classes"][cls]["accuracy"] is not None
    nopre = run_eval(str(DATASET_DIR), lm_mode="stub", config=PipelineConfig(predefined=False))
    for cls in CLASSES:
        assert nopre["classes"][cls]["total"] == 5
    # Expected failures: the gold paths for these classes need the predefined
    # functions, mirroring the 0.0% ablation rows.
    assert nopre["classes"]["diagnosing"]["accuracy"] == 0.0
    assert nopre["classes"]["sensitivity"]["accuracy"] == 0.0
    assert nopre["classes"]["why-not"]["accuracy"] == 100.0
    crit.finish()
