"""Explanation tools: IIS, restoration, sensitivity, what-if, why-not."""

import copy

import pytest

from conftest import INFEASIBLE_FIXTURES, LP_FIXTURES, load_fixture
from oracles import enumerate_iis_family, grid_min_delta, member_labels

from optexplain.explain import (
    ExplainError,
    apply_counterfactual,
    attach_counterfactuals,
    compute_iis,
    evaluate_modification,
    iis_subsystem_status,
    restore_feasibility,
    sensitivity,
)
from optexplain.model import Modification, apply_modification, instantiate, validate_model
from optexplain.omif import parse_constraint_dsl, parse_model


def _parse(text: str):
    result = parse_model(text)
    assert result.ok, [d.render() for d in result.diagnostics]
    assert validate_model(result.model).ok
    return result.model


def _dsl(text: str, ir):
    result = parse_constraint_dsl(text, ir)
    assert result.ok, [d.render() for d in result.diagnostics]
    return result.spec


# --------------------------------------------------------------------------
# IIS.

def test_iis_infprod_is_m_and_d(infprod):
    result = compute_iis(infprod)
    assert result.labels() == ["M", "D"]
    assert not result.indeterminate
    assert result.oracle_calls > 0


def test_iis_on_feasible_model_errors(prod):
    with pytest.raises(ExplainError, match="model is feasible"):
        compute_iis(prod)


def test_iis_infprod_in_enumerated_family(infprod):
    inst = instantiate(infprod)
    family = [member_labels(inst, s) for s in enumerate_iis_family(inst)]
    result = compute_iis(infprod)
    assert frozenset(result.labels()) in family


def test_iis_inftransport_in_enumerated_family(inftransport):
    inst = instantiate(inftransport)
    family = [member_labels(inst, s) for s in enumerate_iis_family(inst)]
    result = compute_iis(inftransport)
    got = frozenset(result.labels())
    assert got in family
    assert got == frozenset(["avail[s1]", "avail[s2]", "met[m1]", "met[m2]"])


@pytest.mark.parametrize("name", INFEASIBLE_FIXTURES)
def test_iis_double_property(name):
    """The IIS is infeasible; dropping any single member makes it feasible."""
    ir = load_fixture(name)
    result = compute_iis(ir)
    assert iis_subsystem_status(ir, result.members) == "infeasible"
    for k in range(len(result.members)):
        subset = result.members[:k] + result.members[k + 1 :]
        assert iis_subsystem_status(ir, subset) == "feasible"


def test_iis_with_two_disjoint_conflicts():
    ir = _parse(
        """
        params {
          cap_a: 1 desc "cap on a" floor_a: 2 desc "floor on a"
          cap_b: 3 desc "cap on b" floor_b: 5 desc "floor on b"
        }
        vars { a: continuous desc "first" b: continuous desc "second" }
        constraints {
          ca: a <= cap_a desc "a at most 1"
          fa: a >= floor_a desc "a at least 2"
          cb: b <= cap_b desc "b at most 3"
          fb: b >= floor_b desc "b at least 5"
        }
        objective { minimize: a + b desc "total" }
        """
    )
    inst = instantiate(ir)
    family = [member_labels(inst, s) for s in enumerate_iis_family(inst)]
    assert len(family) == 2  # two independent conflicts
    result = compute_iis(ir)
    assert frozenset(result.labels()) in family


# --------------------------------------------------------------------------
# Restoration.

def test_restore_machine_cap_matches_grid_oracle(infprod):
    plan = restore_feasibility(infprod, [("machine_cap", ())])
    # Grid oracle: smallest delta raising machine_cap that admits a feasible
    # point, scanned at 1e-3 resolution with an independent feasibility check.
    oracle = grid_min_delta(
        lambda d: instantiate(
            apply_modification(
                infprod, [Modification("machine_cap", (), "add-delta", d)]
            )
        )
    )
    assert oracle == pytest.approx(1.0, abs=1e-9)
    assert plan.total_penalty == pytest.approx(oracle, abs=1e-3)
    (adj,) = [a for a in plan.adjustments if a.magnitude > 1e-9]
    assert adj.param.label() == "machine_cap"
    assert adj.direction == "raise"
    assert plan.certified


def test_restore_labor_cap_insufficient(infprod):
    with pytest.raises(ExplainError) as excinfo:
        restore_feasibility(infprod, [("labor_cap", ())])
    message = str(excinfo.value)
    assert "insufficient adjustables" in message
    assert "M" in message and "D" in message


def test_restore_rejects_lhs_with_warning(infprod):
    plan = restore_feasibility(infprod, [("labor_per_x", ()), ("machine_cap", ())])
    assert len(plan.rejected) == 1
    assert plan.rejected[0].label == "labor_per_x"
    assert plan.rejected[0].reason == "lhs-parameter"
    assert "immutable" in plan.rejected[0].warning
    assert plan.total_penalty == pytest.approx(1.0, abs=1e-3)


def test_restore_all_lhs_errors(infprod):
    with pytest.raises(ExplainError, match="no adjustable right-hand-side"):
        restore_feasibility(infprod, [("labor_per_x", ())])


def test_restore_default_uses_iis_parameters(infprod):
    plan = restore_feasibility(infprod)
    assert plan.defaulted
    named = {a.param.name for a in plan.adjustments}
    assert named == {"machine_cap", "demand_min"}
    assert plan.total_penalty == pytest.approx(1.0, abs=1e-3)
    assert plan.certified


def test_restore_weights_steer_choice(infprod):
    plan = restore_feasibility(
        infprod,
        [("machine_cap", ()), ("demand_min", ())],
        weights={"machine_cap": 5.0},
    )
    # Lowering demand_min (weight 1) is now cheaper than raising machine_cap.
    active = [a for a in plan.adjustments if a.magnitude > 1e-9]
    assert [a.param.name for a in active] == ["demand_min"]
    assert active[0].direction == "lower"
    assert plan.total_penalty == pytest.approx(1.0, abs=1e-3)


def test_restore_supply_matches_grid_oracle(inftransport):
    plan = restore_feasibility(inftransport, [("supply", ("s1",))])
    oracle = grid_min_delta(
        lambda d: instantiate(
            apply_modification(
                inftransport, [Modification("supply", ("s1",), "add-delta", d)]
            )
        ),
        hi=15.0,
    )
    assert oracle == pytest.approx(10.0, abs=1e-9)
    assert plan.total_penalty == pytest.approx(oracle, abs=1e-3)
    assert plan.certified


def test_restore_on_feasible_model_errors(prod):
    with pytest.raises(ExplainError, match="feasible"):
        restore_feasibility(prod, [("labor_cap", ())])


def test_restore_equality_rows_get_pairs():
    ir = _parse(
        """
        params { target: 5 desc "required balance" cap: 1 desc "cap on x" }
        vars { x: continuous desc "amount" }
        constraints {
          bal: x = target desc "exact balance"
          c: x <= cap desc "cap"
        }
        objective { minimize: x desc "amount" }
        """
    )
    plan = restore_feasibility(ir, [("target", ())])
    (adj,) = [a for a in plan.adjustments if a.magnitude > 1e-9]
    assert adj.direction == "lower"  # equality rhs moved down toward the cap
    assert adj.delta == pytest.approx(-4.0, abs=1e-6)
    assert plan.total_penalty == pytest.approx(4.0, abs=1e-6)
    assert plan.certified


# --------------------------------------------------------------------------
# Sensitivity.

def test_shadow_price_labor(prod):
    report = sensitivity(prod, "labor_cap")
    assert report.not_supported is None
    assert report.shadow_price == pytest.approx(2.0, abs=1e-9)
    assert not report.degenerate
    assert "local" in report.validity_note


def test_shadow_price_machine(prod):
    assert sensitivity(prod, "machine_cap").shadow_price == pytest.approx(1.0)


def test_shadow_price_transport_demand(transport):
    report = sensitivity(transport, "demand_req", ("m2",))
    assert report.shadow_price == pytest.approx(3.0, abs=1e-9)


@pytest.mark.parametrize("name", LP_FIXTURES)
def test_sensitivity_matches_finite_difference(name):
    """|(v(b+h) - v(b))/h - shadow| <= 1e-4 at h = 1e-4, per rhs parameter."""
    ir = load_fixture(name)
    h = 1e-4
    for pname, param in ir.parameters.items():
        if param.side != "constraint-rhs":
            continue
        for key in param.values:
            report = sensitivity(ir, pname, key)
            if report.not_supported or report.degenerate:
                continue
            bumped = apply_modification(ir, [Modification(pname, key, "add-delta", h)])
            from optexplain.solver import solve_lp

            v0 = solve_lp(instantiate(ir)).objective
            v1 = solve_lp(instantiate(bumped)).objective
            slope = (v1 - v0) / h
            assert abs(slope - report.shadow_price) <= 1e-4, (pname, key)


def test_sensitivity_milp_not_supported(knapsack):
    report = sensitivity(knapsack, "capacity")
    assert report.not_supported == "milp-model"
    assert "evaluate a specific modification" in report.suggestion


def test_sensitivity_lhs_not_supported(prod):
    report = sensitivity(prod, "labor_per_x")
    assert report.not_supported == "lhs-parameter"
    assert "evaluate a specific modification" in report.suggestion


def test_sensitivity_objective_cost_not_supported(prod):
    report = sensitivity(prod, "profit")
    assert report.not_supported == "lhs-parameter"


def test_sensitivity_aggregate_parameter_errors():
    ir = _parse(
        """
        params { cap: 4 desc "shared cap" }
        vars { x: continuous desc "first" y: continuous desc "second" }
        constraints {
          cx: x <= cap desc "cap on x"
          cy: y <= cap desc "cap on y"
        }
        objective { maximize: x + y desc "total" }
        """
    )
    with pytest.raises(ExplainError, match="aggregate parameter"):
        sensitivity(ir, "cap")


def test_sensitivity_degenerate_flagged():
    ir = _parse(
        """
        params {
          both: 4 desc "joint cap" cx: 2 desc "cap on x" cy: 2 desc "cap on y"
        }
        vars { x: continuous desc "first" y: continuous desc "second" }
        constraints {
          j: x + y <= both desc "joint cap row"
          a: x <= cx desc "x cap row"
          b: y <= cy desc "y cap row"
        }
        objective { maximize: x + y desc "total" }
        """
    )
    report = sensitivity(ir, "both")
    assert report.degenerate
    assert "degenerate" in report.validity_note


# --------------------------------------------------------------------------
# What-if.

def test_whatif_labor_to_five(prod):
    report = evaluate_modification(prod, [Modification("labor_cap", (), "set-to", 5)])
    assert report.baseline_objective == pytest.approx(10.0)
    assert report.new_objective == pytest.approx(12.0)
    assert report.delta == pytest.approx(2.0)
    # Locally consistent with the shadow price of 2 per unit of labor.
    assert report.delta == pytest.approx(sensitivity(prod, "labor_cap").shadow_price * 1)


def test_whatif_machine_to_zero(prod):
    report = evaluate_modification(prod, [Modification("machine_cap", (), "set-to", 0)])
    # Vertices of the modified polytope: (0,0) and (0,4); best is 8.
    assert report.new_objective == pytest.approx(8.0)
    changed = {c.name: c.change for c in report.changed_variables}
    assert changed["x"] == pytest.approx(-2.0)
    assert changed["y"] == pytest.approx(2.0)


def test_whatif_noop(prod):
    report = evaluate_modification(prod, [Modification("labor_cap", (), "set-to", 4)])
    assert report.delta == pytest.approx(0.0)
    assert report.baseline_status == report.new_status == "optimal"
    assert report.changed_variables == []


def test_whatif_infeasible_outcome_reported(prod):
    report = evaluate_modification(
        prod, [Modification("machine_cap", (), "set-to", -1)]
    )
    assert report.new_status == "infeasible"
    assert report.new_objective is None
    assert report.delta is None


def test_whatif_scale_equality_flagged():
    ir = _parse(
        """
        params { target: 5 desc "required balance" }
        vars { x: continuous desc "amount" }
        constraints { bal: x = target desc "exact balance" }
        objective { minimize: x desc "amount" }
        """
    )
    report = evaluate_modification(ir, [Modification("target", (), "scale-by", 2)])
    assert any("equality" in note for note in report.notes)


def test_whatif_purity(prod):
    snapshot = copy.deepcopy(prod)
    evaluate_modification(prod, [Modification("labor_cap", (), "set-to", 5)])
    assert prod == snapshot


# --------------------------------------------------------------------------
# Why-not.

def test_whynot_shut_down_y(prod):
    report = apply_counterfactual(prod, [_dsl("y <= 0", prod)])
    assert report.counterfactual_status == "optimal"
    assert report.counterfactual_objective == pytest.approx(6.0)
    assert report.delta == pytest.approx(-4.0)
    assert report.iis is None


def test_whynot_infeasible_includes_iis(prod):
    report = apply_counterfactual(prod, [_dsl("x + y >= 10", prod)])
    assert report.counterfactual_status == "infeasible"
    labels = report.iis.labels()
    assert "L" in labels
    assert any(lbl.startswith("counterfactual") for lbl in labels)
    # Cross-check membership against full subset enumeration.
    aug = attach_counterfactuals(prod, [_dsl("x + y >= 10", prod)])
    inst = instantiate(aug)
    family = [member_labels(inst, s) for s in enumerate_iis_family(inst)]
    assert frozenset(labels) in family


def test_whynot_vacuous(prod):
    report = apply_counterfactual(prod, [_dsl("x >= 0", prod)])
    assert report.counterfactual_objective == pytest.approx(10.0)
    assert report.delta == pytest.approx(0.0)


def test_attach_adds_one_row_per_spec(facility):
    specs = [
        _dsl("sum over f in FACILITIES: open[f] <= 2", facility),
        _dsl("amt['max','f1'] <= 3", facility),
    ]
    base = instantiate(facility)
    aug = instantiate(attach_counterfactuals(facility, specs))
    # A sum aggregates inside one constraint: exactly one row per spec.
    assert aug.m == base.m + len(specs)


def test_whynot_aggregated_spec(facility):
    report = apply_counterfactual(
        facility, [_dsl("sum over f in FACILITIES: open[f] <= 0", facility)]
    )
    assert report.counterfactual_status == "infeasible"
    assert report.iis is not None


WHYNOT_CASES = [
    ("prod", "y <= 0"),
    ("prod", "x + y >= 10"),
    ("facility", "open['f1'] <= 0"),
    ("facility", "sum over f in FACILITIES: open[f] <= 0"),
    ("knapsack", "take['i2'] + take['i3'] >= 2"),
    ("transport", "ship['s1','m1'] + ship['s1','m2'] <= 0"),
]


@pytest.mark.parametrize("name,spec", WHYNOT_CASES)
def test_counterfactual_monotonicity(name, spec):
    """Adding constraints never improves the declared objective."""
    ir = load_fixture(name)
    report = apply_counterfactual(ir, [_dsl(spec, ir)])
    if report.counterfactual_objective is None:
        assert report.counterfactual_status == "infeasible"
        return
    if ir.objective.sense == "max":
        assert report.counterfactual_objective <= report.baseline_objective + 1e-9
    else:
        assert report.counterfactual_objective >= report.baseline_objective - 1e-9


@pytest.mark.parametrize("name,spec", WHYNOT_CASES)
def test_explain_ops_purity(name, spec):
    ir = load_fixture(name)
    snapshot = copy.deepcopy(ir)
    apply_counterfactual(ir, [_dsl(spec, ir)])
    assert ir == snapshot
    if name in INFEASIBLE_FIXTURES:
        compute_iis(ir)
        assert ir == snapshot
