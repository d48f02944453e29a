#!/usr/bin/env python3
"""Build the bundled gold dataset: queries/*.gold and stubs/*.stub.

Every gold fact is computed here by a direct explain-tools call (the oracle
run the dataset records), and every stub answer is rendered from that result
payload only, so the explainer numeric gate holds by construction. Run from
the repository root:

    python3 scripts/build_gold_dataset.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from optexplain.agents import (  # noqa: E402
    collect_numbers,
    format_num,
    numeric_gate_violations,
    to_payload,
)
from optexplain.explain import (  # noqa: E402
    apply_counterfactual,
    evaluate_modification,
    restore_feasibility,
    sensitivity,
)
from optexplain.model import Modification, instantiate, lookup_component, validate_model  # noqa: E402
from optexplain.omif import parse_constraint_dsl, parse_model  # noqa: E402
from optexplain.solver import solve_instance  # noqa: E402

DATASET = ROOT / "dataset"


def load_model(name: str):
    text = (DATASET / "models" / f"{name}.omif").read_text(encoding="utf-8")
    parsed = parse_model(text)
    assert parsed.ok, [d.render() for d in parsed.diagnostics]
    report = validate_model(parsed.model)
    assert report.ok, report.violations
    return parsed.model


def fmt(v) -> str:
    return format_num(float(v))


# --------------------------------------------------------------------------
# Item construction helpers. Each returns (gold_record, stub_entries, result).

def coordinator_entry(task: str) -> dict:
    return {
        "match": "ROLE: coordinator",
        "respond": json.dumps({"agent_name": "Engineer", "task": task}),
    }


def make_predefined(item_id, model, query, gold_class, call, fact, fact_kind, answer):
    record = {
        "item_id": item_id,
        "model": model,
        "query": query,
        "gold_class": gold_class,
        "gold_call": call,
        "gold_fact": fact,
        "gold_fact_kind": fact_kind,
        "stub": f"{item_id}.stub",
    }
    stub = [
        coordinator_entry(query),
        {"match": "ROLE: operator", "respond_call": call},
        {"match": "ROLE: explainer", "respond": answer},
    ]
    return record, stub


def make_whynot(item_id, model, query, specs, fact, fact_kind, answer, task):
    record = {
        "item_id": item_id,
        "model": model,
        "query": query,
        "gold_class": "why-not",
        "gold_specs": specs,
        "gold_fact": fact,
        "gold_fact_kind": fact_kind,
        "stub": f"{item_id}.stub",
    }
    stub = [
        coordinator_entry(query),
        {
            "match": "ROLE: operator",
            "respond_call": {"name": "external_tools", "arguments": {"task": task}},
        },
        {"match": "ROLE: programmer", "respond": "\n".join(specs)},
        {
            "match": "ROLE: evaluator",
            "respond": json.dumps(
                {"decision": "accept", "comment": "constraints realize the counterfactual"}
            ),
        },
        {"match": "ROLE: explainer", "respond": answer},
    ]
    return record, stub


def main() -> None:
    (DATASET / "queries").mkdir(parents=True, exist_ok=True)
    (DATASET / "stubs").mkdir(parents=True, exist_ok=True)
    models = {
        name: load_model(name)
        for name in ("prod", "infprod", "knapsack", "facility", "transport", "inftransport")
    }
    records: dict[str, list[dict]] = {c: [] for c in
                                      ("diagnosing", "retrieval", "sensitivity",
                                       "what-if", "why-not")}
    stubs: dict[str, list[dict]] = {}
    payload_of: dict[str, object] = {}

    def add(gold_class, record, stub, result):
        records[gold_class].append(record)
        stubs[record["item_id"]] = stub
        payload_of[record["item_id"]] = to_payload(result)
        answer = stub[-1]["respond"]
        bad = numeric_gate_violations(
            answer, collect_numbers(to_payload(result)) | collect_numbers(record["query"])
        )
        assert not bad, f"{record['item_id']}: answer cites {bad} outside the payload"

    # ---- diagnosing ---------------------------------------------------------
    def diag(item_id, model, query, adjustables, task):
        ir = models[model]
        refs = [
            (a["parameter"], tuple(a["indices"]) if a.get("indices") else None)
            for a in adjustables
        ]
        plan = restore_feasibility(ir, refs or None)
        steps = "; ".join(
            f"{a.direction} {a.param.label()} by {fmt(a.magnitude)}"
            for a in plan.adjustments
            if a.magnitude > 1e-12
        )
        answer = (
            f"The model can be made feasible: {steps}. "
            f"The minimal total adjustment is {fmt(plan.total_penalty)}."
        )
        call = {
            "name": "feasibility_restoration",
            "arguments": {"adjustables": adjustables},
        }
        record, stub = make_predefined(
            item_id, model, query, "diagnosing", call,
            plan.total_penalty, "penalty", answer,
        )
        add("diagnosing", record, stub, plan)

    diag(
        "diag-infprod-machine",
        "infprod",
        "How much should we adjust the machine capacity to make the model feasible?",
        [{"parameter": "machine_cap"}],
        "find the minimal machine capacity adjustment restoring feasibility",
    )
    diag(
        "diag-infprod-demand",
        "infprod",
        "By how much must the contracted minimum demand change to restore feasibility?",
        [{"parameter": "demand_min"}],
        "find the minimal demand adjustment restoring feasibility",
    )
    diag(
        "diag-infprod-both",
        "infprod",
        "How much should we adjust machine capacity or minimum demand together to become feasible?",
        [{"parameter": "machine_cap"}, {"parameter": "demand_min"}],
        "find minimal joint adjustments restoring feasibility",
    )
    diag(
        "diag-inftransport-s1",
        "inftransport",
        "How much extra supply at warehouse s1 would make this feasible?",
        [{"parameter": "supply", "indices": ["s1"]}],
        "find the minimal supply increase at s1 restoring feasibility",
    )
    diag(
        "diag-inftransport-default",
        "inftransport",
        "What adjustments would restore feasibility here?",
        [],
        "find minimal adjustments restoring feasibility",
    )

    # ---- retrieval ----------------------------------------------------------
    def retrieval(item_id, model, query, component, indices, fact, answer):
        ir = models[model]
        solution = solve_instance(instantiate(ir))
        view = lookup_component(ir, component, tuple(indices) or None, solution=solution)
        call = {
            "name": "components_retrival",
            "arguments": {"component": component, "indices": indices},
        }
        record, stub = make_predefined(
            item_id, model, query, "retrieval", call, fact, "value", answer
        )
        add("retrieval", record, stub, view)

    retrieval(
        "retr-prod-labor",
        "prod",
        "What is the labor capacity?",
        "labor_cap",
        [],
        4,
        "The total labor hours available per day (labor_cap) is 4.",
    )
    retrieval(
        "retr-knapsack-weights",
        "knapsack",
        "What are the weights of the items?",
        "weight",
        [],
        3,
        "The item weights in kilograms are: i1 weighs 2, i2 weighs 3, and i3 weighs 1.",
    )
    retrieval(
        "retr-facility-pc-max",
        "facility",
        "What are the production capacities at level max for all facilities?",
        "pc",
        ["max"],
        12,
        "At the max level, production capacity is 10 at f1, 12 at f2, and 9 at f3.",
    )
    retrieval(
        "retr-transport-ship",
        "transport",
        "How many units ship from s1 to m1 in the optimal plan?",
        "ship",
        ["s1", "m1"],
        15,
        "In the optimal plan, 15 units ship from s1 to m1.",
    )
    retrieval(
        "retr-infprod-demand",
        "infprod",
        "What is the contracted minimum delivery of product x?",
        "demand_min",
        [],
        3,
        "The contracted minimum delivery of product x (demand_min) is 3 units.",
    )

    # ---- sensitivity --------------------------------------------------------
    def sens(item_id, model, query, parameter, indices, answer=None):
        ir = models[model]
        report = sensitivity(ir, parameter, tuple(indices))
        if report.not_supported:
            fact, kind = "evaluate a specific modification", "suggestion"
            answer = (
                "Duality-based sensitivity analysis is not supported for this "
                f"request ({report.not_supported}). You can evaluate a specific "
                "modification instead: state the size of the change you have in mind."
            )
        else:
            fact, kind = report.shadow_price, "shadow"
            if answer is None:
                answer = (
                    f"The shadow price of {report.param} is {fmt(report.shadow_price)}: "
                    f"per unit increase the optimal objective changes by "
                    f"{fmt(report.shadow_price)}."
                )
        call = {
            "name": "sensitivity_analysis",
            "arguments": {"parameter": parameter, "indices": indices},
        }
        record, stub = make_predefined(
            item_id, model, query, "sensitivity", call, fact, kind, answer
        )
        add("sensitivity", record, stub, report)

    sens(
        "sens-prod-labor",
        "prod",
        "Will the profit change much if labor availability moves?",
        "labor_cap",
        [],
    )
    sens(
        "sens-prod-machine",
        "prod",
        "How sensitive is profit to the machine capacity?",
        "machine_cap",
        [],
    )
    sens(
        "sens-transport-m2",
        "transport",
        "How would the total cost react to changes in the demand at market m2?",
        "demand_req",
        ["m2"],
    )
    sens(
        "sens-knapsack-capacity",
        "knapsack",
        "How stable is the best value if the knapsack capacity varies?",
        "capacity",
        [],
    )
    sens(
        "sens-prod-laborperx",
        "prod",
        "How much would profit shift if the labor per unit of x changes?",
        "labor_per_x",
        [],
    )

    # ---- what-if ------------------------------------------------------------
    def whatif(item_id, model, query, mods, phrasing):
        ir = models[model]
        mobjs = [
            Modification(
                target=m["target"],
                indices=tuple(m.get("indices") or ()),
                kind=m["kind"],
                magnitude=float(m["magnitude"]),
            )
            for m in mods
        ]
        report = evaluate_modification(ir, mobjs)
        answer = (
            f"{phrasing} changes the objective from {fmt(report.baseline_objective)} "
            f"to {fmt(report.new_objective)} (change {fmt(report.delta)})."
        )
        call = {"name": "evaluate_modification", "arguments": {"modifications": mods}}
        record, stub = make_predefined(
            item_id, model, query, "what-if", call,
            report.new_objective, "objective", answer,
        )
        add("what-if", record, stub, report)

    whatif(
        "whatif-prod-labor5",
        "prod",
        "What if the labor capacity goes to 5?",
        [{"target": "labor_cap", "indices": [], "kind": "set-to", "magnitude": 5}],
        "Raising the labor capacity to 5",
    )
    whatif(
        "whatif-prod-machine0",
        "prod",
        "What if the machine capacity goes to 0?",
        [{"target": "machine_cap", "indices": [], "kind": "set-to", "magnitude": 0}],
        "Cutting the machine capacity to 0",
    )
    whatif(
        "whatif-knapsack-cap6",
        "knapsack",
        "What if the knapsack capacity is increased by 1 kilogram?",
        [{"target": "capacity", "indices": [], "kind": "add-delta", "magnitude": 1}],
        "Adding 1 kilogram of capacity",
    )
    whatif(
        "whatif-transport-m2-25",
        "transport",
        "What if the demand at market m2 rises to 25?",
        [{"target": "demand_req", "indices": ["m2"], "kind": "set-to", "magnitude": 25}],
        "Raising demand at m2 to 25",
    )
    whatif(
        "whatif-facility-demand20",
        "facility",
        "What if total demand grows to 20 units?",
        [{"target": "demand", "indices": [], "kind": "set-to", "magnitude": 20}],
        "Growing total demand to 20",
    )

    # ---- why-not -------------------------------------------------------------
    def whynot(item_id, model, query, specs, task):
        ir = models[model]
        parsed = [parse_constraint_dsl(s, ir) for s in specs]
        assert all(p.ok for p in parsed), [p.diagnostics for p in parsed]
        report = apply_counterfactual(ir, [p.spec for p in parsed])
        if report.counterfactual_status == "infeasible":
            fact, kind = "infeasible", "status"
            answer = (
                f"Forcing {'; '.join(specs)} makes the model infeasible; no "
                "feasible solution exists because the requirements "
                + ", ".join(report.iis.labels())
                + " conflict. That is why the current plan does not do this."
            )
        else:
            fact, kind = report.counterfactual_objective, "objective"
            answer = (
                f"Forcing {'; '.join(specs)} is possible but moves the objective from "
                f"{fmt(report.baseline_objective)} to "
                f"{fmt(report.counterfactual_objective)} (change {fmt(report.delta)})."
            )
        record, stub = make_whynot(item_id, model, query, specs, fact, kind, answer, task)
        add("why-not", record, stub, report)

    whynot(
        "whynot-prod-y0",
        "prod",
        "Why not shut down product y entirely?",
        ["y <= 0"],
        "force y to zero and compare objectives",
    )
    whynot(
        "whynot-prod-total10",
        "prod",
        "Why not produce 10 units in total?",
        ["x + y >= 10"],
        "force total production of at least 10",
    )
    whynot(
        "whynot-facility-skipf1",
        "facility",
        "Why not skip facility f1?",
        ["open['f1'] <= 0"],
        "forbid opening facility f1",
    )
    whynot(
        "whynot-facility-none",
        "facility",
        "Why not operate with no facilities at all?",
        ["sum over f in FACILITIES: open[f] <= 0"],
        "forbid opening any facility",
    )
    whynot(
        "whynot-knapsack-i2i3",
        "knapsack",
        "Why aren't we taking both item i2 and item i3?",
        ["take['i2'] + take['i3'] >= 2"],
        "force both i2 and i3 into the knapsack",
    )

    # ---- write out ------------------------------------------------------------
    for gold_class, recs in records.items():
        path = DATASET / "queries" / f"{gold_class.replace('-', '_')}.gold"
        with open(path, "w", encoding="utf-8") as fh:
            for rec in recs:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        print(f"wrote {path} ({len(recs)} items)")
    for item_id, entries in stubs.items():
        path = DATASET / "stubs" / f"{item_id}.stub"
        with open(path, "w", encoding="utf-8") as fh:
            for entry in entries:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
    print(f"wrote {len(stubs)} stub transcripts")

    # ---- end-to-end session stub (service + frontend tests) -------------------
    prod = models["prod"]
    e2e = []
    e2e.append(
        {
            "match": "ROLE: illustrator",
            "respond": (
                "This production planning model chooses how many units of "
                "products x and y to make each day. Labor availability and "
                "machine capacity limit production; the goal is to maximize "
                "total daily profit."
            ),
        }
    )
    turn_items = ["retr-prod-labor", "whatif-prod-labor5", "whynot-prod-y0"]
    for item_id in turn_items:
        e2e.extend(stubs[item_id])
    path = DATASET / "stubs" / "e2e_session.stub"
    with open(path, "w", encoding="utf-8") as fh:
        for entry in e2e:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
