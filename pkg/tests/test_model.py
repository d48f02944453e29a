"""Model core: validation, instantiation, modification, lookup."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ALL_FIXTURES, load_fixture
from oracles import dense_expand

from optexplain.model import (
    AmbiguousLookupError,
    Constraint,
    Idx,
    IndexSet,
    InstantiationError,
    LinExpr,
    Modification,
    ModelIR,
    NotFoundError,
    Objective,
    Parameter,
    ParamInstance,
    Ref,
    Term,
    UnknownTargetError,
    Variable,
    apply_modification,
    instantiate,
    lookup_component,
    validate_model,
)
from optexplain.solver import solve_lp


# --------------------------------------------------------------------------
# Validation.

def test_validate_prod_ok(prod):
    report = validate_model(prod)
    assert report.ok
    assert report.sides["labor_cap"] == "constraint-rhs"
    assert report.sides["profit"] == "objective-cost"
    assert report.sides["labor_per_x"] == "constraint-lhs"
    assert prod.parameters["machine_cap"].side == "constraint-rhs"


def _tiny_model(**overrides) -> ModelIR:
    ir = ModelIR()
    ir.sets["PLANTS"] = IndexSet("PLANTS", ("plant1", "plant2"), "plants")
    ir.parameters["cap"] = Parameter(
        "cap", ("PLANTS",), {("plant1",): 5.0, ("plant2",): 7.0}, "capacity"
    )
    ir.variables["make"] = Variable("make", ("PLANTS",), desc="production")
    ir.constraints["limit"] = Constraint(
        "limit",
        (("p", "PLANTS"),),
        LinExpr((Term(var=Ref("make", (Idx("var", "p"),))),)),
        "<=",
        rhs_param=Ref("cap", (Idx("var", "p"),)),
        desc="limit per plant",
    )
    ir.objective = Objective(
        "max",
        LinExpr((Term(var=Ref("make", (Idx("label", "plant1"),))),)),
        "output",
    )
    for key, value in overrides.items():
        setattr(ir, key, value)
    return ir


def test_validate_unknown_index():
    ir = _tiny_model()
    ir.constraints["bad"] = Constraint(
        "bad",
        (),
        LinExpr((Term(var=Ref("make", (Idx("label", "plant9"),))),)),
        "<=",
        rhs_value=1.0,
        desc="references a missing plant",
    )
    report = validate_model(ir)
    assert not report.ok
    assert any("unknown index 'plant9'" in v.message for v in report.violations)


def test_validate_ambiguous_side():
    ir = _tiny_model()
    # cap used both as a coefficient and as an rhs.
    ir.constraints["dual_use"] = Constraint(
        "dual_use",
        (("p", "PLANTS"),),
        LinExpr(
            (
                Term(
                    coef_param=Ref("cap", (Idx("var", "p"),)),
                    var=Ref("make", (Idx("var", "p"),)),
                ),
            )
        ),
        "<=",
        rhs_param=Ref("cap", (Idx("var", "p"),)),
        desc="cap on both sides",
    )
    report = validate_model(ir)
    assert any("ambiguous side" in v.message for v in report.violations)


def test_validate_missing_description():
    ir = _tiny_model()
    ir.variables["make"] = Variable("make", ("PLANTS",), desc="")
    report = validate_model(ir)
    assert any(
        v.path == "make" and "description required" in v.message
        for v in report.violations
    )


def test_validate_ok_implies_instantiate(prod, knapsack, facility, transport):
    for ir in (prod, knapsack, facility, transport):
        assert validate_model(ir).ok
        instantiate(ir)  # must not raise


# --------------------------------------------------------------------------
# Instantiation.

def test_instantiate_prod_matches_hand_expansion(prod):
    inst = instantiate(prod)
    assert (inst.m, inst.n, inst.p) == (2, 2, 0)
    assert inst.dense().tolist() == [[1.0, 1.0], [1.0, 0.0]]
    assert inst.b == [4.0, 2.0]
    assert inst.c == [3.0, 2.0]
    assert inst.senses == ["<=", "<="]
    assert inst.objective_sense == "max"


def test_instantiate_knapsack_shape(knapsack):
    inst = instantiate(knapsack)
    assert (inst.m, inst.n, inst.p) == (1, 3, 3)


@pytest.mark.parametrize("name", ALL_FIXTURES)
def test_instantiate_matches_dense_oracle(name):
    ir = load_fixture(name)
    inst = instantiate(ir)
    rows, cols, A, b, senses, c, offset = dense_expand(ir)
    assert [(r.constraint, r.indices) for r in inst.rows] == rows
    assert [(col.variable, col.indices) for col in inst.cols] == cols
    assert np.allclose(inst.dense(), A)
    assert np.allclose(inst.b, b)
    assert inst.senses == senses
    assert np.allclose(inst.c, c)
    assert inst.offset == pytest.approx(offset)


def test_instantiate_deterministic(prod):
    a, b = instantiate(prod), instantiate(prod)
    assert a.rows == b.rows and a.cols == b.cols
    assert a.a == b.a and a.b == b.b and a.c == b.c


def test_empty_family_contributes_no_rows():
    ir = _tiny_model()
    ir.sets["EMPTY"] = IndexSet("EMPTY", (), "no members")
    ir.constraints["vacuous"] = Constraint(
        "vacuous",
        (("e", "EMPTY"),),
        LinExpr((Term(var=Ref("make", (Idx("label", "plant1"),))),)),
        "<=",
        rhs_value=100.0,
        desc="indexed over an empty set",
    )
    assert validate_model(ir).ok
    inst = instantiate(ir)
    assert inst.m == 2  # only the two `limit` rows
    assert all(r.constraint == "limit" for r in inst.rows)


def test_instantiate_requires_rows_and_columns():
    ir = _tiny_model()
    ir.constraints = {}
    with pytest.raises(InstantiationError, match="no constraint instances"):
        instantiate(ir)
    ir2 = _tiny_model()
    ir2.variables = {}
    with pytest.raises(InstantiationError, match="no variable instances"):
        instantiate(ir2)


def test_instantiate_nonfinite_parameter_named():
    ir = _tiny_model()
    ir.parameters["cap"].values[("plant1",)] = math.inf
    with pytest.raises(InstantiationError) as excinfo:
        instantiate(ir)
    assert "cap[plant1]" in str(excinfo.value)


def test_nonzero_provenance(prod):
    inst = instantiate(prod)
    assert set(inst.a_prov) == set(inst.a)
    # L's x coefficient comes from labor_per_x.
    key = (0, 0)
    assert ParamInstance("labor_per_x", ()) in inst.a_prov[key]


# --------------------------------------------------------------------------
# Modification.

def test_add_delta_rhs(prod):
    new = apply_modification(prod, [Modification("labor_cap", (), "add-delta", 1)])
    assert instantiate(new).b[0] == 5.0
    assert instantiate(prod).b[0] == 4.0  # input unchanged
    assert new.metadata.status == "unsolved"


def test_scale_equals_add(prod):
    scaled = apply_modification(prod, [Modification("labor_cap", (), "scale-by", 1.25)])
    added = apply_modification(prod, [Modification("labor_cap", (), "add-delta", 1)])
    a, b = instantiate(scaled), instantiate(added)
    assert a.b == b.b and a.a == b.a and a.c == b.c


def test_unknown_target_suggests(prod):
    with pytest.raises(UnknownTargetError) as excinfo:
        apply_modification(prod, [Modification("labour_cap", (), "set-to", 9)])
    assert "labor_cap" in excinfo.value.suggestions


def test_modification_round_trip(prod):
    d = 0.375
    there = apply_modification(prod, [Modification("labor_cap", (), "add-delta", d)])
    back = apply_modification(there, [Modification("labor_cap", (), "add-delta", -d)])
    orig, rt = instantiate(prod), instantiate(back)
    assert all(abs(x - y) <= 1e-12 for x, y in zip(orig.b, rt.b))
    assert orig.a == rt.a and orig.c == rt.c


@pytest.mark.parametrize("name", ALL_FIXTURES)
def test_modification_locality(name):
    """A modified rhs parameter changes exactly its own rows' b entries."""
    ir = load_fixture(name)
    base = instantiate(ir)
    for pname, param in ir.parameters.items():
        if param.side != "constraint-rhs":
            continue
        for key in param.values:
            target = ParamInstance(pname, key)
            new = apply_modification(ir, [Modification(pname, key, "add-delta", 0.5)])
            modified = instantiate(new)
            assert modified.a == base.a
            for i in range(base.m):
                expected = base.b[i] + (0.5 if base.b_prov[i] == target else 0.0)
                assert modified.b[i] == pytest.approx(expected)


def test_bound_modification(prod):
    new = apply_modification(
        prod, [Modification("x", (), "set-to", 1.5, bound="upper")]
    )
    inst = instantiate(new)
    assert inst.upper[0] == 1.5
    assert instantiate(prod).upper[0] == math.inf


# --------------------------------------------------------------------------
# Lookup.

def test_lookup_parameter_value(prod):
    view = lookup_component(prod, "labor_cap")
    assert view.kind == "parameter"
    assert view.entries == [((), 4.0)]
    assert view.desc


def test_lookup_partial_index(facility):
    view = lookup_component(facility, "pc", ("max",))
    assert [v for _, v in view.entries] == [10.0, 12.0, 9.0]
    assert [t for t, _ in view.entries] == [
        ("max", "f1"),
        ("max", "f2"),
        ("max", "f3"),
    ]


def test_lookup_ambiguous(facility):
    with pytest.raises(AmbiguousLookupError) as excinfo:
        lookup_component(facility, "cost")
    assert {"open_cost", "unit_cost"} <= set(excinfo.value.candidates)


def test_lookup_not_found_suggests(prod):
    with pytest.raises(NotFoundError) as excinfo:
        lookup_component(prod, "labor_cp")
    assert "labor_cap" in excinfo.value.suggestions


def test_lookup_description_keyword(prod):
    view = lookup_component(prod, "machine")
    assert view.name == "machine_cap"


def test_lookup_variable_with_solution(transport):
    inst = instantiate(transport)
    res = solve_lp(inst)
    view = lookup_component(transport, "ship", ("s1", "m1"), solution=res)
    assert view.entries == [(("s1", "m1"), pytest.approx(15.0))]


def test_lookup_objective(prod):
    inst = instantiate(prod)
    res = solve_lp(inst)
    view = lookup_component(prod, "objective", solution=res)
    assert view.kind == "objective"
    assert view.extra["value"] == pytest.approx(10.0)


# --------------------------------------------------------------------------
# Properties.

@settings(max_examples=30, deadline=None)
@given(delta=st.floats(-5, 5, allow_nan=False))
def test_round_trip_property(delta):
    ir = load_fixture("prod")
    there = apply_modification(ir, [Modification("machine_cap", (), "add-delta", delta)])
    back = apply_modification(there, [Modification("machine_cap", (), "add-delta", -delta)])
    orig, rt = instantiate(ir), instantiate(back)
    assert all(abs(x - y) <= 1e-12 for x, y in zip(orig.b, rt.b))
