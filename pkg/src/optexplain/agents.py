"""Multi-agent chat pipeline: illustrate, route, guide, operate, explain.

The pipeline wires a language model through a fixed topology: a coordinator
routes each query, a deterministic reminder narrows component names and
index signatures, an operator turns the query into one validated tool call,
a programmer/evaluator loop handles counterfactual constraints, and an
explainer renders the final answer. Every numeric the explainer emits is
checked against the tool payload; a violation triggers one regeneration and
then a deterministic template. Any LM behavior, including none at all,
still ends the turn with an honest answer and a complete trace.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import re
import time
import uuid
from dataclasses import dataclass, field, fields, is_dataclass
from typing import Optional

from .explain import (
    ExplainError,
    IISResult,
    RestorationPlan,
    SensitivityReport,
    WhatIfReport,
    WhyNotReport,
    apply_counterfactual,
    compute_iis,
    evaluate_modification,
    restore_feasibility,
    sensitivity,
)
from .llm import FunctionCall, LmError, LmRequest, LmResponse, Message, ToolSchema
from .model import (
    Modification,
    ModelError,
    ModelIR,
    instantiate,
    lookup_component,
)
from .omif import parse_constraint_dsl, serialize_model
from .solver import SolveResult, solve_instance

FUNCTION_NAMES = (
    "feasibility_restoration",
    "components_retrival",
    "sensitivity_analysis",
    "evaluate_modification",
    "external_tools",
)

LHS_WARNING_SHORT = (
    "left-hand-side coefficients are immutable here; adjust right-hand sides instead."
)


# --------------------------------------------------------------------------
# Numeric rendering and the anti-hallucination gate.

# Trailing lookahead allows a sentence-final dot ("is 4.") but not a decimal
# continuation or an embedded word ("v1.2", "x1").
_NUMERAL_RE = re.compile(r"(?<![\w.])-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?(?!\w|\.\d)")


def format_num(v: float) -> str:
    if v is None:
        return "n/a"
    if abs(v - round(v)) < 1e-9 and abs(v) < 1e15:
        return str(int(round(v)))
    return f"{v:.6g}"


def extract_numerals(text: str) -> list[float]:
    return [float(m.group()) for m in _NUMERAL_RE.finditer(text)]


def to_payload(obj) -> object:
    """Recursively convert a result object to JSON-safe data.

    Dataclasses are walked field by field (not via asdict, which would also
    deep-convert dict keys); dict keys carrying a label() become strings.
    """
    if is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_payload(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, dict):
        return {str(_label(k)): to_payload(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_payload(v) for v in obj]
    if isinstance(obj, float):
        return round(obj, 12)
    return obj if isinstance(obj, (int, str, bool, type(None))) else str(obj)


def _label(key) -> str:
    return key.label() if hasattr(key, "label") else key


def collect_numbers(payload) -> set[float]:
    out: set[float] = set()

    def rec(node):
        if isinstance(node, bool):
            return
        if isinstance(node, (int, float)):
            out.add(float(node))
        elif isinstance(node, str):
            out.update(extract_numerals(node))
        elif isinstance(node, dict):
            for k, v in node.items():
                rec(k)
                rec(v)
        elif isinstance(node, (list, tuple)):
            for v in node:
                rec(v)

    rec(payload)
    return out


def _matches(n: float, p: float) -> bool:
    if abs(n - p) <= 1e-6 * max(1.0, abs(p)):
        return True
    # Allow rounded presentation of a payload number, e.g. "120" for 119.9999.
    text = format_num(n)
    decimals = len(text.split(".")[1]) if "." in text else 0
    return abs(n - round(p, decimals)) <= 1e-9


def numeric_gate_violations(answer: str, payload_numbers: set[float]) -> list[float]:
    """Numerals in the answer with no counterpart in the payload."""
    bad = []
    for n in extract_numerals(answer):
        if not any(_matches(n, p) for p in payload_numbers):
            bad.append(n)
    return bad


# --------------------------------------------------------------------------
# Trace.

def digest(obj) -> str:
    data = json.dumps(to_payload(obj), sort_keys=True, default=str)
    return hashlib.sha256(data.encode()).hexdigest()[:12]


@dataclass
class Hop:
    agent: str
    mode: str = "lm"  # lm | deterministic | fallback
    input_digest: str = ""
    lm_request: Optional[str] = None  # digest
    lm_response: Optional[str] = None  # digest
    function: Optional[str] = None
    arguments: Optional[dict] = None
    result_digest: Optional[str] = None
    payload: Optional[object] = None  # full result payload for dispatch hops
    note: str = ""
    wall_ms: float = 0.0


@dataclass
class AgentTrace:
    trace_id: str
    query: str
    hops: list[Hop] = field(default_factory=list)
    answer: str = ""
    error: Optional[str] = None
    started_at: float = 0.0
    wall_ms: float = 0.0

    def to_json(self) -> dict:
        return to_payload(self)

    def dispatched_call(self) -> Optional[tuple[str, dict]]:
        for hop in self.hops:
            if hop.function and hop.result_digest is not None:
                return hop.function, hop.arguments or {}
        return None

    def replay_digest(self) -> str:
        """Digest over the replay-stable parts (no ids, no timing)."""
        stable = [
            {
                "agent": h.agent,
                "mode": h.mode,
                "function": h.function,
                "arguments": h.arguments,
                "result": h.result_digest,
                "note": h.note,
            }
            for h in self.hops
        ]
        return digest({"query": self.query, "hops": stable, "answer": self.answer})


@dataclass
class Route:
    kind: str  # solution-agnostic | solution-specific
    task: str = ""


@dataclass
class ComponentSignature:
    name: str
    kind: str
    dims: int
    index_sets: tuple[str, ...]
    example_tuples: list[tuple[str, ...]]
    desc: str


@dataclass
class SyntaxGuidance:
    function: str
    components: list[ComponentSignature]
    model_id: str
    full_table: bool = False


@dataclass
class ModelDescription:
    component_table: dict
    narrative: str
    troubleshooting: Optional[str] = None
    used_fallback: bool = False


@dataclass
class PipelineConfig:
    reminder: bool = True
    illustrator: bool = True
    predefined: bool = True
    max_program_iters: int = 3


@dataclass
class OperatorFailure:
    message: str
    attempts: list[str]


@dataclass
class DispatchFailure:
    function: str
    arguments: dict
    message: str


@dataclass
class ProgramLoopFailure:
    message: str
    diagnostics: str
    iterations: int


@dataclass
class AgnosticContext:
    narrative: str
    component_table: dict


@dataclass
class TurnResult:
    answer: str
    trace: AgentTrace


# --------------------------------------------------------------------------
# Prompts. The first line is a stable role tag used by stub transcripts.

ILLUSTRATOR_PROMPT = """ROLE: illustrator
You describe an optimization model to practitioners who know the business
domain but not optimization. Using the component table, introduce what the
model decides, what data it takes as given, what limits it respects and what
it optimizes. Be concise and use the component descriptions verbatim where
possible."""

TROUBLESHOOT_PROMPT = """ROLE: illustrator-troubleshooting
The model has no feasible solution. You are given the set of conflicting
requirements (constraints and bounds) that cannot hold together. Explain in
plain language which requirements clash and which parameters a practitioner
could adjust. Only mention the listed members."""

COORDINATOR_PROMPT = """ROLE: coordinator
You route user queries about an optimization model. Reply with JSON only:
{"agent_name": "...", "task": "..."}.
Use "Explainer" when the query can be answered from the model description
alone (solution-agnostic). Use "Engineer" when answering needs solver
results, diagnostics or model computations (solution-specific)."""

OPERATOR_PROMPT = """ROLE: operator
You control the predefined analysis functions for an optimization model.
Given the query and the syntax guidance, call exactly one function with
component names and index tuples copied from the guidance. Never invent
names or indices."""

PROGRAMMER_PROMPT = """ROLE: programmer
You translate a counterfactual request into one or more extra linear
constraints over the model's existing variables, one per line, in this
constraint language:
  expr <= rhs | expr >= rhs | expr = rhs
  expr is a sum of terms: [number '*'] var  or  param '*' var,
  indices in brackets with quoted labels, e.g. open['f1'],
  aggregation: sum over i in SET: term
Output only constraint lines, no prose."""

EVALUATOR_PROMPT = """ROLE: evaluator
You review the execution digest of counterfactual constraints. Reply with
JSON only: {"decision": "accept", "comment": "..."} or
{"decision": "reject", "comment": "..."}. Infeasibility caused by the new
constraints can be a valid, informative outcome."""

EXPLAINER_PROMPT = """ROLE: explainer
You answer the practitioner's question in plain language from the payload
below. Every number you write MUST appear in the payload; do not compute new
numbers or bring in outside facts. State the direction of any change. If the
payload reports an error or a not-supported analysis, say so honestly and
pass along any suggestion it contains. If part of the question was not
addressed by the payload, acknowledge that."""


# --------------------------------------------------------------------------
# Deterministic reminder cues.

_WHYNOT_CUES = (
    "why not",
    "why isn't",
    "why is it not",
    "why doesn't",
    "why don't",
    "why aren't",
    "why are we not",
)
_RESTORE_CUES = ("feasib", "adjust", "restore", "fix ", "fix?", "repair")
_WHATIF_CUES = ("what if", "what happens if", "what would happen")
_CHANGE_CUES = (
    "increase",
    "decrease",
    "change",
    "raise",
    "lower",
    "cut",
    "goes to",
    "rise",
    "move",
    "reduce",
    "grow",
    "boost",
    "drop",
    "vari",
    "sensitiv",
    "stable",
    "shift",
    "react",
    "expand",
)
_RETRIEVE_CUES = (
    "what are",
    "what is",
    "value",
    "how many",
    "show",
    "list",
    "current",
)

_STOP = frozenset(
    "the a an of for to in at on and or is are was were what how many much would "
    "should could we our i you it this that if by with model make making".split()
)


def _query_tokens(query: str) -> list[str]:
    return [t for t in re.findall(r"[a-z0-9_]+", query.lower()) if t not in _STOP]


def component_signatures(ir: ModelIR) -> list[ComponentSignature]:
    sigs = []
    for kind, comps in (
        ("set", ir.sets),
        ("parameter", ir.parameters),
        ("variable", ir.variables),
        ("constraint", ir.constraints),
    ):
        for name, comp in comps.items():
            index_sets = getattr(comp, "index_sets", ())
            examples: list[tuple[str, ...]] = []
            if index_sets:
                members = [ir.sets[s].members for s in index_sets if s in ir.sets]
                if len(members) == len(index_sets):
                    examples = sorted(itertools.product(*members))[:3]
            sigs.append(
                ComponentSignature(
                    name=name,
                    kind=kind,
                    dims=len(index_sets),
                    index_sets=tuple(index_sets),
                    example_tuples=examples,
                    desc=comp.desc,
                )
            )
    return sigs


def match_components(ir: ModelIR, query: str, limit: int = 4) -> list[ComponentSignature]:
    qtokens = set(_query_tokens(query))
    scored = []
    for sig in component_signatures(ir):
        words = set(re.findall(r"[a-z0-9]+", sig.name.lower())) | set(
            re.findall(r"[a-z0-9]+", sig.desc.lower())
        )
        score = len(qtokens & words)
        if score > 0:
            scored.append((-score, len(scored), sig))
    scored.sort()
    return [sig for _, _, sig in scored[:limit]]


def remind(query: str, ir: ModelIR, model_id: str = "model") -> SyntaxGuidance:
    """Deterministic syntax guidance: function cue plus component signatures."""
    q = query.lower()
    has_number = bool(_NUMERAL_RE.search(q))
    infeasible = ir.metadata.status == "infeasible"

    if any(cue in q for cue in _WHYNOT_CUES):
        function = "external_tools"
    elif infeasible and any(cue in q for cue in _RESTORE_CUES):
        function = "feasibility_restoration"
    elif any(cue in q for cue in _WHATIF_CUES) or (
        has_number and any(cue in q for cue in _CHANGE_CUES)
    ):
        function = "evaluate_modification"
    elif any(cue in q for cue in _CHANGE_CUES):
        function = "sensitivity_analysis"
    else:
        function = "components_retrival"

    components = match_components(ir, query)
    full_table = not components
    if full_table:
        components = component_signatures(ir)
    return SyntaxGuidance(
        function=function,
        components=components,
        model_id=model_id,
        full_table=full_table,
    )


def render_guidance(guidance: SyntaxGuidance) -> str:
    lines = [
        f"model: {guidance.model_id}",
        f"suggested function: {guidance.function} "
        f"(choose from: {', '.join(FUNCTION_NAMES)})",
        "component candidates"
        + (" (full table, no keyword match)" if guidance.full_table else "")
        + ":",
    ]
    for sig in guidance.components:
        if sig.dims:
            ex = "; ".join("[" + ",".join(t) + "]" for t in sig.example_tuples)
            lines.append(
                f"- {sig.name} ({sig.kind}, {sig.dims}-dim over "
                f"{', '.join(sig.index_sets)}; e.g. {ex}): {sig.desc}"
            )
        else:
            lines.append(f"- {sig.name} ({sig.kind}, scalar): {sig.desc}")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# Tool schemas for the operator call.

def tool_schemas() -> list[ToolSchema]:
    idx = {"type": "array", "items": {"type": "string"}}
    return [
        ToolSchema(
            "feasibility_restoration",
            "Minimal rhs-parameter adjustments restoring feasibility.",
            {
                "type": "object",
                "properties": {
                    "adjustables": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "properties": {"parameter": {"type": "string"}, "indices": idx},
                            "required": ["parameter"],
                        },
                    },
                    "weights": {"type": "object"},
                },
            },
        ),
        ToolSchema(
            "components_retrival",
            "Current values or solved results of a named component.",
            {
                "type": "object",
                "properties": {"component": {"type": "string"}, "indices": idx},
                "required": ["component"],
            },
        ),
        ToolSchema(
            "sensitivity_analysis",
            "Shadow price of an rhs parameter (LP only).",
            {
                "type": "object",
                "properties": {"parameter": {"type": "string"}, "indices": idx},
                "required": ["parameter"],
            },
        ),
        ToolSchema(
            "evaluate_modification",
            "Re-solve after concrete parameter/bound modifications.",
            {
                "type": "object",
                "properties": {
                    "modifications": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "properties": {
                                "target": {"type": "string"},
                                "indices": idx,
                                "kind": {"enum": ["set-to", "add-delta", "scale-by"]},
                                "magnitude": {"type": "number"},
                                "bound": {"enum": ["lower", "upper"]},
                            },
                            "required": ["target", "kind", "magnitude"],
                        },
                    }
                },
                "required": ["modifications"],
            },
        ),
        ToolSchema(
            "external_tools",
            "Hand the task to the constraint programmer (counterfactuals).",
            {
                "type": "object",
                "properties": {"task": {"type": "string"}},
            },
        ),
    ]


# --------------------------------------------------------------------------
# Argument validation against the model.

def validate_call(ir: ModelIR, call: FunctionCall) -> Optional[str]:
    """None when dispatchable; otherwise a corrective message for the LM."""
    if call.name not in FUNCTION_NAMES:
        return (
            f"unknown function {call.name!r}; choose one of "
            + ", ".join(FUNCTION_NAMES)
        )
    args = call.arguments or {}

    def check_indices(name: str, indices, partial_ok: bool) -> Optional[str]:
        comp = ir.parameters.get(name) or ir.variables.get(name) or ir.constraints.get(name)
        if comp is None:
            if name in ir.sets or name == "objective":
                return None
            from .model import suggest_names

            sugg = suggest_names(name, ir.component_names())
            extra = f"; did you mean {', '.join(sugg)}?" if sugg else ""
            return f"unknown component {name!r}{extra}"
        declared = comp.index_sets
        indices = list(indices or [])
        if len(indices) > len(declared):
            return (
                f"{name!r} takes at most {len(declared)} indices "
                f"({', '.join(declared) or 'none'}), got {len(indices)}"
            )
        if not partial_ok and declared and len(indices) != len(declared):
            return (
                f"{name!r} needs a full index tuple over ({', '.join(declared)})"
            )
        for pos, label in enumerate(indices):
            sname = declared[pos]
            members = ir.sets[sname].members if sname in ir.sets else ()
            if label not in members:
                return (
                    f"unknown index {label!r} for {name!r}; valid members of "
                    f"{sname}: {', '.join(members)}"
                )
        return None

    if call.name == "components_retrival":
        if not args.get("component"):
            return "components_retrival needs a 'component' name"
        return check_indices(args["component"], args.get("indices"), partial_ok=True)

    if call.name == "sensitivity_analysis":
        if not args.get("parameter"):
            return "sensitivity_analysis needs a 'parameter' name"
        name = args["parameter"]
        if name not in ir.parameters:
            from .model import suggest_names

            sugg = suggest_names(name, list(ir.parameters))
            extra = f"; did you mean {', '.join(sugg)}?" if sugg else ""
            return f"unknown parameter {name!r}{extra}"
        return check_indices(name, args.get("indices"), partial_ok=False)

    if call.name == "evaluate_modification":
        mods = args.get("modifications")
        if not mods or not isinstance(mods, list):
            return "evaluate_modification needs a non-empty 'modifications' array"
        for mod in mods:
            name = mod.get("target", "")
            if mod.get("bound") in ("lower", "upper"):
                if name not in ir.variables:
                    return f"unknown variable {name!r} for a bound modification"
                continue
            if name not in ir.parameters:
                from .model import suggest_names

                sugg = suggest_names(name, list(ir.parameters))
                extra = f"; did you mean {', '.join(sugg)}?" if sugg else ""
                return f"unknown parameter {name!r}{extra}"
            err = check_indices(name, mod.get("indices"), partial_ok=False)
            if err:
                return err
            if mod.get("kind") not in ("set-to", "add-delta", "scale-by"):
                return f"unknown modification kind {mod.get('kind')!r}"
            if not isinstance(mod.get("magnitude"), (int, float)):
                return "modification 'magnitude' must be a number"
        return None

    if call.name == "feasibility_restoration":
        adjustables = args.get("adjustables") or []
        for adj in adjustables:
            name = adj.get("parameter", "")
            if name not in ir.parameters:
                from .model import suggest_names

                sugg = suggest_names(name, list(ir.parameters))
                extra = f"; did you mean {', '.join(sugg)}?" if sugg else ""
                return f"unknown parameter {name!r}{extra}"
            indices = adj.get("indices")
            if indices:
                err = check_indices(name, indices, partial_ok=False)
                if err:
                    return err
        return None

    return None  # external_tools takes free text


# --------------------------------------------------------------------------
# Pipeline.

def _parse_json_object(text: str) -> Optional[dict]:
    match = re.search(r"\{.*\}", text, re.DOTALL)
    if not match:
        return None
    try:
        obj = json.loads(match.group())
    except json.JSONDecodeError:
        return None
    return obj if isinstance(obj, dict) else None


class ChatPipeline:
    """One model, one LM client, many sequential turns."""

    def __init__(
        self,
        ir: ModelIR,
        lm=None,
        config: Optional[PipelineConfig] = None,
        model_id: str = "model",
    ):
        self.ir = ir
        self.lm = lm
        self.config = config or PipelineConfig()
        self.model_id = model_id
        self.instance = instantiate(ir)
        self.baseline: SolveResult = solve_instance(self.instance)
        status = self.baseline.status
        ir.metadata.status = status if status in ("optimal", "infeasible", "unbounded") else "unsolved"
        self.description: Optional[ModelDescription] = None
        self.transcript: list[tuple[str, str]] = []

    # -- LM helper ----------------------------------------------------------

    def _lm_call(
        self, trace: AgentTrace, agent: str, messages: list[Message], tools=None
    ) -> LmResponse:
        if self.lm is None:
            raise LmError("no language model configured")
        request = LmRequest(messages=messages, tools=tools or [])
        t0 = time.perf_counter()
        try:
            response = self.lm.complete(request)
        except LmError:
            trace.hops.append(
                Hop(
                    agent=agent,
                    mode="lm",
                    lm_request=digest(request.text()),
                    lm_response=None,
                    note="lm failure",
                    wall_ms=(time.perf_counter() - t0) * 1000,
                )
            )
            raise
        trace.hops.append(
            Hop(
                agent=agent,
                mode="lm",
                lm_request=digest(request.text()),
                lm_response=digest(response.text or (response.call.name if response.call else "")),
                function=response.call.name if response.call else None,
                arguments=dict(response.call.arguments) if response.call else None,
                wall_ms=(time.perf_counter() - t0) * 1000,
            )
        )
        return response

    # -- Illustrator --------------------------------------------------------

    def illustrate(self) -> ModelDescription:
        table = self.component_table()
        trace = AgentTrace(trace_id="illustrate", query="", started_at=time.time())
        narrative = None
        fallback = False
        if self.config.illustrator and self.lm is not None:
            try:
                resp = self._lm_call(
                    trace,
                    "illustrator",
                    [
                        Message("system", ILLUSTRATOR_PROMPT),
                        Message("user", json.dumps(table, sort_keys=True)),
                    ],
                )
                narrative = resp.text.strip() or None
            except LmError:
                narrative = None
            if narrative is None:
                fallback = True
        if narrative is None:
            narrative = self.template_narrative()

        troubleshooting = None
        if self.baseline.status == "infeasible":
            iis = compute_iis(self.ir)
            members = [
                {"member": m.label, "meaning": m.describe(self.ir)} for m in iis.members
            ]
            troubleshooting = None
            if self.config.illustrator and self.lm is not None:
                try:
                    resp = self._lm_call(
                        trace,
                        "illustrator",
                        [
                            Message("system", TROUBLESHOOT_PROMPT),
                            Message(
                                "user",
                                json.dumps({"conflict": members, "components": table},
                                           sort_keys=True),
                            ),
                        ],
                    )
                    troubleshooting = resp.text.strip() or None
                except LmError:
                    troubleshooting = None
            if troubleshooting is None:
                fallback = fallback or (self.config.illustrator and self.lm is not None)
                lines = [
                    "The model has no feasible solution. The following requirements "
                    "conflict and cannot hold together:"
                ]
                for m in members:
                    lines.append(f"- {m['member']}: {m['meaning']}")
                lines.append(
                    "Adjusting the parameters behind these requirements can restore "
                    "feasibility."
                )
                troubleshooting = "\n".join(lines)

        self.description = ModelDescription(
            component_table=table,
            narrative=narrative,
            troubleshooting=troubleshooting,
            used_fallback=fallback,
        )
        return self.description

    def component_table(self) -> dict:
        table: dict = {"model": self.ir.metadata.name, "status": self.baseline.status}
        table["sets"] = {
            s.name: {"members": list(s.members), "desc": s.desc}
            for s in self.ir.sets.values()
        }
        table["parameters"] = {
            p.name: {
                "indexed_over": list(p.index_sets),
                "desc": p.desc,
                "side": p.side,
                "values": {",".join(k) if k else "value": v for k, v in sorted(p.values.items())},
            }
            for p in self.ir.parameters.values()
        }
        table["variables"] = {
            v.name: {
                "indexed_over": list(v.index_sets),
                "domain": v.domain,
                "desc": v.desc,
            }
            for v in self.ir.variables.values()
        }
        table["constraints"] = {
            c.name: {
                "indexed_over": list(c.index_sets),
                "sense": c.sense,
                "desc": c.desc,
            }
            for c in self.ir.constraints.values()
        }
        table["objective"] = {
            "sense": self.ir.objective.sense,
            "desc": self.ir.objective.desc,
        }
        if self.baseline.status == "optimal":
            table["objective"]["value"] = self.baseline.objective
        return table

    def template_narrative(self) -> str:
        ir = self.ir
        goal = "minimizes" if ir.objective.sense == "min" else "maximizes"
        lines = [
            f"This model ({ir.metadata.name}) {goal} {ir.objective.desc or 'its objective'}."
        ]
        if ir.variables:
            lines.append(
                "It decides: "
                + "; ".join(f"{v.name}: {v.desc}" for v in ir.variables.values())
                + "."
            )
        if ir.parameters:
            lines.append(
                "Given data: "
                + "; ".join(f"{p.name}: {p.desc}" for p in ir.parameters.values())
                + "."
            )
        if ir.constraints:
            lines.append(
                "Subject to: "
                + "; ".join(f"{c.name}: {c.desc}" for c in ir.constraints.values())
                + "."
            )
        if self.baseline.status == "optimal":
            lines.append(
                f"The current optimal objective value is {format_num(self.baseline.objective)}."
            )
        elif self.baseline.status == "infeasible":
            lines.append("The model is currently infeasible; see the troubleshooting notes.")
        return " ".join(lines)

    # -- Coordinator --------------------------------------------------------

    def classify_query(self, query: str, trace: AgentTrace) -> Route:
        context = self.description.narrative if self.description else ""
        recent = "\n".join(f"user: {u}\nanswer: {a}" for u, a in self.transcript[-3:])
        user = (
            f"model description:\n{context}\n\nrecent conversation:\n{recent}\n\n"
            f"query: {query}"
        )
        messages = [Message("system", COORDINATOR_PROMPT), Message("user", user)]
        for attempt in (1, 2):
            try:
                resp = self._lm_call(trace, "coordinator", messages)
            except LmError:
                break
            obj = _parse_json_object(resp.text)
            if obj and set(obj) >= {"agent_name", "task"}:
                agent = str(obj["agent_name"])
                if agent == "Explainer":
                    return Route("solution-agnostic", str(obj["task"]))
                if agent in ("Engineer", "Reminder", "Operator", "Programmer"):
                    return Route("solution-specific", str(obj["task"]))
            messages = messages + [
                Message("assistant", resp.text),
                Message(
                    "user",
                    'invalid response; reply with JSON {"agent_name": "Explainer"|"Engineer", '
                    '"task": "..."} and nothing else',
                ),
            ]
        trace.hops.append(
            Hop(agent="coordinator", mode="fallback", note="defaulted to solution-specific")
        )
        return Route("solution-specific", query)

    # -- Operator -----------------------------------------------------------

    def operate(self, query: str, guidance: SyntaxGuidance, trace: AgentTrace):
        """Returns (result, function, arguments) or an OperatorFailure result."""
        user = render_guidance(guidance) + f"\n\nquery: {query}"
        messages = [Message("system", OPERATOR_PROMPT), Message("user", user)]
        attempts: list[str] = []
        for attempt in (1, 2):
            try:
                resp = self._lm_call(trace, "operator", messages, tools=tool_schemas())
            except LmError as exc:
                attempts.append(f"lm failure: {exc}")
                break
            call = resp.call
            if call is None:
                obj = _parse_json_object(resp.text or "")
                if obj and "name" in obj:
                    call = FunctionCall(obj["name"], obj.get("arguments", {}) or {})
            if call is None:
                err = "expected a function call"
            else:
                err = validate_call(self.ir, call)
            if err is None:
                args = dict(call.arguments or {})
                if call.name == "external_tools":
                    return None, call.name, args
                try:
                    return self.dispatch(call, trace)
                except (ExplainError, ModelError) as exc:
                    trace.hops.append(
                        Hop(
                            agent="operator-dispatch",
                            mode="fallback",
                            function=call.name,
                            arguments=args,
                            note=f"predefined function failed: {exc}",
                        )
                    )
                    return DispatchFailure(call.name, args, str(exc)), call.name, args
            attempts.append(err)
            messages = messages + [
                Message("assistant", resp.text or (call.name if call else "")),
                Message("user", f"invalid call: {err}; correct it and call again"),
            ]
        failure = OperatorFailure(
            message="could not produce a valid function call for this query; "
            "the request is ambiguous against this model",
            attempts=attempts,
        )
        trace.hops.append(
            Hop(agent="operator", mode="fallback", note="; ".join(attempts)[:300])
        )
        return failure, None, None

    def dispatch(self, call: FunctionCall, trace: AgentTrace):
        """Run a validated predefined function and trace the result."""
        args = call.arguments or {}
        t0 = time.perf_counter()
        if call.name == "components_retrival":
            result = lookup_component(
                self.ir,
                args["component"],
                tuple(args.get("indices") or ()) or None,
                solution=self.baseline,
            )
        elif call.name == "sensitivity_analysis":
            result = sensitivity(
                self.ir, args["parameter"], tuple(args.get("indices") or ())
            )
        elif call.name == "evaluate_modification":
            mods = [
                Modification(
                    target=m["target"],
                    indices=tuple(m.get("indices") or ()),
                    kind=m["kind"],
                    magnitude=float(m["magnitude"]),
                    bound=m.get("bound"),
                )
                for m in args["modifications"]
            ]
            result = evaluate_modification(self.ir, mods)
        elif call.name == "feasibility_restoration":
            adjustables = [
                (a["parameter"], tuple(a["indices"]) if a.get("indices") else None)
                for a in (args.get("adjustables") or [])
            ]
            weights = args.get("weights") or None
            result = restore_feasibility(self.ir, adjustables or None, weights)
        else:
            raise ExplainError(f"function {call.name} has no direct dispatch")
        trace.hops.append(
            Hop(
                agent="operator-dispatch",
                mode="deterministic",
                function=call.name,
                arguments=args,
                result_digest=digest(result),
                payload=to_payload(result),
                wall_ms=(time.perf_counter() - t0) * 1000,
            )
        )
        return result, call.name, args

    # -- Programmer / Evaluator loop -----------------------------------------

    def program_loop(self, query: str, trace: AgentTrace, task: str = ""):
        feedback = ""
        model_text = serialize_model(self.ir)
        last_diag = ""
        for iteration in range(1, self.config.max_program_iters + 1):
            user = (
                f"model:\n{model_text}\n"
                f"task: {task or query}\nquery: {query}"
                + (f"\n\nprevious attempt failed:\n{feedback}" if feedback else "")
            )
            try:
                resp = self._lm_call(
                    trace,
                    "programmer",
                    [Message("system", PROGRAMMER_PROMPT), Message("user", user)],
                )
            except LmError as exc:
                last_diag = f"language model failure: {exc}"
                break
            lines = [
                ln.strip()
                for ln in (resp.text or "").splitlines()
                if ln.strip() and not ln.strip().startswith(("#", "```"))
            ]
            if not lines:
                feedback = last_diag = "no constraint lines in the response"
                continue
            specs = []
            diags = []
            for ln in lines:
                parsed = parse_constraint_dsl(ln, self.ir, provenance="programmer-agent")
                if parsed.ok:
                    specs.append(parsed.spec)
                else:
                    diags.extend(f"{ln!r}: {d.render()}" for d in parsed.diagnostics)
            if diags:
                feedback = last_diag = "\n".join(diags)
                continue
            try:
                report = apply_counterfactual(self.ir, specs)
            except (ExplainError, ModelError) as exc:
                feedback = last_diag = str(exc)
                continue
            trace.hops.append(
                Hop(
                    agent="evaluator-execute",
                    mode="deterministic",
                    function="apply_counterfactual",
                    arguments={"constraints": [s.text for s in specs]},
                    result_digest=digest(report),
                    payload=to_payload(report),
                )
            )
            digest_text = json.dumps(to_payload(report), sort_keys=True)
            decision, comment = self._evaluate(digest_text, trace)
            if decision == "accept":
                return report
            feedback = last_diag = f"evaluator rejected the constraints: {comment}"
        return ProgramLoopFailure(
            message="could not realize the counterfactual as valid constraints",
            diagnostics=last_diag,
            iterations=self.config.max_program_iters,
        )

    def _evaluate(self, digest_text: str, trace: AgentTrace) -> tuple[str, str]:
        try:
            resp = self._lm_call(
                trace,
                "evaluator",
                [
                    Message("system", EVALUATOR_PROMPT),
                    Message("user", f"execution digest:\n{digest_text}"),
                ],
            )
        except LmError:
            trace.hops.append(
                Hop(agent="evaluator", mode="fallback", note="lm failure; accepted by default")
            )
            return "accept", "accepted by default (no evaluator available)"
        obj = _parse_json_object(resp.text or "")
        if obj and obj.get("decision") in ("accept", "reject"):
            return obj["decision"], str(obj.get("comment", ""))
        trace.hops.append(
            Hop(
                agent="evaluator",
                mode="fallback",
                note="invalid evaluator response; accepted (execution digest is valid)",
            )
        )
        return "accept", "accepted by default (invalid evaluator response)"

    # -- Explainer ------------------------------------------------------------

    def explain_result(self, query: str, result, trace: AgentTrace) -> str:
        payload = to_payload(result)
        payload_numbers = collect_numbers(payload)
        payload_text = json.dumps(payload, sort_keys=True)
        messages = [
            Message("system", EXPLAINER_PROMPT),
            Message("user", f"question: {query}\n\npayload:\n{payload_text}"),
        ]
        for attempt in (1, 2):
            try:
                resp = self._lm_call(trace, "explainer", messages)
            except LmError:
                break
            answer = (resp.text or "").strip()
            if not answer:
                break
            bad = numeric_gate_violations(answer, payload_numbers)
            if not bad:
                return answer
            trace.hops.append(
                Hop(
                    agent="explainer",
                    mode="fallback",
                    note="numeric gate: answer cites "
                    + ", ".join(format_num(b) for b in bad)
                    + " absent from the payload; regenerating",
                )
            )
            messages = messages + [
                Message("assistant", answer),
                Message(
                    "user",
                    "your answer cites numbers not present in the payload ("
                    + ", ".join(format_num(b) for b in bad)
                    + "); rewrite it using only payload numbers",
                ),
            ]
        template = self.template_answer(result)
        trace.hops.append(
            Hop(agent="explainer", mode="fallback", note="template answer used")
        )
        return template

    def template_answer(self, result) -> str:
        if isinstance(result, AgnosticContext):
            return result.narrative
        if isinstance(result, SensitivityReport):
            if result.not_supported:
                return (
                    f"Sensitivity analysis is not supported here ({result.not_supported}): "
                    + result.suggestion
                )
            note = f" ({result.validity_note})" if result.validity_note else ""
            return (
                f"The shadow price of {result.param} is "
                f"{format_num(result.shadow_price)}: per unit increase, the optimal "
                f"objective changes by {format_num(result.shadow_price)}{note}."
            )
        if isinstance(result, WhatIfReport):
            parts = [f"After {'; '.join(result.modifications)}: status {result.new_status}."]
            if result.new_objective is not None:
                parts.append(f"New objective {format_num(result.new_objective)}")
                if result.baseline_objective is not None:
                    parts.append(
                        f"(baseline {format_num(result.baseline_objective)}, "
                        f"change {format_num(result.delta)})."
                    )
            return " ".join(parts)
        if isinstance(result, WhyNotReport):
            if result.counterfactual_status == "infeasible":
                conflict = ", ".join(result.iis.labels()) if result.iis else ""
                return (
                    "Forcing "
                    + "; ".join(result.specs)
                    + " makes the model infeasible; the conflicting requirements are: "
                    + conflict
                    + "."
                )
            return (
                "Forcing "
                + "; ".join(result.specs)
                + f" yields objective {format_num(result.counterfactual_objective)} versus "
                + f"baseline {format_num(result.baseline_objective)} "
                + f"(change {format_num(result.delta)})."
            )
        if isinstance(result, RestorationPlan):
            steps = [
                f"{a.direction} {a.param.label()} by {format_num(a.magnitude)}"
                for a in result.adjustments
                if a.magnitude > 1e-12
            ]
            msg = (
                "Feasibility can be restored with total weighted adjustment "
                f"{format_num(result.total_penalty)}: " + "; ".join(steps) + "."
            )
            if result.rejected:
                msg += (
                    " Rejected adjustables: "
                    + "; ".join(f"{r.label} ({r.reason})" for r in result.rejected)
                    + f". Note: {LHS_WARNING_SHORT}"
                )
            return msg
        if isinstance(result, IISResult):
            return (
                "The conflicting requirements are: " + ", ".join(result.labels()) + "."
            )
        if isinstance(result, OperatorFailure):
            return (
                "I could not turn this question into a valid analysis: "
                + result.message
                + " Details: "
                + "; ".join(result.attempts)
            )
        if isinstance(result, DispatchFailure):
            return (
                f"The {result.function} analysis failed: {result.message}"
            )
        if isinstance(result, ProgramLoopFailure):
            return (
                "I could not realize this counterfactual after "
                f"{result.iterations} attempts. Last issue: {result.diagnostics}"
            )
        if hasattr(result, "kind") and hasattr(result, "entries"):  # ComponentView
            shown = []
            for idx, value in result.entries[:12]:
                label = result.name + (f"[{','.join(idx)}]" if idx else "")
                if isinstance(value, (int, float)) and value is not None:
                    shown.append(f"{label} = {format_num(value)}")
                elif isinstance(value, list):
                    shown.append(f"{label}: {', '.join(map(str, value))}")
                else:
                    shown.append(label)
            head = f"{result.name} ({result.kind}): {result.desc}."
            extra = result.extra.get("value") if result.extra else None
            if extra is not None:
                shown.append(f"value = {format_num(extra)}")
            return head + (" " + "; ".join(shown) if shown else "")
        payload = to_payload(result)
        return "Result: " + json.dumps(payload, sort_keys=True)

    # -- Turn driver -----------------------------------------------------------

    def run_turn(self, query: str) -> TurnResult:
        trace = AgentTrace(
            trace_id=uuid.uuid4().hex[:12], query=query, started_at=time.time()
        )
        t0 = time.perf_counter()
        try:
            answer = self._run_turn_inner(query, trace)
        except Exception as exc:  # noqa: BLE001 - totality: any failure still answers
            trace.error = f"{type(exc).__name__}: {exc}"
            answer = (
                "Something went wrong while processing this question: "
                f"{exc}. Please rephrase or try a more specific query."
            )
        trace.answer = answer
        trace.wall_ms = (time.perf_counter() - t0) * 1000
        self.transcript.append((query, answer))
        return TurnResult(answer=answer, trace=trace)

    def _run_turn_inner(self, query: str, trace: AgentTrace) -> str:
        route = self.classify_query(query, trace)
        if route.kind == "solution-agnostic":
            if self.description is None:
                self.illustrate()
            context = AgnosticContext(
                narrative=(self.description.narrative if self.config.illustrator else "")
                + (
                    "\n" + (self.description.troubleshooting or "")
                    if self.description.troubleshooting
                    else ""
                ),
                component_table=self.description.component_table
                if self.config.illustrator
                else {},
            )
            return self.explain_result(query, context, trace)

        if self.config.reminder:
            t0 = time.perf_counter()
            guidance = remind(query, self.ir, self.model_id)
            trace.hops.append(
                Hop(
                    agent="reminder",
                    mode="deterministic",
                    input_digest=digest(query),
                    result_digest=digest(render_guidance(guidance)),
                    note=f"function={guidance.function}",
                    wall_ms=(time.perf_counter() - t0) * 1000,
                )
            )
        else:
            guidance = SyntaxGuidance(
                function="components_retrival",
                components=component_signatures(self.ir),
                model_id=self.model_id,
                full_table=True,
            )
            trace.hops.append(
                Hop(agent="reminder", mode="deterministic", note="disabled")
            )

        if not self.config.predefined:
            result = self.program_loop(query, trace, task=route.task)
            return self.explain_result(query, result, trace)

        result, function, args = self.operate(query, guidance, trace)
        if function == "external_tools":
            result = self.program_loop(query, trace, task=(args or {}).get("task", ""))
        elif isinstance(result, DispatchFailure):
            # A failing predefined function hands the task to the programmer;
            # if that also fails, the original failure is what gets explained.
            fallback = self.program_loop(query, trace)
            if not isinstance(fallback, ProgramLoopFailure):
                result = fallback
        return self.explain_result(query, result, trace)
