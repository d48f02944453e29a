"""OMIF text format: parse/serialize models, plus the constraint micro-DSL.

OMIF is a small block-structured text format (see docs/omif.ebnf). Every
named component carries a `desc` string so downstream agents can ground user
terminology. The constraint DSL reuses the expression grammar and is how
counterfactual constraints enter the system: it can only reference existing
variables and parameters, never define new ones.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional

from .model import (
    Constraint,
    Idx,
    IndexSet,
    LinExpr,
    Metadata,
    ModelIR,
    Objective,
    Parameter,
    Ref,
    Sum,
    Term,
    Variable,
    suggest_names,
)

MAX_NESTING = 50


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str
    suggestions: tuple[str, ...] = ()

    def render(self) -> str:
        hint = f" (did you mean: {', '.join(self.suggestions)}?)" if self.suggestions else ""
        return f"{self.line}:{self.col}: {self.message}{hint}"


@dataclass
class ParseResult:
    model: Optional[ModelIR] = None
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.model is not None and not self.diagnostics


@dataclass
class DslResult:
    spec: Optional["ConstraintSpec"] = None
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.spec is not None and not self.diagnostics


@dataclass(frozen=True)
class ConstraintSpec:
    """A single extra constraint expressed against an existing model."""

    body: LinExpr
    sense: str
    rhs_value: Optional[float] = None
    rhs_param: Optional[Ref] = None
    provenance: str = "user"  # user | programmer-agent
    text: str = ""


# --------------------------------------------------------------------------
# Tokenizer.

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<label>'[^'\n]*')
  | (?P<op><=|>=|<|>|=|\{|\}|\[|\]|\(|\)|:|,|\*|\+|-)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # number | ident | string | label | op | eof
    text: str
    line: int
    col: int


class _Abort(Exception):
    """Internal: unrecoverable parse error, diagnostic already recorded."""


def tokenize(text: str) -> tuple[list[Token], list[Diagnostic]]:
    tokens: list[Token] = []
    diags: list[Diagnostic] = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            diags.append(Diagnostic(line, col, f"unexpected character {text[pos]!r}"))
            nl = text.count("\n", pos, pos + 1)
            line += nl
            col = 1 if nl else col + 1
            pos += 1
            continue
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, chunk, line, col))
        nls = chunk.count("\n")
        if nls:
            line += nls
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens, diags


# --------------------------------------------------------------------------
# Parser.

class _Parser:
    def __init__(self, tokens: list[Token], diags: list[Diagnostic]):
        self.tokens = tokens
        self.pos = 0
        self.diags = diags

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        t = self.cur
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, message: str, suggestions: tuple[str, ...] = ()) -> None:
        t = self.cur
        self.diags.append(Diagnostic(t.line, t.col, message, suggestions))
        raise _Abort()

    def expect(self, kind: str, text: Optional[str] = None, what: str = "") -> Token:
        t = self.cur
        if t.kind != kind or (text is not None and t.text != text):
            expected = text if text is not None else kind
            got = t.text or "end of input"
            self.error(f"expected {expected!r}{' ' + what if what else ''}, got {got!r}")
        return self.advance()

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.cur
        return t.kind == kind and (text is None or t.text == text)

    def at_kw(self, word: str) -> bool:
        return self.at("ident", word)

    # -- leaf pieces --------------------------------------------------------

    def parse_desc(self) -> str:
        self.expect("ident", "desc")
        t = self.expect("string")
        body = t.text[1:-1]
        try:
            value = body.encode().decode("unicode_escape")
        except UnicodeDecodeError:
            value = body
        if not value:
            self.error("description required (empty desc string)")
        return value

    def parse_number(self) -> float:
        sign = 1.0
        while self.at("op", "-") or self.at("op", "+"):
            if self.advance().text == "-":
                sign = -sign
        if self.at_kw("inf"):
            self.advance()
            return sign * math.inf
        t = self.expect("number")
        return sign * float(t.text)

    def parse_label(self) -> str:
        if self.at("label"):
            return self.advance().text[1:-1]
        if self.at("ident"):
            return self.advance().text
        self.error("expected a set member label")

    def parse_key(self) -> tuple[str, ...]:
        if self.at("op", "("):
            self.advance()
            parts = [self.parse_label()]
            while self.at("op", ","):
                self.advance()
                parts.append(self.parse_label())
            self.expect("op", ")")
            return tuple(parts)
        return (self.parse_label(),)

    def parse_name_list(self, close: str) -> tuple[str, ...]:
        names: list[str] = []
        if not self.at("op", close):
            names.append(self.expect("ident").text)
            while self.at("op", ","):
                self.advance()
                names.append(self.expect("ident").text)
        self.expect("op", close)
        return tuple(names)

    def parse_index(self) -> Idx:
        if self.at("label"):
            return Idx("label", self.advance().text[1:-1])
        t = self.expect("ident")
        return Idx("var", t.text)

    def parse_ref(self) -> Ref:
        name_tok = self.expect("ident")
        indices: list[Idx] = []
        if self.at("op", "["):
            self.advance()
            indices.append(self.parse_index())
            while self.at("op", ","):
                self.advance()
                indices.append(self.parse_index())
            self.expect("op", "]")
        return Ref(name_tok.text, tuple(indices), line=name_tok.line, col=name_tok.col)

    # -- expressions ---------------------------------------------------------

    def parse_expr(self, depth: int = 0) -> LinExpr:
        if depth > MAX_NESTING:
            self.error("expression nesting too deep")
        items: list = []
        sign = 1.0
        if self.at("op", "-") or self.at("op", "+"):
            if self.advance().text == "-":
                sign = -1.0
        items.extend(self.parse_item(sign, depth))
        while self.at("op", "+") or self.at("op", "-"):
            sign = -1.0 if self.advance().text == "-" else 1.0
            items.extend(self.parse_item(sign, depth))
        return LinExpr(tuple(items))

    def parse_item(self, sign: float, depth: int) -> list:
        if depth > MAX_NESTING:
            self.error("expression nesting too deep")
        if self.at_kw("sum"):
            self.advance()
            self.expect("ident", "over")
            ivar = self.expect("ident").text
            self.expect("ident", "in")
            sname = self.expect("ident").text
            self.expect("op", ":")
            body = self.parse_item(1.0, depth + 1)
            return [Sum(ivar, sname, tuple(body), sign)]
        if self.at("op", "("):
            self.advance()
            inner = self.parse_expr(depth + 1)
            self.expect("op", ")")
            if sign == 1.0:
                return list(inner.items)
            flipped = []
            for it in inner.items:
                if isinstance(it, Sum):
                    flipped.append(Sum(it.index_var, it.set_name, it.body, -it.sign))
                else:
                    flipped.append(
                        Term(-it.coef_value, it.coef_param, it.var)
                    )
            return flipped
        return [self.parse_product(sign)]

    def parse_product(self, sign: float) -> Term:
        operands: list = []
        tok0 = self.cur
        operands.append(self.parse_operand())
        while self.at("op", "*"):
            self.advance()
            operands.append(self.parse_operand())
        if len(operands) > 2:
            self.diags.append(
                Diagnostic(
                    tok0.line,
                    tok0.col,
                    "a term is at most coefficient * variable; "
                    "products of three or more factors are not supported",
                )
            )
            raise _Abort()
        coef_value = sign
        coef_param: Optional[Ref] = None
        var: Optional[Ref] = None
        n_refs = sum(1 for o in operands if isinstance(o, Ref))
        if n_refs == 2:
            # param * var is decided at resolution; two vars is nonlinear.
            first, second = operands
            return Term(sign, first, second)  # resolver flags var*var
        for o in operands:
            if isinstance(o, Ref):
                var = o
            else:
                coef_value *= o
        return Term(coef_value, coef_param, var)

    def parse_operand(self):
        if self.at("number"):
            return float(self.advance().text)
        if self.at("ident"):
            return self.parse_ref()
        got = self.cur.text or "end of input"
        self.error(f"expected a number, parameter or variable reference, got {got!r}")

    def parse_sense(self) -> str:
        if self.at("op", "<=") or self.at("op", ">=") or self.at("op", "="):
            return self.advance().text
        got = self.cur.text or "end of input"
        self.error(f"malformed sense: expected one of <=, >=, =, got {got!r}")

    def parse_rhs(self) -> tuple[Optional[float], Optional[Ref]]:
        if self.at("number") or self.at("op", "-") or self.at("op", "+"):
            return self.parse_number(), None
        if self.at("ident"):
            return None, self.parse_ref()
        got = self.cur.text or "end of input"
        self.error(f"expected a number or parameter reference as rhs, got {got!r}")

    # -- blocks ---------------------------------------------------------------

    def parse_document(self) -> ModelIR:
        ir = ModelIR()
        seen_objective = False
        while not self.at("eof"):
            t = self.cur
            if t.kind != "ident":
                self.error(
                    "expected a block keyword "
                    "(meta, sets, params, vars, constraints, objective)"
                )
            word = t.text
            if word == "meta":
                self.advance()
                self.parse_meta(ir)
            elif word == "sets":
                self.advance()
                self.parse_sets(ir)
            elif word == "params":
                self.advance()
                self.parse_params(ir)
            elif word == "vars":
                self.advance()
                self.parse_vars(ir)
            elif word == "constraints":
                self.advance()
                self.parse_constraints(ir)
            elif word == "objective":
                self.advance()
                self.parse_objective(ir)
                seen_objective = True
            else:
                self.error(
                    f"unknown block {word!r}",
                    tuple(
                        suggest_names(
                            word,
                            ["meta", "sets", "params", "vars", "constraints", "objective"],
                        )
                    ),
                )
        if not seen_objective:
            self.error("document has no objective block")
        return ir

    def check_fresh(self, ir: ModelIR, name_tok: Token, name: str) -> None:
        if name in ir.component_names():
            self.diags.append(
                Diagnostic(name_tok.line, name_tok.col, f"duplicate component name {name!r}")
            )
            raise _Abort()

    def parse_meta(self, ir: ModelIR) -> None:
        self.expect("op", "{", "to open meta block")
        while not self.at("op", "}"):
            key = self.expect("ident").text
            self.expect("op", ":")
            val = self.expect("string").text[1:-1]
            if key == "name":
                ir.metadata = Metadata(name=val)
        self.expect("op", "}", "to close meta block (unterminated block?)")

    def parse_sets(self, ir: ModelIR) -> None:
        self.expect("op", "{", "to open sets block")
        while not self.at("op", "}"):
            if self.at("eof"):
                self.error("unterminated sets block")
            name_tok = self.cur
            name = self.expect("ident").text
            self.check_fresh(ir, name_tok, name)
            self.expect("op", ":")
            self.expect("op", "[")
            members: list[str] = []
            if not self.at("op", "]"):
                members.append(self.parse_label())
                while self.at("op", ","):
                    self.advance()
                    members.append(self.parse_label())
            self.expect("op", "]")
            desc = self.parse_desc()
            ir.sets[name] = IndexSet(name, tuple(members), desc)
        self.expect("op", "}")

    def parse_params(self, ir: ModelIR) -> None:
        self.expect("op", "{", "to open params block")
        while not self.at("op", "}"):
            if self.at("eof"):
                self.error("unterminated params block")
            name_tok = self.cur
            name = self.expect("ident").text
            self.check_fresh(ir, name_tok, name)
            index_sets: tuple[str, ...] = ()
            if self.at("op", "["):
                self.advance()
                index_sets = self.parse_name_list("]")
            self.expect("op", ":")
            values: dict[tuple[str, ...], float] = {}
            if self.at("op", "{"):
                self.advance()
                if not self.at("op", "}"):
                    k = self.parse_key()
                    self.expect("op", ":")
                    values[k] = self.parse_number()
                    while self.at("op", ","):
                        self.advance()
                        k = self.parse_key()
                        self.expect("op", ":")
                        values[k] = self.parse_number()
                self.expect("op", "}", "to close value table (unterminated block?)")
            else:
                if index_sets:
                    self.error(f"indexed parameter {name!r} needs a value table")
                values[()] = self.parse_number()
            desc = self.parse_desc()
            ir.parameters[name] = Parameter(name, index_sets, values, desc)
        self.expect("op", "}")

    def parse_vars(self, ir: ModelIR) -> None:
        self.expect("op", "{", "to open vars block")
        while not self.at("op", "}"):
            if self.at("eof"):
                self.error("unterminated vars block")
            name_tok = self.cur
            name = self.expect("ident").text
            self.check_fresh(ir, name_tok, name)
            index_sets: tuple[str, ...] = ()
            if self.at("op", "["):
                self.advance()
                index_sets = self.parse_name_list("]")
            self.expect("op", ":")
            dom_tok = self.cur
            domain = self.expect("ident").text
            if domain not in ("continuous", "integer", "binary"):
                self.diags.append(
                    Diagnostic(
                        dom_tok.line,
                        dom_tok.col,
                        f"unknown domain {domain!r}",
                        tuple(suggest_names(domain, ["continuous", "integer", "binary"])),
                    )
                )
                raise _Abort()
            lower, upper = 0.0, math.inf
            if self.at_kw("in"):
                self.advance()
                self.expect("op", "[")
                lower = self.parse_number()
                self.expect("op", ",")
                upper = self.parse_number()
                self.expect("op", "]")
            desc = self.parse_desc()
            ir.variables[name] = Variable(name, index_sets, domain, lower, upper, desc)
        self.expect("op", "}")

    def parse_constraints(self, ir: ModelIR) -> None:
        self.expect("op", "{", "to open constraints block")
        while not self.at("op", "}"):
            if self.at("eof"):
                self.error("unterminated constraints block")
            name_tok = self.cur
            name = self.expect("ident").text
            self.check_fresh(ir, name_tok, name)
            binders: list[tuple[str, str]] = []
            if self.at("op", "["):
                self.advance()
                while True:
                    ivar = self.expect("ident").text
                    self.expect("ident", "in")
                    sname = self.expect("ident").text
                    binders.append((ivar, sname))
                    if self.at("op", ","):
                        self.advance()
                        continue
                    break
                self.expect("op", "]")
            self.expect("op", ":")
            body = self.parse_expr()
            sense = self.parse_sense()
            rhs_value, rhs_param = self.parse_rhs()
            desc = self.parse_desc()
            ir.constraints[name] = Constraint(
                name, tuple(binders), body, sense, rhs_value, rhs_param, desc
            )
        self.expect("op", "}")

    def parse_objective(self, ir: ModelIR) -> None:
        self.expect("op", "{", "to open objective block")
        sense_tok = self.cur
        word = self.expect("ident").text
        if word not in ("minimize", "maximize"):
            self.diags.append(
                Diagnostic(
                    sense_tok.line,
                    sense_tok.col,
                    f"expected 'minimize' or 'maximize', got {word!r}",
                    tuple(suggest_names(word, ["minimize", "maximize"])),
                )
            )
            raise _Abort()
        self.expect("op", ":")
        body = self.parse_expr()
        desc = self.parse_desc()
        self.expect("op", "}", "to close objective block (unterminated block?)")
        ir.objective = Objective("min" if word == "minimize" else "max", body, desc)


# --------------------------------------------------------------------------
# Reference resolution: decide param-vs-var for each Ref and flag
# nonlinearities, since the grammar alone cannot tell them apart.

def _resolve_expr(
    ir: ModelIR, expr: LinExpr, diags: list[Diagnostic], where: str
) -> LinExpr:
    def fix_term(t: Term) -> Term:
        coef_param, var = t.coef_param, t.var
        refs = [r for r in (coef_param, var) if r is not None]
        if len(refs) == 2:
            kinds = [_ref_kind(ir, r) for r in refs]
            if kinds == ["var", "var"]:
                diags.append(
                    Diagnostic(
                        refs[0].line,
                        refs[0].col,
                        f"{where}: nonlinearity not supported (variable * variable)",
                    )
                )
                return t
            if kinds == ["param", "param"]:
                diags.append(
                    Diagnostic(
                        refs[0].line,
                        refs[0].col,
                        f"{where}: a coefficient is a single literal or parameter",
                    )
                )
                return t
            if kinds[0] == "var":  # normalize to param * var
                coef_param, var = refs[1], refs[0]
            else:
                coef_param, var = refs[0], refs[1]
            return Term(t.coef_value, coef_param, var)
        if var is not None and _ref_kind(ir, var) == "param":
            return Term(t.coef_value, var, None)
        return t

    def rec(items):
        out = []
        for it in items:
            if isinstance(it, Sum):
                out.append(Sum(it.index_var, it.set_name, tuple(rec(it.body)), it.sign))
            else:
                out.append(fix_term(it))
        return out

    return LinExpr(tuple(rec(expr.items)))


def _ref_kind(ir: ModelIR, ref: Ref) -> str:
    if ref.name in ir.variables:
        return "var"
    if ref.name in ir.parameters:
        return "param"
    return "unknown"


def parse_model(text: str) -> ParseResult:
    """Parse OMIF text; on failure, positioned diagnostics, never exceptions."""
    tokens, diags = tokenize(text)
    if diags:
        return ParseResult(None, diags)
    parser = _Parser(tokens, diags)
    try:
        ir = parser.parse_document()
    except _Abort:
        return ParseResult(None, diags)
    except RecursionError:
        diags.append(Diagnostic(0, 0, "input too deeply nested"))
        return ParseResult(None, diags)

    resolve_diags: list[Diagnostic] = []
    for con in list(ir.constraints.values()):
        fixed = _resolve_expr(ir, con.body, resolve_diags, con.name)
        ir.constraints[con.name] = Constraint(
            con.name, con.binders, fixed, con.sense, con.rhs_value, con.rhs_param, con.desc
        )
        if con.rhs_param is not None and _ref_kind(ir, con.rhs_param) == "var":
            resolve_diags.append(
                Diagnostic(
                    0,
                    0,
                    f"{con.name}: rhs must be a number or parameter, "
                    f"not the variable {con.rhs_param.name!r}",
                )
            )
    ir.objective = Objective(
        ir.objective.sense,
        _resolve_expr(ir, ir.objective.body, resolve_diags, "objective"),
        ir.objective.desc,
    )
    if resolve_diags:
        return ParseResult(None, diags + resolve_diags)
    return ParseResult(ir, diags)


# --------------------------------------------------------------------------
# Serialization (canonical form; parse(serialize(ir)) == ir structurally).

def _fmt_num(v: float) -> str:
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _fmt_label(s: str) -> str:
    if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", s):
        return s
    return f"'{s}'"


def _fmt_idx(idx: Idx) -> str:
    return f"'{idx.text}'" if idx.kind == "label" else idx.text


def _fmt_ref(ref: Ref) -> str:
    if not ref.indices:
        return ref.name
    return f"{ref.name}[{','.join(_fmt_idx(i) for i in ref.indices)}]"


def _fmt_term_body(t: Term) -> str:
    mag = abs(t.coef_value)
    parts = []
    if t.coef_param is None and t.var is None:
        return _fmt_num(t.coef_value if t.coef_value >= 0 else mag)
    if mag != 1.0 or (t.coef_param is None and t.var is None):
        parts.append(_fmt_num(mag))
    if t.coef_param is not None:
        parts.append(_fmt_ref(t.coef_param))
    if t.var is not None:
        parts.append(_fmt_ref(t.var))
    if not parts:
        parts.append("1")
    return "*".join(parts)


def _fmt_item(item, first: bool) -> str:
    if isinstance(item, Sum):
        sign = item.sign
        inner = item.body
        if len(inner) == 1:
            body = _fmt_item(inner[0], True)
        else:
            body = "(" + _fmt_expr(LinExpr(inner)) + ")"
        core = f"sum over {item.index_var} in {item.set_name}: {body}"
        if first:
            return core if sign >= 0 else f"- {core}"
        return ("+ " if sign >= 0 else "- ") + core
    neg = item.coef_value < 0
    body = _fmt_term_body(item)
    if first:
        return f"- {body}" if neg else body
    return ("- " if neg else "+ ") + body


def _fmt_expr(expr: LinExpr) -> str:
    parts = []
    for i, item in enumerate(expr.items):
        parts.append(_fmt_item(item, i == 0))
    return " ".join(parts) if parts else "0"


def _fmt_desc(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def serialize_model(ir: ModelIR) -> str:
    """Canonical OMIF rendering; declaration order preserved within blocks."""
    lines: list[str] = []
    lines.append("meta {")
    lines.append(f"  name: {_fmt_desc(ir.metadata.name)}")
    lines.append("}")
    lines.append("")
    lines.append("sets {")
    for s in ir.sets.values():
        members = ", ".join(_fmt_label(m) for m in s.members)
        lines.append(f"  {s.name}: [{members}] desc {_fmt_desc(s.desc)}")
    lines.append("}")
    lines.append("")
    lines.append("params {")
    for p in ir.parameters.values():
        head = p.name + (f"[{','.join(p.index_sets)}]" if p.index_sets else "")
        if p.is_scalar:
            lines.append(f"  {head}: {_fmt_num(p.values[()])} desc {_fmt_desc(p.desc)}")
        else:
            entries = []
            for key, v in p.values.items():
                k = (
                    _fmt_label(key[0])
                    if len(key) == 1
                    else "(" + ", ".join(_fmt_label(x) for x in key) + ")"
                )
                entries.append(f"{k}: {_fmt_num(v)}")
            lines.append(
                f"  {head}: {{ {', '.join(entries)} }} desc {_fmt_desc(p.desc)}"
            )
    lines.append("}")
    lines.append("")
    lines.append("vars {")
    for v in ir.variables.values():
        head = v.name + (f"[{','.join(v.index_sets)}]" if v.index_sets else "")
        bounds = ""
        if (v.lower, v.upper) != (0.0, math.inf):
            bounds = f" in [{_fmt_num(v.lower)}, {_fmt_num(v.upper)}]"
        lines.append(f"  {head}: {v.domain}{bounds} desc {_fmt_desc(v.desc)}")
    lines.append("}")
    lines.append("")
    lines.append("constraints {")
    for c in ir.constraints.values():
        head = c.name
        if c.binders:
            head += "[" + ", ".join(f"{iv} in {s}" for iv, s in c.binders) + "]"
        rhs = _fmt_ref(c.rhs_param) if c.rhs_param is not None else _fmt_num(c.rhs_value)
        lines.append(
            f"  {head}: {_fmt_expr(c.body)} {c.sense} {rhs} desc {_fmt_desc(c.desc)}"
        )
    lines.append("}")
    lines.append("")
    lines.append("objective {")
    word = "minimize" if ir.objective.sense == "min" else "maximize"
    lines.append(
        f"  {word}: {_fmt_expr(ir.objective.body)} desc {_fmt_desc(ir.objective.desc)}"
    )
    lines.append("}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Constraint DSL.

def parse_constraint_dsl(
    text: str, ir: ModelIR, provenance: str = "user"
) -> DslResult:
    """Parse one extra constraint (`expr sense rhs`) against an existing model.

    Index variables must be bound by `sum over` binders; quoted labels must be
    members of the corresponding sets. New variables cannot be introduced.
    """
    tokens, diags = tokenize(text)
    if diags:
        return DslResult(None, diags)
    parser = _Parser(tokens, diags)
    try:
        body = parser.parse_expr()
        sense = parser.parse_sense()
        rhs_value, rhs_param = parser.parse_rhs()
        if not parser.at("eof"):
            parser.error(f"unexpected trailing input {parser.cur.text!r}")
    except _Abort:
        return DslResult(None, diags)
    except RecursionError:
        diags.append(Diagnostic(0, 0, "input too deeply nested"))
        return DslResult(None, diags)

    resolve_diags: list[Diagnostic] = []
    body = _resolve_expr(ir, body, resolve_diags, "constraint")
    _check_dsl_refs(ir, body, resolve_diags)
    if rhs_param is not None:
        kind = _ref_kind(ir, rhs_param)
        if kind == "var":
            resolve_diags.append(
                Diagnostic(0, 0, f"rhs must be a number or parameter, not variable "
                                 f"{rhs_param.name!r}")
            )
        elif kind == "unknown":
            resolve_diags.append(
                Diagnostic(
                    0,
                    0,
                    f"unknown name {rhs_param.name!r}",
                    tuple(suggest_names(rhs_param.name, ir.component_names())),
                )
            )
    if resolve_diags:
        return DslResult(None, diags + resolve_diags)
    spec = ConstraintSpec(body, sense, rhs_value, rhs_param, provenance, text.strip())
    return DslResult(spec, [])


def _check_dsl_refs(ir: ModelIR, expr: LinExpr, diags: list[Diagnostic]) -> None:
    def check_ref(ref: Ref, declared: tuple[str, ...], bound: dict[str, str]):
        if len(ref.indices) != len(declared):
            diags.append(
                Diagnostic(
                    0,
                    0,
                    f"{ref.name!r} expects {len(declared)} indices, got {len(ref.indices)}",
                )
            )
            return
        for idx, sname in zip(ref.indices, declared):
            if idx.kind == "var":
                if idx.text not in bound:
                    diags.append(
                        Diagnostic(
                            0,
                            0,
                            f"unbound index variable {idx.text!r} "
                            "(bind it with `sum over` or use a quoted label)",
                        )
                    )
                elif bound[idx.text] != sname:
                    diags.append(
                        Diagnostic(
                            0,
                            0,
                            f"index variable {idx.text!r} ranges over {bound[idx.text]!r}, "
                            f"not {sname!r}",
                        )
                    )
            elif sname in ir.sets and idx.text not in ir.sets[sname].members:
                diags.append(
                    Diagnostic(
                        0,
                        0,
                        f"unknown index {idx.text!r} for set {sname!r}",
                        tuple(suggest_names(idx.text, ir.sets[sname].members)),
                    )
                )

    def rec(items, bound):
        for item in items:
            if isinstance(item, Sum):
                if item.set_name not in ir.sets:
                    diags.append(
                        Diagnostic(
                            0,
                            0,
                            f"unknown set {item.set_name!r}",
                            tuple(suggest_names(item.set_name, list(ir.sets))),
                        )
                    )
                    continue
                rec(item.body, {**bound, item.index_var: item.set_name})
                continue
            for ref, kinds in ((item.coef_param, ("param",)), (item.var, ("var",))):
                if ref is None:
                    continue
                actual = _ref_kind(ir, ref)
                if actual == "unknown":
                    diags.append(
                        Diagnostic(
                            0,
                            0,
                            f"unknown name {ref.name!r}",
                            tuple(suggest_names(ref.name, ir.component_names())),
                        )
                    )
                    continue
                declared = (
                    ir.variables[ref.name].index_sets
                    if actual == "var"
                    else ir.parameters[ref.name].index_sets
                )
                check_ref(ref, declared, bound)

    rec(expr.items, {})
