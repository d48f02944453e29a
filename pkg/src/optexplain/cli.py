"""Command-line entry points: describe, solve, iis, restore, chat, eval, serve."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .agents import ChatPipeline, PipelineConfig, format_num, to_payload
from .explain import ExplainError, compute_iis, restore_feasibility
from .llm import LiveLmClient, StubLmClient
from .model import UnknownTargetError, instantiate, validate_model
from .omif import parse_model
from .solver import solve_instance


def _load_model(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(2)
    result = parse_model(text)
    if not result.ok:
        for diag in result.diagnostics:
            print(f"{path}:{diag.render()}", file=sys.stderr)
        raise SystemExit(2)
    report = validate_model(result.model)
    if not report.ok:
        for v in report.violations:
            print(f"{path}: {v.path}: {v.message}", file=sys.stderr)
        raise SystemExit(2)
    return result.model


def _make_lm(args):
    if getattr(args, "stub", None):
        return StubLmClient.from_path(args.stub)
    if getattr(args, "live", False):
        return LiveLmClient()
    return None


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        reminder=not getattr(args, "no_reminder", False),
        illustrator=not getattr(args, "no_illustrator", False),
        predefined=not getattr(args, "no_predefined", False),
    )


def _emit(args, structured_payload, text: str) -> None:
    if args.format == "structured":
        print(json.dumps(to_payload(structured_payload), sort_keys=True, indent=2))
    else:
        print(text)


def cmd_describe(args) -> int:
    ir = _load_model(args.model)
    pipeline = ChatPipeline(ir, lm=_make_lm(args), config=_pipeline_config(args))
    desc = pipeline.illustrate()
    text = desc.narrative
    if desc.troubleshooting:
        text += "\n\n" + desc.troubleshooting
    _emit(
        args,
        {
            "narrative": desc.narrative,
            "troubleshooting": desc.troubleshooting,
            "component_table": desc.component_table,
            "used_fallback": desc.used_fallback,
        },
        text,
    )
    return 0


def cmd_solve(args) -> int:
    ir = _load_model(args.model)
    res = solve_instance(instantiate(ir))
    lines = [f"status: {res.status}"]
    if res.objective is not None:
        lines.append(f"objective: {format_num(res.objective)}")
    if res.primal:
        lines.append("solution:")
        for cid, v in res.primal.items():
            lines.append(f"  {cid.label()} = {format_num(v)}")
    if res.duals:
        lines.append("duals:")
        for rid, v in res.duals.items():
            lines.append(f"  {rid.label()} = {format_num(v)}")
    if res.gap is not None:
        lines.append(f"gap: {res.gap:.2e}  nodes: {res.node_count}")
    _emit(args, res, "\n".join(lines))
    return 0 if res.status in ("optimal",) else 1


def cmd_iis(args) -> int:
    ir = _load_model(args.model)
    try:
        result = compute_iis(ir)
    except ExplainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    lines = ["irreducible infeasible subset:"]
    for m in result.members:
        lines.append(f"  {m.label}: {m.describe(ir)}")
    lines.append(f"oracle calls: {result.oracle_calls}")
    if result.indeterminate:
        lines.append("warning: some oracle calls were indeterminate; superset guarantee only")
    _emit(args, result, "\n".join(lines))
    return 0


def _parse_adjust(spec: str):
    if "[" in spec and spec.endswith("]"):
        name, rest = spec.split("[", 1)
        indices = tuple(s.strip().strip("'\"") for s in rest[:-1].split(","))
        return name.strip(), indices
    return spec.strip(), None


def cmd_restore(args) -> int:
    ir = _load_model(args.model)
    adjustables = [_parse_adjust(s) for s in (args.adjust or [])]
    weights = {}
    for w in args.weight or []:
        label, _, value = w.partition("=")
        weights[label] = float(value)
    try:
        plan = restore_feasibility(ir, adjustables or None, weights or None)
    except (ExplainError, UnknownTargetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    lines = [f"total weighted adjustment: {format_num(plan.total_penalty)}"]
    for a in plan.adjustments:
        lines.append(
            f"  {a.param.label()}: {a.direction} by {format_num(a.magnitude)} "
            f"(weight {format_num(a.weight)}; rows: {', '.join(a.rows)})"
        )
    for r in plan.rejected:
        lines.append(f"  rejected {r.label} ({r.reason}): {r.warning}")
    lines.append(f"restored model certified feasible: {plan.certified}")
    _emit(args, plan, "\n".join(lines))
    return 0


def cmd_chat(args) -> int:
    ir = _load_model(args.model)
    pipeline = ChatPipeline(ir, lm=_make_lm(args), config=_pipeline_config(args))
    desc = pipeline.illustrate()
    interactive = sys.stdin.isatty()
    if interactive:
        print(desc.narrative)
        if desc.troubleshooting:
            print()
            print(desc.troubleshooting)
        print("\nAsk about the model (ctrl-d to exit).")
    for line in sys.stdin:
        query = line.strip()
        if not query:
            continue
        turn = pipeline.run_turn(query)
        if args.format == "structured":
            print(
                json.dumps(
                    {"query": query, "answer": turn.answer, "trace": turn.trace.to_json()},
                    sort_keys=True,
                )
            )
        else:
            print(turn.answer)
            if args.show_trace:
                for hop in turn.trace.hops:
                    fn = f" {hop.function}" if hop.function else ""
                    print(f"  [{hop.agent}/{hop.mode}{fn}] {hop.note}", file=sys.stderr)
        if interactive:
            print()
    return 0


def cmd_eval(args) -> int:
    from .harness import render_report, report_digest, run_eval, verify_gold

    if args.verify_gold:
        failures = verify_gold(args.dataset)
        if failures:
            for f in failures:
                print(f"{f['item_id']}: {f['reason']}", file=sys.stderr)
            return 1
        print("all gold facts reproduced by direct oracle calls")
        return 0

    report = run_eval(
        args.dataset,
        lm_mode="live" if args.live else "stub",
        stub_root=args.stub,
        config=_pipeline_config(args),
        workers=args.workers,
    )
    if args.format == "structured":
        print(json.dumps(report, sort_keys=True, indent=2))
        print(f"digest: {report_digest(report)}", file=sys.stderr)
    else:
        print(render_report(report))
    ok = report["overall"]["accuracy"] == 100.0 and not report["incomplete"]
    return 0 if ok or args.live else 1


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.from_env()
    if args.data_dir:
        config.data_dir = args.data_dir
    if args.stub:
        config.lm_mode = "stub"
        config.stub_path = args.stub
    elif args.live:
        config.lm_mode = "live"
    app = create_app(config)
    host, _, port = args.listen.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080), log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optexplain",
        description="Interactive explanations for LP/MILP optimization models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, model=True):
        if model:
            p.add_argument("model", help="path to an .omif model document")
        p.add_argument("--format", choices=["text", "structured"], default="text")

    def add_lm(p):
        p.add_argument("--stub", help="scripted stub transcript (.stub)")
        p.add_argument("--live", action="store_true", help="use the live LM backend")
        p.add_argument("--no-reminder", action="store_true")
        p.add_argument("--no-illustrator", action="store_true")
        p.add_argument("--no-predefined", action="store_true")

    p = sub.add_parser("describe", help="print the model illustration")
    add_common(p)
    add_lm(p)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("solve", help="solve and print the result")
    add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("iis", help="isolate an irreducible infeasible subset")
    add_common(p)
    p.set_defaults(func=cmd_iis)

    p = sub.add_parser("restore", help="minimal rhs adjustments restoring feasibility")
    add_common(p)
    p.add_argument(
        "--adjust",
        action="append",
        metavar="PARAM[i,...]",
        help="adjustable parameter (repeatable); omit for the IIS-derived default",
    )
    p.add_argument("--weight", action="append", metavar="LABEL=W", help="per-parameter weight")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("chat", help="interactive or piped chat session")
    add_common(p)
    add_lm(p)
    p.add_argument("--show-trace", action="store_true")
    p.set_defaults(func=cmd_chat)

    p = sub.add_parser("eval", help="run the gold-query evaluation harness")
    p.add_argument("dataset", help="dataset directory (models/, queries/, stubs/)")
    p.add_argument("--format", choices=["text", "structured"], default="text")
    p.add_argument("--stub", help="stub root (dir of per-item .stub files or one file)")
    p.add_argument("--live", action="store_true")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--verify-gold", action="store_true", help="re-derive every gold fact")
    p.add_argument("--no-reminder", action="store_true")
    p.add_argument("--no-illustrator", action="store_true")
    p.add_argument("--no-predefined", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument(
        "--listen",
        default=os.environ.get("OPTEXPLAIN_LISTEN", "127.0.0.1:8080"),
    )
    p.add_argument("--data-dir")
    p.add_argument("--stub")
    p.add_argument("--live", action="store_true")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
