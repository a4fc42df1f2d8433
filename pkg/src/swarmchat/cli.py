"""Command line entry points: serve, report, simulate, analyze."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from swarmchat.eventlog import canonical_json, read_log
from swarmchat.surveys import analyze_surveys, read_survey_csv, results_table, results_to_dict
from swarmchat.taxonomy import forensic_report, render_report_text


def _cmd_serve(args: argparse.Namespace) -> int:
    from swarmchat.netserver import serve

    config_defaults = {}
    facilitator_token = ""
    host = args.host
    if args.config:
        doc = json.loads(Path(args.config).read_text("utf-8"))
        facilitator_token = doc.pop("facilitator_token", "")
        host = doc.pop("host", host)
        config_defaults = doc.pop("session_defaults", {})
        if doc:
            print(f"ignoring unknown server config keys: {sorted(doc)}", file=sys.stderr)
    serve(
        args.port,
        host=host,
        data_dir=args.data_dir,
        facilitator_token=facilitator_token,
        config_defaults=config_defaults,
    )
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    events = read_log(args.log)
    report = forensic_report(events)
    out = Path(args.out)
    out.write_text(canonical_json(report) + "\n", encoding="utf-8")
    text = render_report_text(report)
    if args.text:
        Path(args.text).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    from swarmchat.simharness import load_scenario, run_scenario, coverage_summary

    scenario = load_scenario(args.scenario)
    result = run_scenario(scenario, args.seed, audit_starvation=args.audit)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "events.jsonl").write_bytes(result.log)
    metrics_doc = {
        "scenario": scenario.name,
        "seed": args.seed,
        "insights": result.insight_count,
        "coverage": coverage_summary(result),
        "propagation": result.propagation,
        "participation": result.participation,
        "starvation_violations": result.starvation_violations,
    }
    (out / "metrics.json").write_text(canonical_json(metrics_doc) + "\n", encoding="utf-8")
    (out / "report.json").write_text(canonical_json(result.report) + "\n", encoding="utf-8")
    (out / "report.txt").write_text(render_report_text(result.report), encoding="utf-8")
    print(
        f"scenario {scenario.name} seed {args.seed}: "
        f"{len(result.events)} events, {result.insight_count} insights, "
        f"outputs in {out}"
    )
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    with open(args.infile, "r", encoding="utf-8") as fp:
        responses = read_survey_csv(fp)
    results = analyze_surveys(
        responses,
        family_alpha=args.family_alpha,
        m=args.tests,
        one_sided=args.one_sided,
    )
    doc = {
        "n_responses": len(responses),
        "family_alpha": args.family_alpha,
        "tests": args.tests,
        "one_sided": args.one_sided,
        "results": results_to_dict(results),
    }
    Path(args.out).write_text(canonical_json(doc) + "\n", encoding="utf-8")
    sys.stdout.write(results_table(results, args.family_alpha))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmchat",
        description="Swarm-structured deliberation: live server, log forensics, "
        "simulation, and survey statistics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the live session server")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--config", help="server config JSON (session_defaults, facilitator_token, host)")
    p.add_argument("--data-dir", default="swarmchat_data", help="event log / report directory")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("report", help="forensic report from an event log")
    p.add_argument("--log", required=True, help="event log file (one record per line)")
    p.add_argument("--out", required=True, help="structured report output path (JSON)")
    p.add_argument("--text", help="also write the human-readable report here")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("simulate", help="run a scripted-bot session")
    p.add_argument("--scenario", required=True, help="scenario JSON path or shipped name")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--audit", action="store_true", help="verify the starvation bound every tick")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", help="survey statistics over a response CSV")
    p.add_argument("--in", dest="infile", required=True, help="survey CSV path")
    p.add_argument("--family-alpha", type=float, default=0.01)
    p.add_argument("--tests", type=int, default=7)
    p.add_argument("--one-sided", action="store_true")
    p.add_argument("--out", required=True, help="structured results output path (JSON)")
    p.set_defaults(func=_cmd_analyze)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
