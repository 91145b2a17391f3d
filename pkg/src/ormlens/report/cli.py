"""Command line interface.

Three subcommands share one input convention (a RailLite source file;
`report` also accepts a directory of .rlite files) and one output
convention (--out writes to a file, otherwise stdout).

Exit codes: 0 on success, 1 when the input fails to parse, validate, or
build, 2 for command line usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

from ..afg.dot import graph_to_dot
from ..analysis import Analysis, analyze_source
from ..detectors import run_detectors
from ..detectors.findings import ALL_KINDS
from ..errors import OrmLensError
from ..rewrite.sql import emit_sql
from ..sim import run_simulation
from .aggregate import corpus_mean, summarize, summarize_simulation
from .emit import FORMATS, render, render_json

_SIM_DEFAULTS = {"seed": 0, "sessions": 50, "session_length": 9,
                 "rows_per_model": 50}


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ormlens",
        description="Static performance analysis and workload simulation "
                    "for RailLite applications.")
    sub = p.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="run the static detectors")
    pa.add_argument("path", help="RailLite source file")
    pa.add_argument("--format", choices=FORMATS, default="text")
    pa.add_argument("--out", help="write output to this file")
    pa.add_argument("--detectors",
                    help="comma-separated detector kinds (default: all)")
    pa.add_argument("--sql-only", action="store_true",
                    help="print one canonical SQL statement per query node "
                         "and nothing else")
    pa.add_argument("--dot", metavar="PATH",
                    help="also write the action flow graphs as Graphviz dot")

    ps = sub.add_parser("simulate", help="replay synthetic user sessions")
    ps.add_argument("path")
    ps.add_argument("--format", choices=("json", "text"), default="text")
    ps.add_argument("--out")
    _sim_knobs(ps)

    pr = sub.add_parser("report",
                        help="full report: findings, summary, simulation")
    pr.add_argument("path", help="source file, or a directory of .rlite files")
    pr.add_argument("--format", choices=("json", "text"), default="text")
    pr.add_argument("--out")
    pr.add_argument("--no-sim", action="store_true",
                    help="skip the simulation section")
    _sim_knobs(pr)
    return p


def _sim_knobs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=_SIM_DEFAULTS["seed"])
    p.add_argument("--sessions", type=int, default=_SIM_DEFAULTS["sessions"])
    p.add_argument("--session-length", type=int,
                   default=_SIM_DEFAULTS["session_length"])
    p.add_argument("--rows-per-model", type=int,
                   default=_SIM_DEFAULTS["rows_per_model"])


def _load(path: str) -> Analysis:
    return analyze_source(Path(path).read_text(encoding="utf-8"))


def _write(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _selected_kinds(arg: Optional[str]) -> Optional[list[str]]:
    if not arg:
        return None
    kinds = [k.strip() for k in arg.split(",") if k.strip()]
    for k in kinds:
        if k not in ALL_KINDS:
            raise OrmLensError(f"unknown detector {k!r}; expected one of "
                               + ", ".join(ALL_KINDS))
    return kinds


def _cmd_analyze(args: argparse.Namespace) -> int:
    an = _load(args.path)
    if args.dot:
        Path(args.dot).write_text(graph_to_dot(an.graph), encoding="utf-8")
    if args.sql_only:
        lines = []
        for key in sorted(an.afgs):
            for q in an.afgs[key].query_nodes():
                sql = emit_sql(q.payload.descriptor, an.ir)
                lines.append(f"{key}:{q.loc.line}:{q.loc.col} {sql}")
        _write("\n".join(lines) + "\n" if lines else "", args.out)
        return 0
    findings = run_detectors(an, _selected_kinds(args.detectors))
    summary = summarize(an, findings) if args.format != "csv" else None
    _write(render(args.format, findings, summary), args.out)
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    an = _load(args.path)
    rep = run_simulation(an, seed=args.seed, sessions=args.sessions,
                         session_length=args.session_length,
                         rows_per_model=args.rows_per_model)
    sim = summarize_simulation(rep)
    if args.format == "json":
        _write(render_json({"reportVersion": 1,
                            "simulation": sim.to_dict()}), args.out)
        return 0
    d = sim.to_dict()
    lines = ["== simulation =="]
    for k in ("seed", "sessions", "rowsPerModel", "totalQueries"):
        lines.append(f"  {k} {d[k]}")
    for k in ("cacheHitFraction", "syntacticEquivFraction",
              "equivDifferingFraction", "prefetchableFraction",
              "sameTemplateFraction"):
        lines.append(f"  {k} {d[k]:.3f}")
    _write("\n".join(lines) + "\n", args.out)
    return 0


def _report_one(path: Path, args: argparse.Namespace):
    an = analyze_source(path.read_text(encoding="utf-8"))
    findings = run_detectors(an)
    sim = None
    if not args.no_sim:
        sim = run_simulation(an, seed=args.seed, sessions=args.sessions,
                             session_length=args.session_length,
                             rows_per_model=args.rows_per_model)
    return findings, summarize(an, findings, sim)


def _cmd_report(args: argparse.Namespace) -> int:
    root = Path(args.path)
    if root.is_dir():
        files = sorted(root.glob("*.rlite"))
        if not files:
            raise OrmLensError(f"no .rlite files under {root}")
        summaries = {}
        parsed = []
        for f in files:
            _, summary = _report_one(f, args)
            summaries[f.name] = summary.to_dict()
            parsed.append(summary)
        payload = {"reportVersion": 1, "files": summaries,
                   "corpus": corpus_mean(parsed)}
        if args.format == "json":
            _write(render_json(payload), args.out)
        else:
            lines = [f"== corpus ({len(files)} files) =="]
            for k, v in payload["corpus"].items():
                if isinstance(v, float):
                    lines.append(f"  {k} {v:.3f}")
                elif not isinstance(v, dict):
                    lines.append(f"  {k} {v}")
            _write("\n".join(lines) + "\n", args.out)
        return 0
    findings, summary = _report_one(root, args)
    if args.format == "json":
        payload = {"reportVersion": 1,
                   "findings": [f.to_dict() for f in findings],
                   "summary": summary.to_dict()}
        _write(render_json(payload), args.out)
    else:
        _write(render("text", findings, summary), args.out)
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_report(args)
    except OrmLensError as exc:
        print(f"ormlens: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"ormlens: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
