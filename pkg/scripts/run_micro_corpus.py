#!/usr/bin/env python3
"""Run the full pipeline over a directory of RailLite files.

Prints one line per file (findings, query nodes, simulated cache and
prefetch fractions) and a corpus-mean block at the end. The defaults
point at the test fixture corpus, so this doubles as a quick end-to-end
sanity run after changes:

    python3 scripts/run_micro_corpus.py
    python3 scripts/run_micro_corpus.py --json --sessions 20
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from ormlens.analysis import analyze_source
from ormlens.detectors import run_detectors
from ormlens.report.aggregate import corpus_mean, summarize
from ormlens.sim import run_simulation


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fixtures", default="tests/fixtures",
                    help="directory of .rlite files")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sessions", type=int, default=10)
    ap.add_argument("--session-length", type=int, default=9)
    ap.add_argument("--rows-per-model", type=int, default=50)
    ap.add_argument("--json", action="store_true",
                    help="emit the whole corpus report as JSON")
    args = ap.parse_args()

    files = sorted(Path(args.fixtures).glob("*.rlite"))
    if not files:
        ap.error(f"no .rlite files under {args.fixtures}")

    summaries = []
    per_file = {}
    for f in files:
        an = analyze_source(f.read_text(encoding="utf-8"))
        findings = run_detectors(an)
        sim = run_simulation(an, seed=args.seed, sessions=args.sessions,
                             session_length=args.session_length,
                             rows_per_model=args.rows_per_model)
        summary = summarize(an, findings, sim)
        summaries.append(summary)
        per_file[f.name] = summary.to_dict()
        if not args.json:
            s = summary.simulation
            print(f"{f.name:28s} findings={sum(summary.finding_counts.values()):3d} "
                  f"queryNodes={summary.query_nodes:2d} "
                  f"cache={s.cache_hit_fraction:.3f} "
                  f"prefetch={s.prefetchable_fraction:.3f} "
                  f"sameTemplate={s.same_template_fraction:.3f}")

    corpus = corpus_mean(summaries)
    if args.json:
        print(json.dumps({"reportVersion": 1, "files": per_file,
                          "corpus": corpus}, indent=2))
    else:
        print("\ncorpus means over", corpus["files"], "files:")
        for k, v in corpus.items():
            if isinstance(v, float):
                print(f"  {k} {v:.3f}")
            elif isinstance(v, dict):
                inner = ", ".join(f"{ik}={iv:.3f}" if isinstance(iv, float)
                                  else f"{ik}={iv}" for ik, iv in v.items())
                print(f"  {k}: {inner}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
