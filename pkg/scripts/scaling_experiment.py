#!/usr/bin/env python3
"""Measure how analysis and simulation cost scale with store size.

Static analysis never touches generated data, so its output and runtime
should be flat across row counts while simulation work grows with the
rows each query has to scan. The script analyzes one application once,
checks the findings are identical at every size, and times a fixed
session batch at each row count:

    python3 scripts/scaling_experiment.py app.rlite --rows 100 1000
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from ormlens.analysis import analyze_source
from ormlens.detectors import run_detectors
from ormlens.sim import run_simulation


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("app", help="RailLite source file")
    ap.add_argument("--rows", type=int, nargs="+", default=[100, 1000])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sessions", type=int, default=20)
    ap.add_argument("--session-length", type=int, default=9)
    args = ap.parse_args()

    text = Path(args.app).read_text(encoding="utf-8")

    t0 = time.perf_counter()
    an = analyze_source(text)
    findings = run_detectors(an)
    static_s = time.perf_counter() - t0
    print(f"static analysis: {len(findings)} findings in {static_s * 1000:.1f} ms")

    baseline = [f.to_dict() for f in findings]
    for rows in args.rows:
        again = [f.to_dict() for f in run_detectors(analyze_source(text))]
        if again != baseline:
            raise SystemExit("findings changed between runs; analysis is "
                             "not independent of configuration")
        t0 = time.perf_counter()
        rep = run_simulation(an, seed=args.seed, sessions=args.sessions,
                             session_length=args.session_length,
                             rows_per_model=rows)
        sim_s = time.perf_counter() - t0
        print(f"rows={rows:6d}  queries={rep.total_queries():5d}  "
              f"cache={rep.mean_cache_hit_fraction:.3f}  "
              f"sim time={sim_s:.2f} s")
    print("static findings identical at every size")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
