"""Workload simulation: synthetic data, sessions, and dynamic statistics.

`run_simulation` is the front door: it populates a store from the app's
schema, replays a batch of user sessions against private copies of it,
and reduces the logs to cache and prefetch statistics. Everything is a
pure function of (application, seed, knobs).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Optional

from ..analysis import Analysis
from ..detectors.classify import ONLY_CONSTANT, classify_column_sources
from .datagen import Domains, Store, generate_data
from .engine import QueryResult, execute_query
from .rng import Rng, fnv1a64
from .session import (ChainMarker, Executor, QueryLogEntry, RowHandle,
                      RowsHandle, SessionLog, StepRecord, Transition,
                      run_session)
from .stats import CacheStats, PrefetchStats, cache_stats, prefetch_stats

__all__ = [
    "CacheStats", "ChainMarker", "Domains", "Executor", "PrefetchStats",
    "QueryLogEntry", "QueryResult", "RowHandle", "RowsHandle", "Rng",
    "SessionLog", "SimReport", "StepRecord", "Store", "Transition",
    "cache_stats", "constant_domains", "execute_query", "fnv1a64",
    "generate_data", "prefetch_stats", "run_session", "run_simulation",
]


def constant_domains(an: Analysis) -> Domains:
    """Closed value sets for columns the app only writes constants to."""
    out: Domains = {}
    for c in classify_column_sources(an):
        if c.classification == ONLY_CONSTANT and c.domain:
            out[(c.model, c.column)] = list(c.domain)
    return out


@dataclass
class SimReport:
    seed: int
    rows_per_model: int
    sessions: list[SessionLog]
    cache: list[CacheStats]
    prefetch: list[PrefetchStats]

    @property
    def mean_cache_hit_fraction(self) -> float:
        vals = [c.hit_fraction for c in self.cache if c.total]
        return sum(vals) / len(vals) if vals else 0.0

    @property
    def mean_prefetchable_fraction(self) -> float:
        vals = [p.prefetchable_fraction for p in self.prefetch if p.total]
        return sum(vals) / len(vals) if vals else 0.0

    @property
    def mean_same_template_fraction(self) -> float:
        vals = [p.same_template_fraction for p in self.prefetch if p.total]
        return sum(vals) / len(vals) if vals else 0.0

    def total_queries(self) -> int:
        return sum(c.total for c in self.cache)


def run_simulation(an: Analysis, seed: int = 0, sessions: int = 50,
                   session_length: int = 9, rows_per_model: int = 50,
                   domains: Optional[Domains] = None) -> SimReport:
    """Replay `sessions` independent user sessions and collect statistics.

    Each session runs against its own deep copy of the generated store,
    so sessions never observe each other's writes and any session can be
    re-run in isolation from the same seed.
    """
    if domains is None:
        domains = constant_domains(an)
    base = generate_data(an.ir, seed, rows_per_model, domains)
    root = Rng(seed)
    logs: list[SessionLog] = []
    for i in range(sessions):
        store = copy.deepcopy(base)
        logs.append(run_session(an, store, root.derive(f"session:{i}"),
                                session_length))
    return SimReport(seed, rows_per_model, logs,
                     [cache_stats(s) for s in logs],
                     [prefetch_stats(s) for s in logs])
