"""Reporting: summaries, output formats, and the command line front end."""

from __future__ import annotations

from .aggregate import (REPORT_VERSION, AppSummary, SimSummary, corpus_mean,
                        summarize, summarize_simulation)
from .emit import (FORMATS, findings_payload, render, render_csv,
                   render_json, render_text)

__all__ = [
    "AppSummary", "FORMATS", "REPORT_VERSION", "SimSummary", "corpus_mean",
    "findings_payload", "render", "render_csv", "render_json", "render_text",
    "summarize", "summarize_simulation",
]
