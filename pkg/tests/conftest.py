"""Shared fixtures: parsed sample applications and fixture file access."""

from __future__ import annotations

from pathlib import Path

import pytest

from ormlens.analysis import Analysis, analyze_source

FIXTURES = Path(__file__).parent / "fixtures"

_cache: dict[str, Analysis] = {}


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


def analyzed(name: str) -> Analysis:
    """Analyze a fixture once per session; graphs are read-only in tests."""
    if name not in _cache:
        _cache[name] = analyze_source(fixture_text(name))
    return _cache[name]


@pytest.fixture
def fix(request):
    return analyzed


@pytest.fixture(params=[f"fix{i}.rlite" for i in range(1, 8)])
def each_fixture(request) -> Analysis:
    return analyzed(request.param)
