from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from binview.ingest import merge_artifact, parse_static_export, parse_trace_log
from binview.pe_inspect import detect_bitness
from binview.views import build_views

FIXTURES = Path(__file__).parent / "fixtures"
NAMES = ("alpha", "beta", "gamma")


def load_bundle(name: str):
    identity = detect_bitness((FIXTURES / f"{name}.exe").read_bytes(), name)
    static = parse_static_export(FIXTURES / f"{name}.static.json")
    trace = parse_trace_log(FIXTURES / f"{name}.trace.jsonl", identity.bitness)
    return merge_artifact(identity, static, trace)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def bundles():
    return {name: load_bundle(name) for name in NAMES}


@pytest.fixture(scope="session")
def views(bundles):
    return {name: build_views(b) for name, b in bundles.items()}
