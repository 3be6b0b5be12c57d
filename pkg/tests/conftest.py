from __future__ import annotations

from pathlib import Path

import pytest

from consert.dsl import load_document
from consert.fixtures import path as fixture_path
from consert.model import CompositionGraph

TIM = fixture_path("tim")
GOLDEN = Path(__file__).parent / "golden"

SYSTEM_FILES = {
    "Baler": "baler.consert",
    "Tractor": "tractor.consert",
    "Terminal": "terminal.consert",
    "SwathScanner": "swath_scanner.consert",
}

FULL_BINDINGS = {
    ("Baler", "tractor"): ("Tractor", "TractorCtrl"),
    ("Baler", "terminal"): ("Terminal", "VirtualTerminal"),
    ("Baler", "swath"): ("SwathScanner", "SwathSensing"),
    ("SwathScanner", "position"): ("Tractor", "Positioning"),
}

ROOT = ("Baler", "TIMBalingSwSc")


def tim_graph(systems=None, bindings=None):
    ids = systems or list(SYSTEM_FILES)
    manifests = [load_document(TIM / SYSTEM_FILES[s]) for s in ids]
    binds = FULL_BINDINGS if bindings is None else bindings
    binds = {k: v for k, v in binds.items() if k[0] in ids and v[0] in ids}
    return CompositionGraph.of(manifests, binds, ROOT if ROOT[0] in ids else None)


def all_rtes_true(graph):
    from consert.model import Tri

    return {(sid, r.label): Tri.TRUE for sid, m in graph.systems.items() for r in m.rtes}


@pytest.fixture(scope="session")
def tim_dir() -> Path:
    return TIM


@pytest.fixture(scope="session")
def catalog():
    return load_document(TIM / "tim.consert-catalog", expect="catalog")


@pytest.fixture(scope="session")
def manifests():
    return {sid: load_document(TIM / f, expect="manifest") for sid, f in SYSTEM_FILES.items()}


# --- acceptance reporting --------------------------------------------------

_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion(request):
    """Record a one-line verdict for an acceptance criterion."""
    marker = request.node.get_closest_marker("acceptance")
    label = marker.args[0] if marker else request.node.name
    state = {"detail": ""}
    yield state
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    _ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  {label}  {state['detail']}".rstrip())


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
