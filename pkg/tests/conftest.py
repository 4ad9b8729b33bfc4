from __future__ import annotations

import itertools
import json
from pathlib import Path

import pytest

ACCEPTANCE_RESULTS: list[tuple[str, str, str]] = []


def record_acceptance(criterion: str, status: str, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((criterion, status, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for criterion, status, detail in ACCEPTANCE_RESULTS:
        line = f"[{status}] {criterion}"
        if detail:
            line += f" — {detail}"
        terminalreporter.write_line(line)

from agentgov import (
    IntentDescriptor,
    LiveContext,
    RuntimeContext,
    TraceLog,
    load_ruleset,
)

REPO_ROOT = Path(__file__).resolve().parents[1]
RULES_PATH = REPO_ROOT / "rules" / "flowr.json"
CONTEXT_PATH = REPO_ROOT / "context" / "flowr.json"
SCENARIOS_DIR = REPO_ROOT / "scenarios"
PROMPTS_DIR = REPO_ROOT / "prompts"


@pytest.fixture(scope="session")
def flowr_doc():
    return load_ruleset(RULES_PATH.read_bytes())


@pytest.fixture()
def flowr_live_context():
    seed = json.loads(CONTEXT_PATH.read_text())
    return LiveContext(signals=seed["signals"], registries=seed["registries"])


@pytest.fixture()
def flowr_ctx(flowr_live_context) -> RuntimeContext:
    return flowr_live_context.snapshot()


@pytest.fixture()
def disruption_ctx(flowr_live_context) -> RuntimeContext:
    flowr_live_context.set_signal("supplier_disruption", True, actor="test")
    return flowr_live_context.snapshot()


@pytest.fixture()
def mem_log():
    return TraceLog(path=None)


def make_service_config(tmp_path, **overrides):
    from agentgov.config import ServiceConfig

    base = dict(
        rules_path=str(RULES_PATH),
        context_path=str(CONTEXT_PATH),
        prompts_dir=str(PROMPTS_DIR),
        log_path=str(tmp_path / "traces.log"),
    )
    base.update(overrides)
    return ServiceConfig(**base)


@pytest.fixture()
def flowr_service(tmp_path):
    from agentgov.service import GovernanceService

    return GovernanceService.from_config(make_service_config(tmp_path))


class FakeClock:
    """Deterministic nanosecond clock: starts at a base and steps fixed."""

    def __init__(self, start_ns: int = 1_700_000_000_000_000_000, step_ns: int = 1_000_000):
        self._counter = itertools.count()
        self._start = start_ns
        self._step = step_ns

    def __call__(self) -> int:
        return self._start + next(self._counter) * self._step


@pytest.fixture()
def fake_clock():
    return FakeClock()


def make_intent(**overrides) -> IntentDescriptor:
    base = dict(
        intent_id="it-0001",
        agent_id="demand_forecasting",
        workflow_id="flowr",
        action_class="sales_data.read",
        description="Retrieve daily sales data for store 214",
        parameters={"store_id": "214"},
        irreversible=False,
        alternatives=(),
    )
    base.update(overrides)
    return IntentDescriptor(**base)


def s2_intent(**overrides) -> IntentDescriptor:
    base = dict(
        intent_id="it-s2",
        agent_id="procurement",
        workflow_id="flowr",
        action_class="purchase_order.submit",
        description="Submit a purchase order of $45,000 to verified supplier SUP-ALPHA",
        parameters={"amount_usd": 45000, "supplier_id": "SUP-ALPHA", "order_id": "PO-1"},
        irreversible=True,
    )
    base.update(overrides)
    return IntentDescriptor(**base)


def s3_intent(**overrides) -> IntentDescriptor:
    base = dict(
        intent_id="it-s3",
        agent_id="supplier_coordination",
        workflow_id="flowr",
        action_class="supplier.contact",
        description="Contact supplier SUP-OMEGA about lead times",
        parameters={"supplier_id": "SUP-OMEGA", "topic": "lead_times"},
        irreversible=False,
        alternatives=({"supplier_id": "SUP-BETA", "topic": "lead_times"},),
    )
    base.update(overrides)
    return IntentDescriptor(**base)


def s4_intent(**overrides) -> IntentDescriptor:
    base = dict(
        intent_id="it-s4",
        agent_id="inventory_replenishment",
        workflow_id="flowr",
        action_class="supplier.substitute",
        description="Substitute disrupted supplier SUP-ALPHA with verified supplier SUP-BETA",
        parameters={"supplier_id": "SUP-BETA", "disrupted_supplier_id": "SUP-ALPHA"},
        irreversible=False,
    )
    base.update(overrides)
    return IntentDescriptor(**base)
