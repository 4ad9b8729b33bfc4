"""Scenario runner: scripted stub agents driving the governed workflow.

Replays the four supply-chain scenarios (plus any custom specs) against a
service, with each repetition rephrasing the intent description and
shuffling parameter order — variation that must never change the outcome
under the deterministic backend. Produces the four evaluation metrics:
decision accuracy, escalation precision, trace completeness, and latency
overhead decomposed into engine time vs deliberation time.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .deliberation import Deliberator
from .intents import IntentDescriptor, Outcome
from .service import GovernanceService

# constructed variation set (the source scenarios' phrasings are not
# published); outcomes must be invariant under all of these
PHRASING_TEMPLATES = (
    "{d}",
    "Please {d_lower}",
    "{d}, as part of the current task",
    "Action requested: {d_lower}",
    "Next step: {d_lower}",
    "{d} now",
    "I intend to {d_lower}",
    "Proposed action - {d_lower}",
    "{d} for this workflow run",
    "Task: {d_lower}",
)

_OUTCOME_TOKENS = {"PROCEED", "ESCALATE", "SELF_CORRECT_THEN_PROCEED"}


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    title: str
    agent_id: str
    workflow_id: str
    signals: dict[str, Any]
    intent: dict[str, Any]
    expected_outcome: str
    expected_citations: tuple[str, ...]
    expected_rounds: int | None = None
    expected_rules_retrieved: tuple[str, ...] | None = None
    repetitions: int = 10

    def __post_init__(self) -> None:
        if self.expected_outcome not in _OUTCOME_TOKENS:
            raise ValueError(f"unknown expected outcome: {self.expected_outcome}")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        expected = data.get("expected", {})
        return cls(
            id=str(data["id"]),
            title=str(data.get("title", data["id"])),
            agent_id=str(data["agent_id"]),
            workflow_id=str(data["workflow_id"]),
            signals=dict(data.get("signals", {})),
            intent=dict(data["intent"]),
            expected_outcome=str(expected["outcome"]),
            expected_citations=tuple(expected.get("citations", [])),
            expected_rounds=expected.get("rounds"),
            expected_rules_retrieved=
                tuple(expected["rules_retrieved"]) if "rules_retrieved" in expected else None,
            repetitions=int(data.get("repetitions", 10)),
        )


def load_scenarios(directory: str | Path) -> list[ScenarioSpec]:
    specs = []
    for path in sorted(Path(directory).glob("*.json")):
        specs.append(ScenarioSpec.from_dict(json.loads(path.read_text(encoding="utf-8"))))
    return specs


def vary_intent(spec: ScenarioSpec, repetition: int, rng: random.Random) -> dict:
    """One phrasing/ordering variant of the scenario's intent."""
    body = dict(spec.intent)
    description = str(body.get("description", ""))
    template = PHRASING_TEMPLATES[repetition % len(PHRASING_TEMPLATES)]
    body["description"] = template.format(
        d=description, d_lower=description[:1].lower() + description[1:]
    )
    params = dict(body.get("parameters", {}))
    keys = list(params)
    rng.shuffle(keys)
    body["parameters"] = {k: params[k] for k in keys}
    body["intent_id"] = f"{spec.id.lower()}-rep{repetition:02d}"
    body["agent_id"] = spec.agent_id
    body["workflow_id"] = spec.workflow_id
    return body


class TimingDeliberator:
    """Wraps a backend and accumulates per-call wall time, so engine
    overhead (total minus deliberation) can be measured non-invasively."""

    def __init__(self, inner: Deliberator, clock: Callable[[], int] = time.perf_counter_ns) -> None:
        self._inner = inner
        self._clock = clock
        self.name = inner.name
        self.prompt_version = inner.prompt_version
        self.total_ns = 0
        self.calls = 0

    def deliberate(self, intent, rules, ctx):
        started = self._clock()
        try:
            return self._inner.deliberate(intent, rules, ctx)
        finally:
            self.total_ns += self._clock() - started
            self.calls += 1

    def take(self) -> int:
        spent = self.total_ns
        self.total_ns = 0
        return spent


@dataclass
class RunResult:
    scenario_id: str
    repetition: int
    outcome: str
    rounds: int
    citations: tuple[str, ...]
    correct: bool
    mismatch: str = ""
    total_ns: int = 0
    deliberation_ns: int = 0
    bypass_ns: int = 0

    @property
    def overhead_ns(self) -> int:
        return max(self.total_ns - self.deliberation_ns, 0)


@dataclass
class ScenarioReport:
    id: str
    title: str
    expected_outcome: str
    runs: int
    correct: int
    escalations: int
    true_escalations: int
    mean_total_ms: float
    mean_deliberation_ms: float
    mean_overhead_ms: float
    mean_bypass_ms: float
    mismatches: list[str] = field(default_factory=list)


@dataclass
class MetricsReport:
    scenarios: list[ScenarioReport]
    total_runs: int
    total_correct: int
    escalations: int
    true_escalations: int
    trace_completeness: float
    mean_overhead_ms: float
    mean_deliberation_ms: float
    mean_total_ms: float
    mean_bypass_ms: float
    backend: str

    @property
    def accuracy(self) -> str:
        return f"{self.total_correct}/{self.total_runs}"

    @property
    def escalation_precision(self) -> str:
        return f"{self.true_escalations}/{self.escalations}"

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "accuracy": self.accuracy,
            "escalation_precision": self.escalation_precision,
            "trace_completeness": self.trace_completeness,
            "mean_overhead_ms": self.mean_overhead_ms,
            "mean_deliberation_ms": self.mean_deliberation_ms,
            "mean_total_ms": self.mean_total_ms,
            "mean_bypass_ms": self.mean_bypass_ms,
            "scenarios": [
                {
                    "id": s.id,
                    "title": s.title,
                    "expected_outcome": s.expected_outcome,
                    "correct": f"{s.correct}/{s.runs}",
                    "escalation_precision": f"{s.true_escalations}/{s.escalations}" if s.escalations else "N/A",
                    "mean_total_ms": s.mean_total_ms,
                    "mean_deliberation_ms": s.mean_deliberation_ms,
                    "mean_overhead_ms": s.mean_overhead_ms,
                    "mean_bypass_ms": s.mean_bypass_ms,
                    "mismatches": s.mismatches,
                }
                for s in self.scenarios
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False)

    def to_table(self) -> str:
        lines = [
            f"{'Scenario':<28} {'Correct':>8} {'Esc.prec':>9} {'Overhead':>10} {'Delib':>9} {'Total':>9}",
            "-" * 78,
        ]
        for s in self.scenarios:
            precision = f"{s.true_escalations}/{s.escalations}" if s.escalations else "N/A"
            lines.append(
                f"{s.id + ' - ' + s.title:<28.28} {s.correct}/{s.runs:>4} {precision:>9}"
                f" {s.mean_overhead_ms:>8.2f}ms {s.mean_deliberation_ms:>7.2f}ms {s.mean_total_ms:>7.2f}ms"
            )
        lines.append("-" * 78)
        lines.append(
            f"{'Overall':<28} {self.accuracy:>8} {self.escalation_precision:>9}"
            f" {self.mean_overhead_ms:>8.2f}ms {self.mean_deliberation_ms:>7.2f}ms {self.mean_total_ms:>7.2f}ms"
        )
        lines.append(f"Trace completeness: {self.trace_completeness:.0%}")
        return "\n".join(lines)


def _final_outcome_token(decision_outcome: Outcome, rounds: int) -> str:
    if decision_outcome is Outcome.PROCEED and rounds > 1:
        return "SELF_CORRECT_THEN_PROCEED"
    return decision_outcome.value


def run_scenario_once(
    service: GovernanceService,
    spec: ScenarioSpec,
    repetition: int,
    rng: random.Random,
    backend: str | None = None,
    clock: Callable[[], int] = time.perf_counter_ns,
) -> RunResult:
    """One governed run of the scripted intent, with timing decomposition."""
    intent_body = vary_intent(spec, repetition, rng)
    intent = IntentDescriptor.from_dict(intent_body)
    doc = service.store.active()
    ctx = service.context.snapshot()
    inner = service.deliberators[backend or service.default_backend]

    # bypass baseline: the bare deliberation with no retrieval/routing/logging
    from .rules import applicable_rules

    bypass_started = clock()
    try:
        inner.deliberate(intent, applicable_rules(doc, intent.agent_id, intent.workflow_id, ctx), ctx)
    except Exception:
        pass
    bypass_ns = clock() - bypass_started

    timed = TimingDeliberator(inner, clock=clock)
    started = clock()
    decision, _trace = service.engine.evaluate(intent, ctx, doc, timed)
    total_ns = clock() - started

    outcome = _final_outcome_token(decision.outcome, decision.deliberation_rounds)
    citations = decision.rules_cited
    mismatch = ""
    correct = True
    if outcome != spec.expected_outcome:
        correct = False
        mismatch = f"outcome {outcome} != expected {spec.expected_outcome}"
    elif tuple(sorted(citations)) != tuple(sorted(spec.expected_citations)):
        correct = False
        mismatch = f"citations {sorted(citations)} != expected {sorted(spec.expected_citations)}"
    elif spec.expected_rounds is not None and decision.deliberation_rounds != spec.expected_rounds:
        correct = False
        mismatch = f"rounds {decision.deliberation_rounds} != expected {spec.expected_rounds}"

    return RunResult(
        scenario_id=spec.id,
        repetition=repetition,
        outcome=outcome,
        rounds=decision.deliberation_rounds,
        citations=citations,
        correct=correct,
        mismatch=mismatch,
        total_ns=total_ns,
        deliberation_ns=timed.total_ns,
        bypass_ns=bypass_ns,
    )


def run_scenarios(
    specs: list[ScenarioSpec],
    service: GovernanceService,
    backend: str | None = None,
    repetitions: int | None = None,
    seed: int = 20260809,
    clock: Callable[[], int] = time.perf_counter_ns,
    parallel: int = 0,
) -> MetricsReport:
    """Scenario suite; failures are data, not exceptions.

    Sequential by default for stable latency numbers; ``parallel`` > 1
    fans each scenario's repetitions across that many threads (throughput
    testing — timing decomposition still holds per run, means get noisier).
    Scenario signal setup is applied through the operator surface before
    each scenario's runs and restored afterwards (for signals present in
    the seed context), so situational rules see exactly the declared
    context.
    """
    rng = random.Random(seed)
    reports: list[ScenarioReport] = []
    all_results: list[RunResult] = []

    for spec in specs:
        baseline = {
            key: service.context.state()["signals"].get(key) for key in spec.signals
        }
        for key, value in spec.signals.items():
            service.set_signal(key, value, actor="harness")
        runs = repetitions if repetitions is not None else spec.repetitions
        if parallel > 1:
            from concurrent.futures import ThreadPoolExecutor

            seeds = [random.Random(rng.getrandbits(64)) for _ in range(runs)]
            with ThreadPoolExecutor(max_workers=parallel) as pool:
                results = list(
                    pool.map(
                        lambda args: run_scenario_once(
                            service, spec, args[0], args[1], backend=backend, clock=clock
                        ),
                        list(enumerate(seeds)),
                    )
                )
        else:
            results = [
                run_scenario_once(service, spec, repetition, rng, backend=backend, clock=clock)
                for repetition in range(runs)
            ]
        for key, value in baseline.items():
            if value is None:
                continue
            service.set_signal(key, value, actor="harness")

        escalations = sum(1 for r in results if r.outcome == "ESCALATE")
        true_escalations = sum(
            1 for r in results if r.outcome == "ESCALATE" and spec.expected_outcome == "ESCALATE"
        )
        n = max(len(results), 1)
        reports.append(
            ScenarioReport(
                id=spec.id,
                title=spec.title,
                expected_outcome=spec.expected_outcome,
                runs=len(results),
                correct=sum(1 for r in results if r.correct),
                escalations=escalations,
                true_escalations=true_escalations,
                mean_total_ms=sum(r.total_ns for r in results) / n / 1e6,
                mean_deliberation_ms=sum(r.deliberation_ns for r in results) / n / 1e6,
                mean_overhead_ms=sum(r.overhead_ns for r in results) / n / 1e6,
                mean_bypass_ms=sum(r.bypass_ns for r in results) / n / 1e6,
                mismatches=[f"rep {r.repetition}: {r.mismatch}" for r in results if not r.correct],
            )
        )
        all_results.extend(results)

    good, total_records = service.log.completeness()
    n = max(len(all_results), 1)
    return MetricsReport(
        scenarios=reports,
        total_runs=len(all_results),
        total_correct=sum(1 for r in all_results if r.correct),
        escalations=sum(r.escalations for r in reports),
        true_escalations=sum(r.true_escalations for r in reports),
        trace_completeness=(good / total_records) if total_records else 1.0,
        mean_overhead_ms=sum(r.overhead_ns for r in all_results) / n / 1e6,
        mean_deliberation_ms=sum(r.deliberation_ns for r in all_results) / n / 1e6,
        mean_total_ms=sum(r.total_ns for r in all_results) / n / 1e6,
        mean_bypass_ms=sum(r.bypass_ns for r in all_results) / n / 1e6,
        backend=backend or service.default_backend,
    )
