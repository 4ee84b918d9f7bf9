"""Run-trace metrics: completion, coverage, load balance, utilization, parsing.

All metrics are pure functions of the trace. Definitions used here:

* CR  - completed tasks / injected tasks (1.0 when nothing was injected).
* CE  - task weight serviced / task weight injected, so partially serviced
        tasks earn partial credit.
* TLB - population standard deviation of per-UAV completed-task credits;
        every UAV within the service radius at the completing tick shares
        credit.
* UUR - mean over steps of the fraction of UAVs engaged or servicing.
* TPA - fraction of parsed instructions matching gold on position bucket,
        type, and weight tier.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .tasks import TaskSet

# Gold-corpus matching granularity.
POSITION_BUCKET = 10.0
WEIGHT_TIERS = ((2.0, "low"), (4.0, "normal"), (math.inf, "high"))


@dataclass(frozen=True)
class UavRecord:
    id: str
    x: float
    y: float
    vx: float
    vy: float
    status: str
    capability: float


@dataclass
class RunTrace:
    """Per-step status records plus task lifecycle events for one run."""

    strategy: str
    seed: int
    uav_ids: tuple[str, ...]
    steps: int = 0
    records: list = field(default_factory=list)  # [(step, (UavRecord, ...)), ...]
    injected: list = field(default_factory=list)  # [(step, task_id, weight), ...]
    completed: list = field(default_factory=list)  # [(step, task_id, credited), ...]
    final_tasks: TaskSet = field(default_factory=TaskSet)

    def validate(self) -> None:
        for seq in (self.injected, self.completed):
            steps = [s for s, *_ in seq]
            if steps != sorted(steps):
                raise ValueError("trace events are not time-ordered")
        injected_ids = {tid for _, tid, _ in self.injected}
        for _, tid, _ in self.completed:
            if tid not in injected_ids:
                raise ValueError(f"completed task {tid!r} has no injection event")


@dataclass(frozen=True)
class MetricsReport:
    cr: float
    ce: float
    tlb: float
    uur: float
    tpa: float | None = None
    per_uav_task_counts: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        for name in ("cr", "ce", "uur"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} out of [0, 1]: {v}")
        if self.tpa is not None and not 0.0 <= self.tpa <= 1.0:
            raise ValueError(f"tpa out of [0, 1]: {self.tpa}")
        if self.tlb < 0:
            raise ValueError(f"tlb must be >= 0: {self.tlb}")

    def to_dict(self) -> dict:
        return {
            "cr": self.cr,
            "ce": self.ce,
            "tlb": self.tlb,
            "uur": self.uur,
            "tpa": self.tpa,
            "per_uav_task_counts": list(self.per_uav_task_counts),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


CSV_HEADER = "run_id,strategy,seed,cr,ce,tlb,uur,tpa"


def csv_row(run_id: str, strategy: str, seed: int, report: MetricsReport) -> str:
    tpa = "" if report.tpa is None else repr(report.tpa)
    return (
        f"{run_id},{strategy},{seed},{report.cr!r},{report.ce!r},"
        f"{report.tlb!r},{report.uur!r},{tpa}"
    )


def completion_rate(trace: RunTrace) -> float:
    if not trace.injected:
        return 1.0
    return len(trace.completed) / len(trace.injected)


def coverage_efficiency(trace: RunTrace) -> float:
    total_injected = sum(w for _, _, w in trace.injected)
    if total_injected <= 0:
        return 1.0
    remaining = sum(t.weight for t in trace.final_tasks)
    serviced = total_injected - remaining
    return min(1.0, max(0.0, serviced / total_injected))


def per_uav_credits(trace: RunTrace) -> dict[str, int]:
    counts = {uid: 0 for uid in trace.uav_ids}
    for _, _, credited in trace.completed:
        for uid in credited:
            if uid in counts:
                counts[uid] += 1
    return counts


def task_load_balance(trace: RunTrace) -> float:
    if not trace.uav_ids:
        raise ValueError("task_load_balance needs at least one UAV")
    counts = np.array(list(per_uav_credits(trace).values()), dtype=float)
    return float(np.std(counts))


def uav_utilization(trace: RunTrace) -> float:
    if not trace.records:
        raise ValueError("uav_utilization needs a non-empty trace")
    fracs = []
    for _, recs in trace.records:
        if not recs:
            fracs.append(0.0)
            continue
        busy = sum(1 for r in recs if r.status in ("engaged", "servicing"))
        fracs.append(busy / len(recs))
    return float(np.mean(fracs))


def weight_tier(w: float) -> str:
    for bound, name in WEIGHT_TIERS:
        if w <= bound:
            return name
    return WEIGHT_TIERS[-1][1]


def position_bucket(x: float, y: float) -> tuple[int, int]:
    return (int(math.floor(x / POSITION_BUCKET)), int(math.floor(y / POSITION_BUCKET)))


def tuple_key(draft: dict) -> tuple:
    """Comparison key for gold/parsed task tuples."""
    return (
        position_bucket(float(draft["x"]), float(draft["y"])),
        draft["type"],
        weight_tier(float(draft["w"])),
    )


def parsing_accuracy(corpus_results: list[tuple[dict, dict | None]]) -> float:
    """Fraction of instances whose parse matches gold on (position bucket,
    type, weight tier); parse failures count as misses."""
    if not corpus_results:
        raise ValueError("parsing_accuracy needs a non-empty corpus")
    hits = 0
    for gold, parsed in corpus_results:
        if parsed is None:
            continue
        if tuple_key(gold) == tuple_key(parsed):
            hits += 1
    return hits / len(corpus_results)


def compute_metrics(trace: RunTrace, tpa: float | None = None) -> MetricsReport:
    trace.validate()
    counts = per_uav_credits(trace)
    return MetricsReport(
        cr=completion_rate(trace),
        ce=coverage_efficiency(trace),
        tlb=task_load_balance(trace),
        uur=uav_utilization(trace),
        tpa=tpa,
        per_uav_task_counts=tuple(counts[uid] for uid in trace.uav_ids),
    )
