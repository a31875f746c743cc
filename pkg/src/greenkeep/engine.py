"""Trace-driven keep-alive simulation.

Replays a sorted invocation trace against a decision policy. For each
invocation the engine classifies warm/cold from the pod's expiry time,
charges idle energy for the elapsed keep-alive (capped at the previous
decision), charges cold-start and execution energy, then asks the
policy for the next timeout. The keep-alive countdown starts when the
invocation's execution window (arrival + exec) ends; initialization
latency is charged to latency and energy but does not extend the reuse
clock, which keeps every decision's realized cost a function of its own
timeout and the trace-given reuse gap. Whatever keep-alive the final
decision of each pod buys is charged in full at the end of the trace,
so long timeouts are never free.

A single run is single-threaded and deterministic; independent runs
never share state.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from . import carbon, metrics
from .carbon import CarbonBreakdown, CarbonTimeline, EnergyProfile
from .policies import DecisionContext
from .trace import Invocation

WARM = "warm"
COLD = "cold"


class EngineError(ValueError):
    """Raised for invalid simulator inputs or policy misbehavior."""


@dataclass(frozen=True)
class SimConfig:
    """Shared configuration of one simulation run."""

    action_set_s: tuple
    profile: EnergyProfile
    timeline: CarbonTimeline
    network_const_ms: float = 0.0
    lambda_carbon: float = 0.5
    window_w: int = 32
    seed: int = 0
    sigma_l: float = 1.0
    sigma_c: float = 1.0
    empty_history_prior: float = 0.5
    split_idle_spans: bool = False

    def __post_init__(self):
        if not self.action_set_s:
            raise EngineError("action_set_s must be nonempty")
        ks = tuple(float(k) for k in self.action_set_s)
        if any(k <= 0 for k in ks) or any(a >= b for a, b in zip(ks, ks[1:])):
            raise EngineError(f"action_set_s must be strictly increasing and > 0: {ks}")
        object.__setattr__(self, "action_set_s", ks)
        if not 0.0 <= self.lambda_carbon <= 1.0:
            raise EngineError(f"lambda_carbon must be in [0,1], got {self.lambda_carbon}")
        if self.network_const_ms < 0:
            raise EngineError("network_const_ms must be >= 0")
        if self.window_w < 1:
            raise EngineError("window_w must be >= 1")


@dataclass
class PodRuntimeState:
    """Mutable per-pod bookkeeping across a run."""

    pod_id: str
    function_id: str
    warm_until_ms: Optional[float] = None
    last_decision_s: Optional[float] = None
    last_completion_ms: Optional[float] = None
    idle_cpu_cores: float = 0.0
    idle_mem_mb: float = 0.0
    reuse_history: deque = field(default_factory=deque)

    @property
    def seen(self) -> bool:
        return self.last_completion_ms is not None


@dataclass(frozen=True)
class StepOutcome:
    """Accounting record for one invocation (or one residual keep-alive
    span flagged with residual=True)."""

    invocation: Invocation
    was_cold: bool
    e2e_latency_ms: float
    idle_s_charged: float
    exec_j: float
    idle_j: float
    cold_j: float
    carbon_g: CarbonBreakdown
    action_s: float
    residual: bool = False


@dataclass(frozen=True)
class DecisionResolution:
    """Delivered when a pending decision's outcome becomes known, at the
    pod's next arrival or at trace end (terminal)."""

    pod_id: str
    ctx: DecisionContext
    action_s: float
    realized_cold: bool
    realized_idle_s: float
    idle_carbon_g: float
    cold_ms_next: float
    next_ctx: Optional[DecisionContext]
    terminal: bool


def classify(pod: PodRuntimeState, arrival_ms: int) -> str:
    """Warm iff the arrival lands on or before the pod's expiry."""
    if pod.warm_until_ms is None or arrival_ms > pod.warm_until_ms:
        return COLD
    return WARM


def reuse_probabilities(pod: PodRuntimeState, action_set_s: Sequence[float],
                        empty_prior: float = 0.5) -> tuple:
    """Fraction of recent inter-reuse intervals at most k, per action.

    With no history yet, every action gets the configured prior.
    """
    history = pod.reuse_history
    if not history:
        return tuple(empty_prior for _ in action_set_s)
    n = len(history)
    return tuple(sum(1 for gap in history if gap <= k) / n for k in action_set_s)


def run(trace: Sequence[Invocation], policy: Callable[[DecisionContext], float],
        cfg: SimConfig,
        on_resolution: Optional[Callable[[DecisionResolution], None]] = None):
    """Simulate a policy over a sorted trace.

    Returns (SimReport, list[StepOutcome]). on_resolution, when given,
    receives a DecisionResolution for every decision as its realized
    cold/idle outcome settles; training loops hang off this hook.
    """
    outcomes, overlaps = run_outcomes(trace, policy, cfg, on_resolution)
    report = metrics.aggregate(
        outcomes, cfg,
        fingerprint=metrics.trace_fingerprint(trace),
        overlap_count=overlaps,
    )
    return report, outcomes


def run_outcomes(trace: Sequence[Invocation], policy, cfg: SimConfig,
                 on_resolution=None):
    """The simulation loop proper; returns (step outcomes, overlap count)."""
    _check_sorted(trace)
    next_arrival = _next_arrival_index(trace)
    pods: dict = {}
    pending: dict = {}
    outcomes = []
    overlaps = 0

    for i, inv in enumerate(trace):
        if inv.cold_ms is None or inv.cold_ms <= 0:
            raise EngineError(f"invocation at t={inv.ts_ms} lacks a cold-start annotation")
        pod = pods.get(inv.pod_id)
        if pod is None:
            pod = pods[inv.pod_id] = PodRuntimeState(
                inv.pod_id, inv.function_id,
                reuse_history=deque(maxlen=cfg.window_w),
            )

        was_cold = classify(pod, inv.ts_ms) == COLD

        # idle keep-alive charged since the previous completion, capped
        # at the previous decision; billed at the idle span's start CI
        idle_s = 0.0
        idle_j = 0.0
        idle_g = 0.0
        gap_s = None
        if pod.seen:
            gap_s = (inv.ts_ms - pod.last_completion_ms) / 1000.0
            if gap_s < 0:
                overlaps += 1  # arrival before previous completion; serialize
                gap_s = 0.0
            idle_s = min(gap_s, pod.last_decision_s)
            idle_j = carbon.idle_energy(cfg.profile, pod.idle_mem_mb, pod.idle_cpu_cores, idle_s)
            idle_g = cfg.timeline.span_carbon(
                idle_j, int(pod.last_completion_ms), idle_s, cfg.split_idle_spans)

        ci_arrival = cfg.timeline.ci_at(inv.ts_ms)
        cold_j = 0.0
        cold_g = 0.0
        cold_latency_ms = 0.0
        if was_cold:
            cold_latency_ms = inv.cold_ms
            cold_j = carbon.cold_energy(cfg.profile, inv.cpu_cores, inv.cold_ms / 1000.0)
            cold_g = carbon.to_carbon(cold_j, ci_arrival)

        # execution billed at the arrival's CI so the exec phase stays
        # identical across policies
        exec_j = carbon.exec_energy(cfg.profile, inv.mem_mb, inv.cpu_cores, inv.exec_ms / 1000.0)
        exec_g = carbon.to_carbon(exec_j, ci_arrival)

        completion_ms = inv.ts_ms + cold_latency_ms + inv.exec_ms

        # true gap to the pod's next arrival, for the oracle
        j = next_arrival[i]
        if j is None:
            true_gap_s = math.inf
        else:
            true_gap_s = max(0.0, (trace[j].ts_ms - completion_ms) / 1000.0)

        ctx = DecisionContext(
            p=reuse_probabilities(pod, cfg.action_set_s, cfg.empty_history_prior),
            cpu_cores=inv.cpu_cores,
            mem_mb=inv.mem_mb,
            cold_ms=inv.cold_ms,
            ci_now=cfg.timeline.ci_at(int(completion_ms)),
            lambda_carbon=cfg.lambda_carbon,
            action_set_s=cfg.action_set_s,
            profile=cfg.profile,
            sigma_l=cfg.sigma_l,
            sigma_c=cfg.sigma_c,
            next_reuse_gap_s=true_gap_s,
        )

        # the decision taken at the previous arrival of this pod has now
        # resolved: the pod either stayed warm long enough or expired
        if on_resolution is not None and inv.pod_id in pending:
            prev = pending.pop(inv.pod_id)
            on_resolution(DecisionResolution(
                pod_id=inv.pod_id,
                ctx=prev["ctx"],
                action_s=prev["action_s"],
                realized_cold=was_cold,
                realized_idle_s=idle_s,
                idle_carbon_g=idle_g,
                cold_ms_next=inv.cold_ms,
                next_ctx=ctx,
                terminal=False,
            ))

        action = float(policy(ctx))
        if action not in cfg.action_set_s:
            raise EngineError(
                f"policy returned {action}, not in action set {cfg.action_set_s}")

        pod.warm_until_ms = completion_ms + action * 1000.0
        pod.last_decision_s = action
        pod.last_completion_ms = completion_ms
        pod.idle_cpu_cores = inv.cpu_cores
        pod.idle_mem_mb = inv.mem_mb
        if gap_s is not None:
            pod.reuse_history.append(gap_s)
        if on_resolution is not None:
            pending[inv.pod_id] = {"ctx": ctx, "action_s": action}

        outcomes.append(StepOutcome(
            invocation=inv,
            was_cold=was_cold,
            e2e_latency_ms=cold_latency_ms + inv.exec_ms + cfg.network_const_ms,
            idle_s_charged=idle_s,
            exec_j=exec_j,
            idle_j=idle_j,
            cold_j=cold_j,
            carbon_g=CarbonBreakdown(exec_g=exec_g, idle_g=idle_g, cold_g=cold_g),
            action_s=action,
        ))

    # every pod's final keep-alive runs to expiry with nothing left to
    # reuse it: charge the full residual
    for pod_id in sorted(pods):
        pod = pods[pod_id]
        if not pod.seen:
            continue
        residual_s = pod.last_decision_s
        idle_j = carbon.idle_energy(cfg.profile, pod.idle_mem_mb, pod.idle_cpu_cores, residual_s)
        idle_g = cfg.timeline.span_carbon(
            idle_j, int(pod.last_completion_ms), residual_s, cfg.split_idle_spans)
        last_inv = next(o.invocation for o in reversed(outcomes)
                        if o.invocation.pod_id == pod_id and not o.residual)
        outcomes.append(StepOutcome(
            invocation=last_inv,
            was_cold=False,
            e2e_latency_ms=0.0,
            idle_s_charged=residual_s,
            exec_j=0.0,
            idle_j=idle_j,
            cold_j=0.0,
            carbon_g=CarbonBreakdown(idle_g=idle_g),
            action_s=pod.last_decision_s,
            residual=True,
        ))
        if on_resolution is not None and pod_id in pending:
            prev = pending.pop(pod_id)
            on_resolution(DecisionResolution(
                pod_id=pod_id,
                ctx=prev["ctx"],
                action_s=prev["action_s"],
                realized_cold=False,
                realized_idle_s=residual_s,
                idle_carbon_g=idle_g,
                cold_ms_next=last_inv.cold_ms,
                next_ctx=None,
                terminal=True,
            ))

    return outcomes, overlaps


def write_outcomes(outcomes: Sequence[StepOutcome], path) -> None:
    """Dump the per-step accounting stream as CSV (residual keep-alive
    rows carry was_cold=False and zero latency/exec columns)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow([
            "ts_ms", "function_id", "pod_id", "was_cold", "e2e_ms", "idle_s",
            "exec_j", "idle_j", "cold_j", "exec_g", "idle_g", "cold_g",
            "action_s", "residual",
        ])
        for o in outcomes:
            inv = o.invocation
            writer.writerow([
                inv.ts_ms, inv.function_id, inv.pod_id, int(o.was_cold),
                repr(o.e2e_latency_ms), repr(o.idle_s_charged),
                repr(o.exec_j), repr(o.idle_j), repr(o.cold_j),
                repr(o.carbon_g.exec_g), repr(o.carbon_g.idle_g), repr(o.carbon_g.cold_g),
                _fmt_action(o.action_s), int(o.residual),
            ])


def _fmt_action(k: float) -> str:
    return str(int(k)) if float(k).is_integer() else repr(k)


def _check_sorted(trace: Sequence[Invocation]) -> None:
    for a, b in zip(trace, trace[1:]):
        if b.ts_ms < a.ts_ms:
            raise EngineError(
                f"trace not sorted: t={b.ts_ms} after t={a.ts_ms}")


def _next_arrival_index(trace: Sequence[Invocation]):
    """For each invocation, the index of the same pod's next arrival."""
    nxt = [None] * len(trace)
    latest: dict = {}
    for i in range(len(trace) - 1, -1, -1):
        pod = trace[i].pod_id
        nxt[i] = latest.get(pod)
        latest[pod] = i
    return nxt
