"""Keep-alive decision policies.

A policy is a callable mapping a DecisionContext to one action from the
context's keep-alive candidate set. Baselines: fixed timeout, expected-
latency minimizer, carbon minimizer, a myopic weighted optimizer, a PSO
heuristic over the continuous timeout range, and a perfect-knowledge
oracle. Ties always break toward the smallest timeout.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import carbon
from .seeds import sub_seed


class PolicyError(ValueError):
    """Raised for invalid policy parameters or malformed contexts."""


@dataclass(frozen=True)
class DecisionContext:
    """Engine-supplied view at one decision point.

    p holds the estimated reuse probability per action (nondecreasing in
    the timeout). ci_now is the grid intensity at the decision point.
    next_reuse_gap_s is only populated for the oracle: seconds until the
    pod's next invocation, math.inf when the pod is never reused.
    """

    p: tuple
    cpu_cores: float
    mem_mb: float
    cold_ms: float
    ci_now: float
    lambda_carbon: float
    action_set_s: tuple
    profile: carbon.EnergyProfile
    sigma_l: float = 1.0
    sigma_c: float = 1.0
    next_reuse_gap_s: Optional[float] = None


@dataclass(frozen=True)
class CostPair:
    """The two cost terms of one candidate timeout: expected cold-start
    latency penalty (ms) and idle carbon over the full timeout (g)."""

    c_cold_ms: float
    c_carbon_g: float


def cost_pair(ctx: DecisionContext, k: float) -> CostPair:
    """Evaluate both cost terms for action k.

    The carbon term budgets idle energy for the whole timeout k; the
    latency term weights the cold penalty by the miss probability.
    """
    idx = _action_index(ctx, k)
    c_cold = (1.0 - ctx.p[idx]) * ctx.cold_ms
    e_idle = carbon.idle_energy(ctx.profile, ctx.mem_mb, ctx.cpu_cores, k)
    return CostPair(c_cold, carbon.to_carbon(e_idle, ctx.ci_now))


def weighted_cost(ctx: DecisionContext, k: float) -> float:
    """Unit-balanced mix of the two cost terms at the context's lambda."""
    pair = cost_pair(ctx, k)
    lam = ctx.lambda_carbon
    return (1.0 - lam) * ctx.sigma_l * pair.c_cold_ms + lam * ctx.sigma_c * pair.c_carbon_g


def fixed_policy(k0: float):
    """Always choose k0 (the platform-default static timeout)."""

    def policy(ctx: DecisionContext) -> float:
        if k0 not in ctx.action_set_s:
            raise PolicyError(f"fixed timeout {k0} not in action set {ctx.action_set_s}")
        return k0

    return policy


def latency_min(ctx: DecisionContext) -> float:
    """Minimize the expected cold-start penalty, ignoring carbon."""
    return _argmin(ctx.action_set_s, lambda k: cost_pair(ctx, k).c_cold_ms)


def carbon_min(ctx: DecisionContext) -> float:
    """Minimize idle carbon: always the shortest timeout."""
    return ctx.action_set_s[0]


def weighted_greedy(ctx: DecisionContext) -> float:
    """One-step myopic minimizer of the weighted cost mix."""
    return _argmin(ctx.action_set_s, lambda k: weighted_cost(ctx, k))


def oracle_policy(ctx: DecisionContext) -> float:
    """Perfect-knowledge decision: scores each timeout against the true
    next reuse gap instead of the estimated reuse probability."""
    gap = ctx.next_reuse_gap_s
    if gap is None:
        raise PolicyError("oracle requires next_reuse_gap_s in the context")
    lam = ctx.lambda_carbon

    def score(k: float) -> float:
        miss = gap > k
        cold_term = ctx.cold_ms if miss else 0.0
        e_idle = carbon.idle_energy(ctx.profile, ctx.mem_mb, ctx.cpu_cores, min(gap, k))
        carbon_term = carbon.to_carbon(e_idle, ctx.ci_now)
        return (1.0 - lam) * ctx.sigma_l * cold_term + lam * ctx.sigma_c * carbon_term

    return _argmin(ctx.action_set_s, score)


def pso_policy(ctx: DecisionContext, swarm: int = 16, iters: int = 50, seed: int = 0) -> float:
    """Global-best PSO over the continuous timeout interval.

    Reuse probability is interpolated piecewise-linearly between the
    action grid points; the converged position is snapped to the nearest
    discrete action. Deterministic given seed.
    """
    if swarm < 2:
        raise PolicyError(f"swarm must be >= 2, got {swarm}")
    if iters < 1:
        raise PolicyError(f"iters must be >= 1, got {iters}")
    rng = np.random.default_rng(seed)
    actions = np.asarray(ctx.action_set_s, dtype=float)
    p_grid = np.asarray(ctx.p, dtype=float)
    lo, hi = actions[0], actions[-1]
    lam = ctx.lambda_carbon
    idle_w = ctx.profile.idle_power_w(ctx.mem_mb, ctx.cpu_cores)

    def objective(k: np.ndarray) -> np.ndarray:
        p = np.interp(k, actions, p_grid)
        c_cold = (1.0 - p) * ctx.cold_ms
        c_carb = idle_w * k / carbon.JOULES_PER_KWH * ctx.ci_now
        return (1.0 - lam) * ctx.sigma_l * c_cold + lam * ctx.sigma_c * c_carb

    omega, c1, c2 = 0.7, 1.5, 1.5
    x = rng.uniform(lo, hi, size=swarm)
    # warm-start: cover the candidate grid so no basin starts empty
    n_seed = min(swarm, len(actions))
    x[:n_seed] = actions[:n_seed]
    v = rng.uniform(-(hi - lo), hi - lo, size=swarm) * 0.1
    pbest = x.copy()
    pbest_val = objective(x)
    g_idx = int(np.argmin(pbest_val))
    gbest, gbest_val = pbest[g_idx], pbest_val[g_idx]
    for _ in range(iters):
        r1 = rng.random(swarm)
        r2 = rng.random(swarm)
        v = omega * v + c1 * r1 * (pbest - x) + c2 * r2 * (gbest - x)
        x = np.clip(x + v, lo, hi)
        val = objective(x)
        improved = val < pbest_val
        pbest[improved] = x[improved]
        pbest_val[improved] = val[improved]
        g_idx = int(np.argmin(pbest_val))
        if pbest_val[g_idx] < gbest_val:
            gbest, gbest_val = pbest[g_idx], pbest_val[g_idx]
    # snap to nearest action, preferring the smaller one on ties
    dist = np.abs(actions - gbest)
    return float(actions[int(np.argmin(dist))])


def make_pso_policy(swarm: int = 16, iters: int = 50, seed: int = 0):
    """PSO baseline as a reusable decision function; each call draws a
    fresh deterministic sub-seed so runs reproduce bit-identically."""
    if swarm < 2:
        raise PolicyError(f"swarm must be >= 2, got {swarm}")
    if iters < 1:
        raise PolicyError(f"iters must be >= 1, got {iters}")
    counter = [0]

    def policy(ctx: DecisionContext) -> float:
        call_seed = sub_seed(seed, f"pso-call/{counter[0]}")
        counter[0] += 1
        return pso_policy(ctx, swarm=swarm, iters=iters, seed=call_seed)

    return policy


def unit_scales(invocations: Sequence, profile: carbon.EnergyProfile,
                timeline: carbon.CarbonTimeline, k_ref_s: float = 60.0):
    """Unit-balancing scales from training data.

    sigma_l is the reciprocal of the mean annotated cold latency (ms);
    sigma_c the reciprocal of the mean per-decision idle carbon budget
    at the reference timeout. Both fall back to 1.0 when degenerate so
    the weighted mix stays finite.
    """
    colds = [inv.cold_ms for inv in invocations if inv.cold_ms]
    sigma_l = 1.0 / statistics.mean(colds) if colds else 1.0
    budgets = []
    for inv in invocations:
        e = carbon.idle_energy(profile, inv.mem_mb, inv.cpu_cores, k_ref_s)
        budgets.append(carbon.to_carbon(e, timeline.ci_at(inv.ts_ms)))
    mean_budget = statistics.mean(budgets) if budgets else 0.0
    sigma_c = 1.0 / mean_budget if mean_budget > 0 else 1.0
    return sigma_l, sigma_c


def _action_index(ctx: DecisionContext, k: float) -> int:
    try:
        return ctx.action_set_s.index(k)
    except ValueError:
        raise PolicyError(f"action {k} not in action set {ctx.action_set_s}") from None


def _argmin(actions, score) -> float:
    best_k, best_v = actions[0], score(actions[0])
    for k in actions[1:]:
        v = score(k)
        if v < best_v:
            best_k, best_v = k, v
    return best_k
