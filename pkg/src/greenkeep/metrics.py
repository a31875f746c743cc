"""Aggregation of simulation outcomes into evaluation metrics.

Produces the per-run report (cold starts, latency, phase carbon, the
latency-carbon product and idle-reuse-inefficiency composites), the
normalized tradeoff comparison across policies, the lambda sensitivity
series, and the per-hour decision/intensity profile. All functions are
pure over their inputs.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, replace
from typing import Dict, Sequence

from .carbon import MS_PER_HOUR, CarbonTimeline
from .seeds import stable_hash64

CONSERVATION_REL_TOL = 1e-9


class MetricsError(ValueError):
    """Raised for empty inputs or cross-trace comparison mistakes."""


@dataclass(frozen=True)
class SimReport:
    """Aggregate result of one simulated run."""

    cold_start_count: int
    mean_e2e_latency_s: float
    keep_alive_carbon_g: float
    cold_carbon_g: float
    exec_carbon_g: float
    total_carbon_g: float
    lcp: float
    iri: float
    n_invocations: int
    decision_histogram: Dict[float, int]
    hourly_series: tuple
    config: dict
    fingerprint: int = 0
    overlap_count: int = 0

    def to_dict(self) -> dict:
        return {
            "cold_start_count": self.cold_start_count,
            "mean_e2e_latency_s": self.mean_e2e_latency_s,
            "keep_alive_carbon_g": self.keep_alive_carbon_g,
            "cold_carbon_g": self.cold_carbon_g,
            "exec_carbon_g": self.exec_carbon_g,
            "total_carbon_g": self.total_carbon_g,
            "lcp": self.lcp,
            "iri": self.iri,
            "n_invocations": self.n_invocations,
            "decision_histogram": {str(k): v for k, v in sorted(self.decision_histogram.items())},
            "hourly_series": [list(row) for row in self.hourly_series],
            "config": self.config,
            "fingerprint": self.fingerprint,
            "overlap_count": self.overlap_count,
        }


def trace_fingerprint(trace) -> int:
    """64-bit digest of the trace's identifying fields, independent of
    in-memory order."""
    rows = sorted(
        f"{i.ts_ms},{i.function_id},{i.pod_id},{i.cpu_cores!r},{i.mem_mb!r},{i.exec_ms}"
        for i in trace
    )
    return stable_hash64("\n".join(rows))


def aggregate(outcomes, cfg, fingerprint: int = 0, overlap_count: int = 0) -> SimReport:
    """Fold a StepOutcome sequence into a SimReport.

    Latency and cold-start statistics cover invocation outcomes only;
    carbon sums include the residual keep-alive records.
    """
    if not outcomes:
        raise MetricsError("cannot aggregate an empty outcome sequence")
    exec_g = idle_g = cold_g = 0.0
    stepwise_total = 0.0
    latency_ms_sum = 0.0
    cold_count = 0
    n_inv = 0
    histogram: Dict[float, int] = {}
    buckets: Dict[int, list] = {}
    for o in outcomes:
        exec_g += o.carbon_g.exec_g
        idle_g += o.carbon_g.idle_g
        cold_g += o.carbon_g.cold_g
        stepwise_total += o.carbon_g.total_g
        hour = (o.invocation.ts_ms // MS_PER_HOUR) * MS_PER_HOUR
        bucket = buckets.setdefault(hour, [0.0, 0])
        bucket[0] += o.carbon_g.total_g
        if not o.residual:
            n_inv += 1
            latency_ms_sum += o.e2e_latency_ms
            cold_count += int(o.was_cold)
            histogram[o.action_s] = histogram.get(o.action_s, 0) + 1
            bucket[1] += 1
    if n_inv == 0:
        raise MetricsError("outcome sequence holds no invocation records")
    total_g = exec_g + idle_g + cold_g
    if abs(total_g - stepwise_total) > CONSERVATION_REL_TOL * max(abs(total_g), 1.0):
        raise MetricsError(
            f"carbon accounting leak: components {total_g} vs stepwise {stepwise_total}")
    mean_latency_s = latency_ms_sum / n_inv / 1000.0
    report = SimReport(
        cold_start_count=cold_count,
        mean_e2e_latency_s=mean_latency_s,
        keep_alive_carbon_g=idle_g,
        cold_carbon_g=cold_g,
        exec_carbon_g=exec_g,
        total_carbon_g=total_g,
        lcp=mean_latency_s * total_g,
        iri=cold_count * idle_g,
        n_invocations=n_inv,
        decision_histogram=histogram,
        hourly_series=tuple((h, round(v[0], 12), v[1]) for h, v in sorted(buckets.items())),
        config=_config_echo(cfg),
        fingerprint=fingerprint,
        overlap_count=overlap_count,
    )
    return report


def _config_echo(cfg) -> dict:
    return {
        "action_set_s": list(cfg.action_set_s),
        "lambda_carbon": cfg.lambda_carbon,
        "sigma_l": cfg.sigma_l,
        "sigma_c": cfg.sigma_c,
        "seed": cfg.seed,
        "network_const_ms": cfg.network_const_ms,
        "window_w": cfg.window_w,
        "profile": cfg.profile.name,
        "empty_history_prior": cfg.empty_history_prior,
        "split_idle_spans": cfg.split_idle_spans,
    }


def compare(reports: Dict[str, SimReport]):
    """Normalized tradeoff coordinates across runs of one trace.

    x: cold-start increase (%) over the fewest-cold-starts report;
    y: keep-alive carbon increase (%) over the least-carbon report.
    Rows are ranked by distance to the (0, 0) ideal corner.
    """
    if not reports:
        raise MetricsError("no reports to compare")
    fingerprints = {r.fingerprint for r in reports.values()}
    if len(fingerprints) > 1:
        raise MetricsError(
            f"reports stem from different traces (fingerprints {sorted(fingerprints)})")
    min_cold = min(r.cold_start_count for r in reports.values())
    min_carbon = min(r.keep_alive_carbon_g for r in reports.values())
    rows = []
    for name, r in sorted(reports.items()):
        dcold = _pct_increase(r.cold_start_count, min_cold)
        dcarbon = _pct_increase(r.keep_alive_carbon_g, min_carbon)
        rows.append({
            "policy": name,
            "cold_start_count": r.cold_start_count,
            "keep_alive_carbon_g": r.keep_alive_carbon_g,
            "mean_e2e_latency_s": r.mean_e2e_latency_s,
            "total_carbon_g": r.total_carbon_g,
            "lcp": r.lcp,
            "iri": r.iri,
            "dcold_pct": dcold,
            "dcarbon_pct": dcarbon,
            "distance": (dcold ** 2 + dcarbon ** 2) ** 0.5,
        })
    rows.sort(key=lambda row: row["distance"])
    for rank, row in enumerate(rows, start=1):
        row["rank"] = rank
    return rows


def _pct_increase(value: float, baseline: float) -> float:
    if baseline == 0:
        return 0.0 if value == 0 else float("inf")
    return (value - baseline) / baseline * 100.0


def realized_weighted_cost(outcomes, cfg) -> float:
    """Total realized cost of a run under the configured lambda mix.

    Sums every suffered cold-start latency (scaled by sigma_l) and all
    idle carbon including residual keep-alive (scaled by sigma_c). The
    unavoidable first cold start of each pod is included; it is
    identical across policies on the same trace.
    """
    lam = cfg.lambda_carbon
    cost = 0.0
    for o in outcomes:
        if not o.residual and o.was_cold:
            cost += (1.0 - lam) * cfg.sigma_l * o.invocation.cold_ms
        cost += lam * cfg.sigma_c * o.carbon_g.idle_g
    return cost


def sensitivity_sweep(policies_by_lambda: Dict[float, object], trace, cfg):
    """Evaluate one policy per lambda on a fixed trace.

    Returns rows (lambda_carbon, cold_start_count, keep_alive_carbon_g)
    sorted by lambda; duplicate lambda values are dropped with a warning.
    """
    from . import engine  # local import: engine depends on this module

    seen = set()
    rows = []
    for lam in sorted(policies_by_lambda):
        if lam in seen:
            continue
        seen.add(lam)
        policy = policies_by_lambda[lam]
        run_cfg = replace(cfg, lambda_carbon=lam)
        report, _ = engine.run(trace, policy, run_cfg)
        rows.append((lam, report.cold_start_count, report.keep_alive_carbon_g))
    return rows


def dedupe_lambda_grid(grid: Sequence[float]):
    """Sorted unique lambda grid; warns when duplicates are dropped."""
    unique = sorted(set(grid))
    if len(unique) != len(grid):
        warnings.warn("duplicate lambda values in grid were deduplicated")
    return unique


def decision_intensity_profile(outcomes, timeline: CarbonTimeline):
    """Per-hour selection frequency of each action, paired with the
    hour's carbon intensity."""
    buckets: Dict[int, Dict[float, int]] = {}
    for o in outcomes:
        if o.residual:
            continue
        hour = (o.invocation.ts_ms // MS_PER_HOUR) * MS_PER_HOUR
        counts = buckets.setdefault(hour, {})
        counts[o.action_s] = counts.get(o.action_s, 0) + 1
    rows = []
    for hour in sorted(buckets):
        counts = buckets[hour]
        total = sum(counts.values())
        ci = timeline.ci_at(max(hour, timeline.start_ms))
        rows.append({
            "hour_start_ms": hour,
            "ci_g_per_kwh": ci,
            "fractions": {k: c / total for k, c in sorted(counts.items())},
            "decisions": total,
        })
    return rows


def write_report_json(report: SimReport, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def write_comparison_csv(rows, path) -> None:
    fields = ["rank", "policy", "cold_start_count", "keep_alive_carbon_g",
              "mean_e2e_latency_s", "total_carbon_g", "lcp", "iri",
              "dcold_pct", "dcarbon_pct", "distance"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in fields})


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["lambda_carbon", "cold_start_count", "keep_alive_carbon_g"])
        writer.writerows(rows)


def write_decision_profile_csv(rows, actions, path) -> None:
    header = ["hour_start_ms", "ci_g_per_kwh", "decisions"] + [
        f"frac_k{_fmt_action(k)}" for k in actions
    ]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [row["hour_start_ms"], row["ci_g_per_kwh"], row["decisions"]]
                + [row["fractions"].get(k, 0.0) for k in actions]
            )


def _fmt_action(k: float) -> str:
    return str(int(k)) if float(k).is_integer() else str(k)
