"""Command-line frontend for reproducible simulation runs.

Commands: gen-trace, simulate, train, compare, sweep, oracle-gap.
Runs are configured by a YAML file with trace/carbon/sim/policy/train/
output sections; command-line flags override file values and every run
writes its fully resolved configuration beside its outputs. All
randomness derives from one root seed, fanned out by labeled sub-seeds.

Exit codes: 0 success, 1 usage error, 2 data error, 3 divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from . import agent, carbon, engine, metrics, policies, trace
from .seeds import sub_seed

POLICY_NAMES = ("fixed", "latency_min", "carbon_min", "weighted_greedy",
                "pso", "oracle", "rl")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


ALLOWED_KEYS = {
    "trace": {"path", "cold_log", "default_cold_ms", "synthetic", "split", "use"},
    "trace.synthetic": {"model", "rate_hz", "burst_rate_hz", "lull_rate_hz",
                        "period_s", "interval_s", "functions", "pods_per_function",
                        "duration_s", "cold_latency_range_ms", "cpu_range",
                        "mem_range_mb", "exec_range_ms"},
    "carbon": {"timeline", "constant_ci", "alternating", "profile"},
    "carbon.alternating": {"low", "high", "hours"},
    "carbon.profile": {"j_cpu_core_w", "j_dram_mb_w", "lambda_idle", "p_cold_w_per_core"},
    "sim": {"action_set_s", "network_const_ms", "lambda_carbon", "window_w",
            "seed", "sigma", "empty_history_prior", "split_idle_spans"},
    "sim.sigma": {"sigma_l", "sigma_c"},
    "policy": {"name", "k", "swarm", "iters", "model"},
    "train": {"episodes", "capacity", "batch", "lr", "gamma", "eps_start",
              "eps_decay", "eps_min", "target_sync_interval", "hidden",
              "lambda_set", "reward_mode"},
    "output": {"dir", "verbosity", "outcomes"},
}


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            cfg = yaml.safe_load(f)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise UsageError(f"{path}: invalid YAML ({exc})")
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: config must be a mapping of sections")
    _reject_unknown(cfg, "", set(ALLOWED_KEYS) - {k for k in ALLOWED_KEYS if "." in k})
    for section, keys in ALLOWED_KEYS.items():
        node = cfg
        ok = True
        for part in section.split("."):
            node = node.get(part) if isinstance(node, dict) else None
            if node is None:
                ok = False
                break
        if ok and isinstance(node, dict):
            _reject_unknown(node, section, keys)
    return cfg


def _reject_unknown(mapping: dict, section: str, allowed: set) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        where = f"section [{section}]" if section else "top level"
        raise UsageError(f"unknown config keys at {where}: {sorted(unknown)}")


def build_synthetic_spec(section: dict, seed: int) -> trace.SyntheticSpec:
    model_name = section.get("model")
    if model_name == "poisson":
        model = trace.Poisson(rate_hz=float(section["rate_hz"]))
    elif model_name == "bimodal":
        model = trace.Bimodal(
            burst_rate_hz=float(section["burst_rate_hz"]),
            lull_rate_hz=float(section["lull_rate_hz"]),
            period_s=float(section["period_s"]),
        )
    elif model_name == "deterministic":
        model = trace.Deterministic(interval_s=float(section["interval_s"]))
    else:
        raise UsageError(f"unknown arrival model {model_name!r}")
    kwargs = {}
    for key, field_name in [
        ("cold_latency_range_ms", "cold_latency_range_ms"),
        ("cpu_range", "cpu_range"),
        ("mem_range_mb", "mem_range_mb"),
        ("exec_range_ms", "exec_range_ms"),
    ]:
        if key in section:
            kwargs[field_name] = tuple(section[key])
    return trace.SyntheticSpec(
        n_functions=int(section.get("functions", 1)),
        n_pods_per_function=int(section.get("pods_per_function", 1)),
        duration_s=int(section["duration_s"]),
        arrival_model=model,
        seed=seed,
        **kwargs,
    )


def build_trace(cfg: dict, root_seed: int):
    """Load or synthesize the invocation sequence and its cold table."""
    section = cfg.get("trace", {})
    if "synthetic" in section:
        spec = build_synthetic_spec(section["synthetic"], sub_seed(root_seed, "trace"))
        table = trace.synthetic_cold_table(spec)
        return trace.generate_trace(spec), table
    if "path" not in section:
        raise UsageError("config needs trace.path or trace.synthetic")
    table = trace.build_cold_table(
        [], section.get("cold_log"),
        default_cold_ms=float(section.get("default_cold_ms", 1000.0)),
    )
    return trace.load_trace(section["path"], table), table


def build_timeline(cfg: dict) -> carbon.CarbonTimeline:
    section = cfg.get("carbon", {})
    sources = [k for k in ("timeline", "constant_ci", "alternating") if k in section]
    if len(sources) != 1:
        raise UsageError(
            "carbon section needs exactly one of timeline/constant_ci/alternating")
    if "timeline" in section:
        return carbon.CarbonTimeline.from_csv(section["timeline"])
    if "constant_ci" in section:
        return carbon.CarbonTimeline.constant(float(section["constant_ci"]))
    alt = section["alternating"]
    return carbon.CarbonTimeline.alternating(
        float(alt["low"]), float(alt["high"]), int(alt.get("hours", 48)))


def build_profile(cfg: dict) -> carbon.EnergyProfile:
    preset = cfg.get("carbon", {}).get("profile", "m5-xeon")
    if isinstance(preset, dict):
        return carbon.EnergyProfile(**preset)
    return carbon.load_profile(preset)


def build_sim_config(cfg: dict, timeline, profile, invocations) -> engine.SimConfig:
    section = cfg.get("sim", {})
    root_seed = int(section.get("seed", 0))
    sigma = section.get("sigma", "auto")
    if sigma == "auto":
        ratios = tuple(cfg.get("trace", {}).get("split", (0.8, 0.1, 0.1)))
        split = trace.split_by_pod(invocations, ratios, seed=sub_seed(root_seed, "split"))
        k_ref = max(section.get("action_set_s", (1, 5, 10, 30, 60)))
        sigma_l, sigma_c = policies.unit_scales(split.train, profile, timeline,
                                                k_ref_s=float(k_ref))
    else:
        sigma_l = float(sigma.get("sigma_l", 1.0))
        sigma_c = float(sigma.get("sigma_c", 1.0))
    return engine.SimConfig(
        action_set_s=tuple(section.get("action_set_s", (1, 5, 10, 30, 60))),
        profile=profile,
        timeline=timeline,
        network_const_ms=float(section.get("network_const_ms", 0.0)),
        lambda_carbon=float(section.get("lambda_carbon", 0.5)),
        window_w=int(section.get("window_w", 32)),
        seed=root_seed,
        sigma_l=sigma_l,
        sigma_c=sigma_c,
        empty_history_prior=float(section.get("empty_history_prior", 0.5)),
        split_idle_spans=bool(section.get("split_idle_spans", False)),
    )


def build_train_config(cfg: dict, root_seed: int) -> agent.TrainConfig:
    section = dict(cfg.get("train", {}))
    if "hidden" in section:
        section["hidden"] = tuple(section["hidden"])
    if "lambda_set" in section and section["lambda_set"] is not None:
        section["lambda_set"] = tuple(float(v) for v in section["lambda_set"])
    return agent.TrainConfig(seed=sub_seed(root_seed, "agent"), **section)


def build_policy(name: str, cfg: dict, sim_cfg: engine.SimConfig, model_path=None):
    if name not in POLICY_NAMES:
        raise UsageError(f"unknown policy {name!r}; choose from {POLICY_NAMES}")
    section = cfg.get("policy", {})
    if name == "fixed":
        return policies.fixed_policy(float(section.get("k", 60)))
    if name == "latency_min":
        return policies.latency_min
    if name == "carbon_min":
        return policies.carbon_min
    if name == "weighted_greedy":
        return policies.weighted_greedy
    if name == "pso":
        return policies.make_pso_policy(
            swarm=int(section.get("swarm", 16)),
            iters=int(section.get("iters", 50)),
            seed=sub_seed(sim_cfg.seed, "policy"),
        )
    if name == "oracle":
        return policies.oracle_policy
    path = model_path or section.get("model")
    if not path:
        raise UsageError("policy 'rl' needs a model file (--model or policy.model)")
    model = agent.load_model(path, expected_n_actions=len(sim_cfg.action_set_s))
    return agent.make_rl_policy(model)


def select_slice(cfg: dict, invocations, sim_cfg: engine.SimConfig, use=None):
    use = use or cfg.get("trace", {}).get("use", "full")
    if use == "full":
        return list(invocations)
    if use not in ("train", "validation", "test"):
        raise UsageError(f"trace.use must be full/train/validation/test, got {use!r}")
    ratios = tuple(cfg.get("trace", {}).get("split", (0.8, 0.1, 0.1)))
    split = trace.split_by_pod(invocations, ratios, seed=sub_seed(sim_cfg.seed, "split"))
    return list(getattr(split, use))


def _out_dir(cfg: dict, override=None) -> Path:
    env = os.environ.get("GREENKEEP_OUTPUT_DIR")
    path = Path(override or env or cfg.get("output", {}).get("dir", "runs"))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _atomic_write(path: Path, writer) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


def _write_resolved_config(cfg: dict, overrides: dict, out_dir: Path, verbosity: int) -> None:
    resolved = json.loads(json.dumps(cfg))  # deep copy of plain data
    for dotted, value in overrides.items():
        node = resolved
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
        if verbosity > 0:
            print(f"override: {dotted} = {value}")
    _atomic_write(out_dir / "resolved_config.yaml",
                  lambda p: Path(p).write_text(yaml.safe_dump(resolved, sort_keys=True),
                                               encoding="utf-8"))


def _verbosity(cfg: dict, args) -> int:
    if getattr(args, "quiet", False):
        return 0
    return int(cfg.get("output", {}).get("verbosity", 1))


# ---------------------------------------------------------------- commands


def cmd_gen_trace(args) -> int:
    section = {
        "model": args.model,
        "duration_s": args.duration,
        "functions": args.functions,
        "pods_per_function": args.pods,
    }
    for flag, key in [("rate", "rate_hz"), ("burst_rate", "burst_rate_hz"),
                      ("lull_rate", "lull_rate_hz"), ("period", "period_s"),
                      ("interval", "interval_s")]:
        value = getattr(args, flag)
        if value is not None:
            section[key] = value
    if args.model == "deterministic" and "interval_s" not in section:
        raise UsageError("deterministic model needs --interval")
    if args.model == "poisson" and "rate_hz" not in section:
        raise UsageError("poisson model needs --rate")
    if args.model == "bimodal" and not {"burst_rate_hz", "lull_rate_hz", "period_s"} <= set(section):
        raise UsageError("bimodal model needs --burst-rate, --lull-rate and --period")
    spec = build_synthetic_spec(section, args.seed)
    invocations = trace.generate_trace(spec)
    _atomic_write(Path(args.out), lambda p: trace.write_trace(invocations, p))
    if args.cold_log_out:
        table = trace.synthetic_cold_table(spec)
        _atomic_write(Path(args.cold_log_out), lambda p: trace.write_cold_log(table, p))
    print(f"wrote {len(invocations)} invocations to {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    invocations, _ = build_trace(cfg, int(cfg.get("sim", {}).get("seed", 0)))
    timeline = build_timeline(cfg)
    profile = build_profile(cfg)
    sim_cfg = build_sim_config(cfg, timeline, profile, invocations)
    policy_name = args.policy or cfg.get("policy", {}).get("name")
    if not policy_name:
        raise UsageError("no policy given (use --policy or the policy section)")
    overrides = {}
    if args.policy:
        overrides["policy.name"] = args.policy
    if args.k is not None:
        cfg.setdefault("policy", {})["k"] = args.k
        overrides["policy.k"] = args.k
    policy = build_policy(policy_name, cfg, sim_cfg, model_path=args.model)
    work = select_slice(cfg, invocations, sim_cfg)
    report, outcomes = engine.run(work, policy, sim_cfg)
    out_dir = _out_dir(cfg, args.out)
    verbosity = _verbosity(cfg, args)
    _write_resolved_config(cfg, overrides, out_dir, verbosity)
    report_path = out_dir / f"report_{policy_name}.json"
    _atomic_write(report_path, lambda p: metrics.write_report_json(report, p))
    if args.outcomes or cfg.get("output", {}).get("outcomes"):
        _atomic_write(out_dir / f"outcomes_{policy_name}.csv",
                      lambda p: engine.write_outcomes(outcomes, p))
    if verbosity > 0:
        print(f"policy={policy_name} invocations={report.n_invocations} "
              f"cold_starts={report.cold_start_count} "
              f"mean_e2e_s={report.mean_e2e_latency_s:.4f} "
              f"keep_alive_g={report.keep_alive_carbon_g:.6f} "
              f"total_g={report.total_carbon_g:.6f} "
              f"lcp={report.lcp:.6f} iri={report.iri:.6f}")
        print(f"report written to {report_path}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    root_seed = int(cfg.get("sim", {}).get("seed", 0))
    invocations, _ = build_trace(cfg, root_seed)
    timeline = build_timeline(cfg)
    profile = build_profile(cfg)
    sim_cfg = build_sim_config(cfg, timeline, profile, invocations)
    ratios = tuple(cfg.get("trace", {}).get("split", (0.8, 0.1, 0.1)))
    split = trace.split_by_pod(invocations, ratios, seed=sub_seed(root_seed, "split"))
    train_cfg = build_train_config(cfg, root_seed)
    if args.episodes is not None:
        train_cfg = replace(train_cfg, episodes=args.episodes)
    model, log = agent.train(split, train_cfg, sim_cfg)
    out_dir = _out_dir(cfg, args.out)
    verbosity = _verbosity(cfg, args)
    overrides = {"train.episodes": train_cfg.episodes} if args.episodes is not None else {}
    _write_resolved_config(cfg, overrides, out_dir, verbosity)
    model_path = out_dir / "model.json"
    _atomic_write(model_path, lambda p: agent.save_model(model, p))
    _atomic_write(out_dir / "training_log.csv", lambda p: agent.write_training_log(log, p))
    if verbosity > 0:
        final = log[-1] if log else {}
        print(f"trained {train_cfg.episodes} episodes on "
              f"{len(split.train)} invocations "
              f"(val_reward={final.get('val_reward')})")
        print(f"model written to {model_path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    names = [n.strip() for n in args.policies.split(",") if n.strip()]
    if not names:
        raise UsageError("--policies list is empty")
    unknown = [n for n in names if n not in POLICY_NAMES]
    if unknown:
        raise UsageError(f"unknown policies {unknown}; choose from {POLICY_NAMES}")
    invocations, _ = build_trace(cfg, int(cfg.get("sim", {}).get("seed", 0)))
    timeline = build_timeline(cfg)
    profile = build_profile(cfg)
    sim_cfg = build_sim_config(cfg, timeline, profile, invocations)
    work = select_slice(cfg, invocations, sim_cfg)
    built = {name: build_policy(name, cfg, sim_cfg, model_path=args.model)
             for name in names}

    def run_one(name):
        report, outcomes = engine.run(work, built[name], sim_cfg)
        return name, report, metrics.realized_weighted_cost(outcomes, sim_cfg)

    results = _map_workers(run_one, names)
    reports = {name: report for name, report, _ in results}
    costs = {name: cost for name, _, cost in results}
    rows = metrics.compare(reports)
    out_dir = _out_dir(cfg, args.out)
    verbosity = _verbosity(cfg, args)
    _write_resolved_config(cfg, {}, out_dir, verbosity)
    _atomic_write(out_dir / "comparison.csv", lambda p: metrics.write_comparison_csv(rows, p))
    if verbosity > 0:
        for row in rows:
            print(f"{row['rank']}. {row['policy']}: cold={row['cold_start_count']} "
                  f"keep_alive_g={row['keep_alive_carbon_g']:.6f} "
                  f"dcold={row['dcold_pct']:.2f}% dcarbon={row['dcarbon_pct']:.2f}% "
                  f"weighted_cost={costs[row['policy']]:.6f}")
    if "oracle" in names:
        oracle_cost = costs["oracle"]
        dominated = all(oracle_cost <= cost + 1e-12 for cost in costs.values())
        print(f"oracle dominance: {'ok' if dominated else 'VIOLATED'} "
              f"(oracle weighted cost {oracle_cost:.6f})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    try:
        grid = [float(v) for v in args.lambda_grid.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad --lambda-grid {args.lambda_grid!r}")
    if not grid:
        raise UsageError("--lambda-grid is empty")
    grid = metrics.dedupe_lambda_grid(grid)
    policy_name = args.policy or cfg.get("policy", {}).get("name", "weighted_greedy")
    if policy_name not in POLICY_NAMES:
        raise UsageError(f"unknown policy {policy_name!r}")
    root_seed = int(cfg.get("sim", {}).get("seed", 0))
    invocations, _ = build_trace(cfg, root_seed)
    timeline = build_timeline(cfg)
    profile = build_profile(cfg)
    sim_cfg = build_sim_config(cfg, timeline, profile, invocations)
    work = select_slice(cfg, invocations, sim_cfg)

    policies_by_lambda = {}
    if policy_name == "rl":
        ratios = tuple(cfg.get("trace", {}).get("split", (0.8, 0.1, 0.1)))
        split = trace.split_by_pod(invocations, ratios, seed=sub_seed(root_seed, "split"))
        for lam in grid:
            train_cfg = build_train_config(cfg, root_seed)
            lam_sim_cfg = replace(sim_cfg, lambda_carbon=lam)
            model, _ = agent.train(split, train_cfg, lam_sim_cfg)
            policies_by_lambda[lam] = agent.make_rl_policy(model)
    else:
        for lam in grid:
            policies_by_lambda[lam] = build_policy(policy_name, cfg, sim_cfg,
                                                   model_path=args.model)
    rows = metrics.sensitivity_sweep(policies_by_lambda, work, sim_cfg)
    out_dir = _out_dir(cfg, args.out)
    verbosity = _verbosity(cfg, args)
    _write_resolved_config(cfg, {}, out_dir, verbosity)
    _atomic_write(out_dir / "sweep.csv", lambda p: metrics.write_sweep_csv(rows, p))
    if verbosity > 0:
        for lam, cold, keep_g in rows:
            print(f"lambda={lam}: cold_starts={cold} keep_alive_g={keep_g:.6f}")
    return EXIT_OK


def cmd_oracle_gap(args) -> int:
    cfg = load_config(args.config)
    root_seed = int(cfg.get("sim", {}).get("seed", 0))
    invocations, _ = build_trace(cfg, root_seed)
    timeline = build_timeline(cfg)
    profile = build_profile(cfg)
    sim_cfg = build_sim_config(cfg, timeline, profile, invocations)
    work = select_slice(cfg, invocations, sim_cfg, use=args.use)
    rl_policy = build_policy("rl", cfg, sim_cfg, model_path=args.model)
    oracle_report, _ = engine.run(work, policies.oracle_policy, sim_cfg)
    rl_report, _ = engine.run(work, rl_policy, sim_cfg)

    def degradation(ours, theirs):
        return (ours - theirs) / theirs * 100.0 if theirs else float("inf")

    rows = [
        ("keep_alive_carbon_g", oracle_report.keep_alive_carbon_g,
         rl_report.keep_alive_carbon_g),
        ("cold_start_count", oracle_report.cold_start_count,
         rl_report.cold_start_count),
    ]
    print(f"{'metric':<22}{'oracle':>14}{'rl':>14}{'degradation':>14}")
    for name, oracle_v, rl_v in rows:
        print(f"{name:<22}{oracle_v:>14.6g}{rl_v:>14.6g}"
              f"{degradation(rl_v, oracle_v):>13.3f}%")
    return EXIT_OK


def _map_workers(fn, items):
    workers = int(os.environ.get("GREENKEEP_WORKERS", "1"))
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def make_parser() -> _Parser:
    parser = _Parser(prog="greenkeep",
                     description="Carbon-aware serverless keep-alive simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-trace", help="synthesize a workload trace CSV")
    gen.add_argument("--model", required=True,
                     choices=["poisson", "bimodal", "deterministic"])
    gen.add_argument("--duration", type=int, required=True, help="seconds")
    gen.add_argument("--functions", type=int, default=1)
    gen.add_argument("--pods", type=int, default=1, help="pods per function")
    gen.add_argument("--rate", type=float, help="poisson rate (Hz)")
    gen.add_argument("--burst-rate", type=float, help="bimodal burst rate (Hz)")
    gen.add_argument("--lull-rate", type=float, help="bimodal lull rate (Hz)")
    gen.add_argument("--period", type=float, help="bimodal cycle length (s)")
    gen.add_argument("--interval", type=float, help="deterministic interval (s)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", "-o", required=True)
    gen.add_argument("--cold-log-out", help="also write the matching cold-start log")
    gen.set_defaults(func=cmd_gen_trace)

    sim = sub.add_parser("simulate", help="run one policy over a trace")
    sim.add_argument("--config", "-c", required=True)
    sim.add_argument("--policy", choices=POLICY_NAMES)
    sim.add_argument("--k", type=float, help="fixed policy timeout override")
    sim.add_argument("--model", help="model file for --policy rl")
    sim.add_argument("--outcomes", action="store_true", help="also dump the step CSV")
    sim.add_argument("--out", "-o", help="output directory")
    sim.add_argument("--quiet", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    tr = sub.add_parser("train", help="train the learned policy")
    tr.add_argument("--config", "-c", required=True)
    tr.add_argument("--episodes", type=int, help="override train.episodes")
    tr.add_argument("--out", "-o", help="output directory")
    tr.add_argument("--quiet", action="store_true")
    tr.set_defaults(func=cmd_train)

    cp = sub.add_parser("compare", help="run several policies on one trace")
    cp.add_argument("--config", "-c", required=True)
    cp.add_argument("--policies", required=True, help="comma separated names")
    cp.add_argument("--model", help="model file for rl")
    cp.add_argument("--out", "-o", help="output directory")
    cp.add_argument("--quiet", action="store_true")
    cp.set_defaults(func=cmd_compare)

    sw = sub.add_parser("sweep", help="lambda sensitivity sweep")
    sw.add_argument("--config", "-c", required=True)
    sw.add_argument("--lambda-grid", required=True, help="comma separated values")
    sw.add_argument("--policy", choices=POLICY_NAMES)
    sw.add_argument("--model", help="model file for rl (reused across lambdas)")
    sw.add_argument("--out", "-o", help="output directory")
    sw.add_argument("--quiet", action="store_true")
    sw.set_defaults(func=cmd_sweep)

    og = sub.add_parser("oracle-gap", help="learned policy vs oracle on one slice")
    og.add_argument("--config", "-c", required=True)
    og.add_argument("--model", required=True)
    og.add_argument("--use", default="test",
                    choices=["full", "train", "validation", "test"])
    og.set_defaults(func=cmd_oracle_gap)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except agent.TrainingDiverged as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (trace.TraceError, carbon.CarbonDataError, metrics.MetricsError,
            engine.EngineError, policies.PolicyError, agent.AgentError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
