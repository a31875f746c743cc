"""Learned keep-alive policy: a small Q-network trained from replayed
traces.

The state is the context's reuse-probability vector plus normalized
resource, cold-latency and grid-intensity features and the preference
weight. The network is a plain fully connected net with rectifier
hidden layers, trained by stochastic gradient descent on the squared
temporal-difference error against a periodically synced target network.
Forward and backward passes are written out in numpy; there is no
autograd dependency.

Credit assignment is delayed: a decision's transition enters the replay
buffer only once its pod's next arrival (or the end of the trace)
reveals whether the pod was still warm and how long it idled.
"""

from __future__ import annotations

import csv
import json
import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import carbon, engine
from .engine import DecisionResolution, SimConfig
from .policies import DecisionContext
from .seeds import sub_seed
from .trace import TraceSplit

MODEL_FORMAT = "greenkeep-qnet"
MODEL_VERSION = 1
STATE_EXTRA_FEATURES = 5  # mem, cpu, cold latency, intensity, lambda


class AgentError(ValueError):
    """Raised for invalid agent inputs or malformed model files."""


class TrainingDiverged(RuntimeError):
    """Raised when the TD loss stops being finite."""


@dataclass(frozen=True)
class NormStats:
    """Training-split feature statistics used by the encoder.

    Cold latency is long-tailed and goes through log(1+x) before
    standardization; degenerate standard deviations fall back to 1.
    """

    mem_mean: float
    mem_std: float
    cpu_mean: float
    cpu_std: float
    lcold_mean: float
    lcold_std: float
    ci_mean: float
    ci_std: float

    @classmethod
    def from_training(cls, invocations, timeline) -> "NormStats":
        if not invocations:
            raise AgentError("cannot build normalization stats from an empty split")
        mem = np.array([inv.mem_mb for inv in invocations], dtype=float)
        cpu = np.array([inv.cpu_cores for inv in invocations], dtype=float)
        lcold = np.log1p(np.array([inv.cold_ms or 0.0 for inv in invocations], dtype=float))
        ci = np.array([timeline.ci_at(inv.ts_ms) for inv in invocations], dtype=float)

        def safe_std(x):
            s = float(np.std(x))
            return s if s > 0 else 1.0

        return cls(
            mem_mean=float(mem.mean()), mem_std=safe_std(mem),
            cpu_mean=float(cpu.mean()), cpu_std=safe_std(cpu),
            lcold_mean=float(lcold.mean()), lcold_std=safe_std(lcold),
            ci_mean=float(ci.mean()), ci_std=safe_std(ci),
        )

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "mem_mean", "mem_std", "cpu_mean", "cpu_std",
            "lcold_mean", "lcold_std", "ci_mean", "ci_std")}


def encode(ctx: DecisionContext, stats: NormStats) -> np.ndarray:
    """Build the dense state vector for one decision context."""
    n = len(ctx.p)
    s = np.empty(n + STATE_EXTRA_FEATURES, dtype=float)
    s[:n] = ctx.p
    s[n] = (ctx.mem_mb - stats.mem_mean) / stats.mem_std
    s[n + 1] = (ctx.cpu_cores - stats.cpu_mean) / stats.cpu_std
    s[n + 2] = (math.log1p(ctx.cold_ms) - stats.lcold_mean) / stats.lcold_std
    s[n + 3] = (ctx.ci_now - stats.ci_mean) / stats.ci_std
    s[n + 4] = ctx.lambda_carbon
    if not np.isfinite(s).all():
        raise AgentError(f"non-finite feature in state vector: {s}")
    return s


class QNetwork:
    """Fully connected net with rectifier hidden layers and a linear
    output head, one Q-value per action."""

    def __init__(self, weights, biases):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise AgentError("inconsistent layer shapes")

    @classmethod
    def initialize(cls, layer_sizes: Sequence[int], rng) -> "QNetwork":
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
            scale = math.sqrt(2.0 / fan_in)
            weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_outputs(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "QNetwork":
        return QNetwork([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def load_from(self, other: "QNetwork") -> None:
        for mine, theirs in zip(self.weights, other.weights):
            mine[...] = theirs
        for mine, theirs in zip(self.biases, other.biases):
            mine[...] = theirs

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]


def q_forward(net: QNetwork, s: np.ndarray) -> np.ndarray:
    """Q-values for all actions at one state."""
    s = np.asarray(s, dtype=float)
    if s.shape != (net.n_inputs,):
        raise AgentError(f"state has shape {s.shape}, network expects ({net.n_inputs},)")
    return net.forward_batch(s[None, :])[0]


def select_action(net: QNetwork, s: np.ndarray, eps: float, rng) -> int:
    """Epsilon-greedy action index; greedy ties break to the smallest
    index. eps=0 consumes no randomness."""
    if eps > 0 and rng.random() < eps:
        return int(rng.integers(net.n_outputs))
    return int(np.argmax(q_forward(net, s)))


class ReplayBuffer:
    """Ring buffer of (s, a, r, s', terminal); oldest-first eviction."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise AgentError("capacity must be >= 1")
        self.capacity = capacity
        self._buf = deque(maxlen=capacity)

    def push(self, s, a_idx: int, r: float, s_next, terminal: bool) -> None:
        self._buf.append((s, a_idx, r, s_next, terminal))

    def __len__(self) -> int:
        return len(self._buf)

    def sample(self, batch: int, rng):
        """Uniform sample as stacked arrays (s, a, r, s', terminal)."""
        if len(self._buf) == 0:
            raise AgentError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self._buf), size=batch)
        rows = [self._buf[i] for i in idx]
        s = np.stack([row[0] for row in rows])
        a = np.array([row[1] for row in rows], dtype=int)
        r = np.array([row[2] for row in rows], dtype=float)
        s_next = np.stack([row[3] for row in rows])
        term = np.array([row[4] for row in rows], dtype=float)
        return s, a, r, s_next, term


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters (defaults follow the evaluated setup)."""

    capacity: int = 10_000
    batch: int = 64
    lr: float = 0.001
    gamma: float = 0.99
    eps_start: float = 1.0
    eps_decay: float = 0.95
    eps_min: float = 0.05
    target_sync_interval: int = 500
    episodes: int = 300
    hidden: tuple = (64, 64)
    seed: int = 0
    lambda_set: Optional[tuple] = None  # per-episode lambda sampling pool
    reward_mode: str = "realized"  # or "expected"

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise AgentError(f"gamma must be in (0,1], got {self.gamma}")
        for name in ("eps_start", "eps_decay", "eps_min"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise AgentError(f"{name} must be in [0,1], got {v}")
        if self.reward_mode not in ("realized", "expected"):
            raise AgentError(f"unknown reward_mode {self.reward_mode!r}")


def epsilon_at(cfg: TrainConfig, episode: int) -> float:
    return max(cfg.eps_min, cfg.eps_start * cfg.eps_decay ** episode)


def loss_and_grads(net: QNetwork, states: np.ndarray, action_idx: np.ndarray,
                   targets: np.ndarray):
    """Squared TD loss and its gradients w.r.t. every parameter.

    Gradients flow only through the Q-value of each transition's taken
    action; the targets are treated as constants.
    """
    batch = states.shape[0]
    pre_acts = []
    acts = [states]
    h = states
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = h @ w + b
        pre_acts.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    q = h @ net.weights[-1] + net.biases[-1]

    rows = np.arange(batch)
    diff = q[rows, action_idx] - targets
    loss = float(np.mean(diff ** 2))

    grad_q = np.zeros_like(q)
    grad_q[rows, action_idx] = 2.0 * diff / batch

    w_grads = [None] * len(net.weights)
    b_grads = [None] * len(net.biases)
    delta = grad_q
    for layer in range(len(net.weights) - 1, -1, -1):
        w_grads[layer] = acts[layer].T @ delta
        b_grads[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ net.weights[layer].T) * (pre_acts[layer - 1] > 0)
    return loss, (w_grads, b_grads)


def td_step(net: QNetwork, target: QNetwork, batch, cfg: TrainConfig) -> float:
    """One SGD step on the squared TD error; returns the pre-update loss."""
    s, a_idx, r, s_next, term = batch
    if s.shape[0] == 0:
        raise AgentError("empty batch")
    q_next = target.forward_batch(s_next)
    y = r + cfg.gamma * q_next.max(axis=1) * (1.0 - term)
    loss, (w_grads, b_grads) = loss_and_grads(net, s, a_idx, y)
    for w, g in zip(net.weights, w_grads):
        w -= cfg.lr * g
    for b, g in zip(net.biases, b_grads):
        b -= cfg.lr * g
    return loss


@dataclass
class TrainedModel:
    """Inference bundle: network, encoder statistics, the action set it
    was trained for, and the unit-balancing scales used in its reward."""

    net: QNetwork
    stats: NormStats
    action_set_s: tuple
    sigma_l: float = 1.0
    sigma_c: float = 1.0


def make_rl_policy(model: TrainedModel):
    """Greedy decision function over the trained Q-network."""

    def policy(ctx: DecisionContext) -> float:
        if tuple(ctx.action_set_s) != tuple(model.action_set_s):
            raise AgentError(
                f"context action set {ctx.action_set_s} does not match "
                f"model action set {model.action_set_s}")
        q = q_forward(model.net, encode(ctx, model.stats))
        return ctx.action_set_s[int(np.argmax(q))]

    return policy


def _resolution_reward(res: DecisionResolution, mode: str) -> float:
    """Negative weighted cost of one resolved decision.

    Realized mode charges the actual cold outcome and the actually
    consumed idle carbon; expected mode charges the planning-time
    estimate (miss probability times cold latency, full idle budget).
    """
    ctx = res.ctx
    lam = ctx.lambda_carbon
    if mode == "realized":
        cold_term = res.cold_ms_next if res.realized_cold else 0.0
        carbon_term = res.idle_carbon_g
    else:
        idx = ctx.action_set_s.index(res.action_s)
        cold_term = (1.0 - ctx.p[idx]) * ctx.cold_ms
        e_idle = carbon.idle_energy(ctx.profile, ctx.mem_mb, ctx.cpu_cores, res.action_s)
        carbon_term = carbon.to_carbon(e_idle, ctx.ci_now)
    return -((1.0 - lam) * ctx.sigma_l * cold_term + lam * ctx.sigma_c * carbon_term)


def train(split: TraceSplit, cfg: TrainConfig, sim_cfg: SimConfig):
    """Train a Q-network on the split's training trace.

    One episode is one full pass of the training trace through the
    simulator with the agent in the loop. Returns (TrainedModel, log)
    where the model carries the weights that scored best on the
    validation split and the log has one row per episode. Deterministic
    given cfg.seed.
    """
    if not split.train:
        raise AgentError("empty training split")
    rng = np.random.default_rng(sub_seed(cfg.seed, "agent"))
    stats = NormStats.from_training(split.train, sim_cfg.timeline)
    n_actions = len(sim_cfg.action_set_s)
    net = QNetwork.initialize([n_actions + STATE_EXTRA_FEATURES, *cfg.hidden, n_actions], rng)
    target = net.copy()
    buffer = ReplayBuffer(cfg.capacity)
    grad_steps = 0
    best_val = -math.inf
    best_net = net.copy()
    log = []

    for episode in range(cfg.episodes):
        eps = epsilon_at(cfg, episode)
        if cfg.lambda_set:
            lam = float(cfg.lambda_set[int(rng.integers(len(cfg.lambda_set)))])
        else:
            lam = sim_cfg.lambda_carbon
        episode_cfg = replace(sim_cfg, lambda_carbon=lam)
        losses = []

        def policy(ctx: DecisionContext) -> float:
            a_idx = select_action(net, encode(ctx, stats), eps, rng)
            return ctx.action_set_s[a_idx]

        def on_resolution(res: DecisionResolution) -> None:
            nonlocal grad_steps
            s = encode(res.ctx, stats)
            a_idx = res.ctx.action_set_s.index(res.action_s)
            r = _resolution_reward(res, cfg.reward_mode)
            s_next = encode(res.next_ctx, stats) if res.next_ctx is not None else np.zeros_like(s)
            buffer.push(s, a_idx, r, s_next, res.terminal)
            if len(buffer) >= cfg.batch:
                loss = td_step(net, target, buffer.sample(cfg.batch, rng), cfg)
                if not math.isfinite(loss):
                    raise TrainingDiverged(f"non-finite TD loss at episode {episode}")
                losses.append(loss)
                grad_steps += 1
                if grad_steps % cfg.target_sync_interval == 0:
                    target.load_from(net)

        engine.run_outcomes(split.train, policy, episode_cfg, on_resolution)

        val_reward = None
        if split.validation:
            val_reward = evaluate_reward(net, stats, split.validation, sim_cfg, cfg.reward_mode)
            improved = val_reward > best_val
        else:
            improved = True  # no validation data: keep latest weights
        if improved:
            best_val = val_reward if val_reward is not None else best_val
            best_net = net.copy()
        log.append({
            "episode": episode,
            "epsilon": eps,
            "lambda_carbon": lam,
            "transitions": len(buffer),
            "mean_loss": float(np.mean(losses)) if losses else float("nan"),
            "val_reward": val_reward,
            "grad_steps": grad_steps,
        })

    model = TrainedModel(
        net=best_net, stats=stats, action_set_s=tuple(sim_cfg.action_set_s),
        sigma_l=sim_cfg.sigma_l, sigma_c=sim_cfg.sigma_c,
    )
    return model, log


def evaluate_reward(net: QNetwork, stats: NormStats, trace, sim_cfg: SimConfig,
                    reward_mode: str = "realized") -> float:
    """Total resolution reward of the greedy policy over a trace."""
    total = [0.0]

    def policy(ctx: DecisionContext) -> float:
        return ctx.action_set_s[select_action(net, encode(ctx, stats), 0.0, None)]

    def on_resolution(res: DecisionResolution) -> None:
        total[0] += _resolution_reward(res, reward_mode)

    engine.run_outcomes(trace, policy, sim_cfg, on_resolution)
    return total[0]


def save_model(model: TrainedModel, path) -> None:
    """Serialize a model; floats survive the JSON round trip exactly."""
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layer_sizes": model.net.layer_sizes,
        "weights": [w.tolist() for w in model.net.weights],
        "biases": [b.tolist() for b in model.net.biases],
        "norm_stats": model.stats.to_dict(),
        "action_set_s": list(model.action_set_s),
        "sigma_l": model.sigma_l,
        "sigma_c": model.sigma_c,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)
        f.write("\n")


def load_model(path, expected_n_actions: Optional[int] = None) -> TrainedModel:
    """Load a serialized model, verifying format, version and, when
    given, the action count expected by the caller's configuration."""
    try:
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise AgentError(f"{path}: corrupt model file ({exc})") from exc
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise AgentError(f"{path}: not a {MODEL_FORMAT} file")
    if payload.get("version") != MODEL_VERSION:
        raise AgentError(
            f"{path}: model version {payload.get('version')} unsupported "
            f"(expected {MODEL_VERSION})")
    try:
        net = QNetwork(payload["weights"], payload["biases"])
        stats = NormStats(**payload["norm_stats"])
        action_set = tuple(float(k) for k in payload["action_set_s"])
        model = TrainedModel(
            net=net, stats=stats, action_set_s=action_set,
            sigma_l=float(payload["sigma_l"]), sigma_c=float(payload["sigma_c"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise AgentError(f"{path}: malformed model payload ({exc})") from exc
    if net.layer_sizes != payload["layer_sizes"]:
        raise AgentError(f"{path}: layer_sizes do not match stored weights")
    if len(action_set) != net.n_outputs:
        raise AgentError(
            f"{path}: action set of {len(action_set)} does not match "
            f"network output of {net.n_outputs}")
    if expected_n_actions is not None and len(action_set) != expected_n_actions:
        raise AgentError(
            f"{path}: model has {len(action_set)} actions, "
            f"configuration expects {expected_n_actions}")
    return model


def write_training_log(log, path) -> None:
    fields = ["episode", "epsilon", "lambda_carbon", "transitions",
              "mean_loss", "val_reward", "grad_steps"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        for row in log:
            out = {k: row[k] for k in fields}
            # episodes before the buffer fills have no gradient steps
            if out["mean_loss"] is not None and not math.isfinite(out["mean_loss"]):
                out["mean_loss"] = ""
            writer.writerow(out)
