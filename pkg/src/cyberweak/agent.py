"""DDPG attacker with masked action selection and infeasible-action replay.

The policy network emits a proto-action in (0, 1)^K, one score per canonical
action. Selection masks it to the state's feasible actions and takes the
argmax. When the unmasked argmax was infeasible, an extra penalty transition
is stored that leaves the state unchanged, so training pushes those scores
down.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .env import (
    MAX_STEPS,
    ActionInstance,
    apply_action,
    canonical_actions,
    encode_state,
    feasible_actions,
    goal_reached,
    reset,
)
from .nn import (
    OptimizerState,
    ParamSet,
    PolicyNet,
    QNet,
    actor_gradient,
    expected_actor_gradient,
    critic_loss,
    optimizer_step,
    policy_forward,
    soft_update,
)
from .scenario import CyberScenario


class EmptyFeasibleSet(ValueError):
    pass


class InsufficientReplay(RuntimeError):
    pass


@dataclass
class AgentConfig:
    gamma: float = 0.99
    tau: float = 0.01
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    batch_m: int = 64
    replay_capacity: int = 100_000
    noise_sigma_start: float = 0.2
    noise_sigma_end: float = 0.01
    epsilon_random: float = 0.05
    r_infeasible: float = -10000.0
    episodes: int = 100
    max_steps: int = MAX_STEPS
    # training starts once the buffer holds warmup_batches * batch_m records
    warmup_batches: int = 10
    # multiplies stored rewards when forming critic targets
    reward_scale: float = 1e-4
    # "expected": critic values at one-hot actions under softmax(logits / T);
    # "proto": critic evaluated at the raw sigmoid scores
    actor_update: str = "expected"
    actor_temperature: float = 0.1
    # L2 weight on the policy's pre-sigmoid outputs (expected update only)
    logit_penalty: float = 1e-3
    gru_units: int = 32
    hidden_units: int = 48

    def __post_init__(self) -> None:
        problems = []
        if not 0.0 < self.gamma <= 1.0:
            problems.append(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0.0 <= self.tau <= 1.0:
            problems.append(f"tau must be in [0, 1], got {self.tau}")
        for name in ("lr_actor", "lr_critic", "reward_scale"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        if self.actor_temperature <= 0:
            problems.append("actor_temperature must be positive")
        if self.actor_update not in ("expected", "proto"):
            problems.append(f"actor_update must be 'expected' or 'proto', got {self.actor_update!r}")
        if self.logit_penalty < 0:
            problems.append("logit_penalty must be non-negative")
        for name in ("batch_m", "replay_capacity", "max_steps", "gru_units", "hidden_units"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be at least 1")
        if self.episodes < 0 or self.warmup_batches < 1:
            problems.append("episodes must be >= 0 and warmup_batches >= 1")
        if self.noise_sigma_start < 0 or self.noise_sigma_end < 0:
            problems.append("noise sigmas must be non-negative")
        if not 0.0 <= self.epsilon_random <= 1.0:
            problems.append("epsilon_random must be a probability")
        if self.r_infeasible >= 0:
            problems.append("r_infeasible must be negative")
        if problems:
            raise ValueError("; ".join(problems))

    def sigma_at(self, episode: int) -> float:
        if self.episodes <= 1:
            return self.noise_sigma_start
        frac = episode / (self.episodes - 1)
        return self.noise_sigma_start + (self.noise_sigma_end - self.noise_sigma_start) * frac


# Short-horizon settings that train on the built-in scenario in minutes on one CPU.
DESK_OVERRIDES = {
    "episodes": 300,
    "max_steps": 100,
    "gamma": 0.9,
    "epsilon_random": 0.3,
    "lr_actor": 1e-3,
}


def desk_config(**overrides) -> AgentConfig:
    return AgentConfig(**{**DESK_OVERRIDES, **overrides})


def config_from_dict(values: dict, base: AgentConfig | None = None) -> AgentConfig:
    """Overlay ``values`` on ``base``; unknown keys are rejected."""
    base = base or AgentConfig()
    known = set(asdict(base))
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    return AgentConfig(**{**asdict(base), **values})


@dataclass
class ReplayRecord:
    s: np.ndarray
    h: np.ndarray
    a_index: int
    reward: float
    s_next: np.ndarray
    h_next: np.ndarray
    done: bool
    feasible: bool
    # feasible-action masks of s and s_next
    mask: np.ndarray | None = None
    next_mask: np.ndarray | None = None


class ReplayBuffer:
    """Fixed-capacity ring buffer; the oldest record is overwritten first."""

    def __init__(self, capacity: int, state_dim: int, hidden_dim: int, n_actions: int | None = None):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim), dtype=np.uint8)
        self.s_next = np.zeros((capacity, state_dim), dtype=np.uint8)
        self.h = np.zeros((capacity, hidden_dim))
        self.h_next = np.zeros((capacity, hidden_dim))
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.done = np.zeros(capacity, dtype=bool)
        self.feasible = np.zeros(capacity, dtype=bool)
        self.mask = np.ones((capacity, n_actions), dtype=bool) if n_actions else None
        self.next_mask = np.ones((capacity, n_actions), dtype=bool) if n_actions else None
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def append(self, rec: ReplayRecord) -> None:
        i = self._next
        self.s[i], self.h[i], self.a[i], self.r[i] = rec.s, rec.h, rec.a_index, rec.reward
        self.s_next[i], self.h_next[i] = rec.s_next, rec.h_next
        self.done[i], self.feasible[i] = rec.done, rec.feasible
        if self.mask is not None:
            self.mask[i] = True if rec.mask is None else rec.mask
            self.next_mask[i] = True if rec.next_mask is None else rec.next_mask
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _slot(self, k: int) -> int:
        # k-th oldest record
        start = self._next if self._size == self.capacity else 0
        return (start + k) % self.capacity

    def __getitem__(self, k: int) -> ReplayRecord:
        if not -self._size <= k < self._size:
            raise IndexError(k)
        i = self._slot(k % self._size)
        masks = (None, None) if self.mask is None else (self.mask[i].copy(), self.next_mask[i].copy())
        return ReplayRecord(
            self.s[i].astype(np.float64), self.h[i].copy(), int(self.a[i]), float(self.r[i]),
            self.s_next[i].astype(np.float64), self.h_next[i].copy(), bool(self.done[i]), bool(self.feasible[i]),
            *masks,
        )

    def records(self) -> list[ReplayRecord]:
        return [self[k] for k in range(self._size)]

    def sample_indices(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return rng.integers(0, self._size, size=m)


class Agent:
    """The four networks plus their optimizers."""

    def __init__(self, state_dim: int, n_actions: int, config: AgentConfig, rng: np.random.Generator):
        self.config = config
        self.state_dim, self.n_actions = state_dim, n_actions
        self.actor = PolicyNet(state_dim, n_actions, rng, config.gru_units, config.hidden_units)
        self.critic = QNet(state_dim, n_actions, rng, config.hidden_units)
        self.actor_target = PolicyNet(state_dim, n_actions, rng, config.gru_units, config.hidden_units)
        self.critic_target = QNet(state_dim, n_actions, rng, config.hidden_units)
        self.actor_target.params = self.actor.params.copy()
        self.critic_target.params = self.critic.params.copy()
        self.opt_actor = OptimizerState.for_params(self.actor.params, config.lr_actor)
        self.opt_critic = OptimizerState.for_params(self.critic.params, config.lr_critic)

    def tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, params in (
            ("actor", self.actor.params),
            ("critic", self.critic.params),
            ("actor_target", self.actor_target.params),
            ("critic_target", self.critic_target.params),
        ):
            out.update({f"{prefix}/{k}": v.copy() for k, v in params.items()})
        return out

    def load_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        for prefix, params in (
            ("actor", self.actor.params),
            ("critic", self.critic.params),
            ("actor_target", self.actor_target.params),
            ("critic_target", self.critic_target.params),
        ):
            for k in params:
                params[k] = np.array(tensors[f"{prefix}/{k}"], dtype=np.float64)


def select_action(proto: np.ndarray, feasible: Sequence[ActionInstance]) -> tuple[ActionInstance, int]:
    """Masked argmax: the feasible action with the highest proto score.

    Returns the chosen action and the unmasked argmax index. Ties go to the
    lowest global index in both cases.
    """
    if not feasible:
        raise EmptyFeasibleSet("no feasible action in this state")
    proto = np.asarray(proto)
    raw = int(np.argmax(proto))
    idx = np.fromiter((a.global_index for a in feasible), dtype=np.int64, count=len(feasible))
    order = np.argsort(idx, kind="stable")
    best = order[int(np.argmax(proto[idx[order]]))]
    return feasible[best], raw


def feasible_mask(n_actions: int, feasible: Sequence[ActionInstance]) -> np.ndarray:
    mask = np.zeros(n_actions, dtype=bool)
    mask[[a.global_index for a in feasible]] = True
    return mask


def record_step(buffer: ReplayBuffer, s, h, raw_index: int, chosen: ActionInstance, reward: float,
                s_next, h_next, done: bool, config: AgentConfig, mask: np.ndarray,
                next_mask: np.ndarray | None = None) -> int:
    """Store the executed transition, plus a penalty record when the raw
    argmax was not feasible in ``s``.

    ``mask`` is the feasible-action mask of ``s`` and ``next_mask`` that of
    ``s_next``. Returns the number of records added.
    """
    buffer.append(ReplayRecord(s, h, chosen.global_index, reward, s_next, h_next, done, True, mask, next_mask))
    if mask[raw_index]:
        return 1
    buffer.append(ReplayRecord(s, h, raw_index, config.r_infeasible, s, h, False, False, mask, mask))
    return 2


def masked_argmax(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise argmax over entries where ``mask`` is true (lowest index on ties)."""
    return np.argmax(np.where(mask, scores, -np.inf), axis=1)


def train_step(agent: Agent, buffer: ReplayBuffer, rng: np.random.Generator) -> float:
    """One critic and one actor update on a uniform minibatch, then refresh
    both target networks. Returns the critic loss."""
    cfg = agent.config
    m = cfg.batch_m
    if len(buffer) < m:
        raise InsufficientReplay(f"{len(buffer)} records, batch needs {m}")
    idx = buffer.sample_indices(rng, m)
    s = buffer.s[idx].astype(np.float64)
    s2 = buffer.s_next[idx].astype(np.float64)
    h, h2 = buffer.h[idx], buffer.h_next[idx]
    r, done = buffer.r[idx], buffer.done[idx]

    rows = np.arange(m)
    mask2 = buffer.next_mask[idx] if buffer.next_mask is not None else np.ones((m, agent.n_actions), bool)
    # the critic only ever sees executed one-hot actions, so the target
    # policy is evaluated through the same selection used when acting
    proto2, _, _ = agent.actor_target.forward(s2, h2)
    a2 = np.zeros((m, agent.n_actions))
    a2[rows, masked_argmax(proto2, mask2)] = 1.0
    q2, _ = agent.critic_target.forward(s2, a2)
    y = cfg.reward_scale * r + cfg.gamma * (1.0 - done) * q2

    onehot = np.zeros((m, agent.n_actions))
    onehot[rows, buffer.a[idx]] = 1.0
    loss, g_critic = critic_loss(agent.critic, s, onehot, y)
    optimizer_step(agent.critic.params, g_critic, agent.opt_critic)

    if cfg.actor_update == "expected":
        mask = None
        if buffer.mask is not None:
            # feasible actions plus, for penalty records, the infeasible raw pick
            mask = buffer.mask[idx].copy()
            mask[rows, buffer.a[idx]] = True
        _, g_actor = expected_actor_gradient(agent.actor, agent.critic, s, h, cfg.actor_temperature,
                                             cfg.logit_penalty, mask)
    else:
        _, g_actor = actor_gradient(agent.actor, agent.critic, s, h)
    optimizer_step(agent.actor.params, g_actor, agent.opt_actor)

    soft_update(agent.critic_target.params, agent.critic.params, cfg.tau)
    soft_update(agent.actor_target.params, agent.actor.params, cfg.tau)
    return loss


@dataclass
class EpisodeSummary:
    total_reward: float
    length: int
    success: bool
    success_step: int | None
    penalties: int = 0


def run_episode(scenario: CyberScenario, agent: Agent, buffer: ReplayBuffer, rng: np.random.Generator,
                train: bool = True, sigma: float = 0.0, epsilon: float | None = None) -> EpisodeSummary:
    cfg = agent.config
    eps = cfg.epsilon_random if epsilon is None else epsilon
    warmup = cfg.warmup_batches * cfg.batch_m
    k = agent.n_actions
    st = reset(scenario)
    h = agent.actor.initial_hidden()
    x = encode_state(scenario, st)
    feas = feasible_actions(scenario, st)
    mask = feasible_mask(k, feas)
    total, penalties = 0.0, 0
    success_step = None
    while True:
        proto, h_next = policy_forward(agent.actor, x, h)
        if sigma > 0:
            proto = proto + rng.normal(0.0, sigma, size=k)
        chosen, raw = select_action(proto, feas)
        if eps > 0 and rng.random() < eps:
            chosen = feas[int(rng.integers(len(feas)))]
        out = apply_action(scenario, st, chosen, cfg.max_steps)
        x_next = encode_state(scenario, out.next)
        feas_next = feasible_actions(scenario, out.next)
        mask_next = feasible_mask(k, feas_next)
        penalized = record_step(buffer, x, h, raw, chosen, out.reward, x_next, h_next, out.done, cfg,
                                mask, mask_next) - 1
        if train and len(buffer) >= warmup:
            train_step(agent, buffer, rng)
        # the episode reward is everything the agent was paid, penalties included
        penalties += penalized
        total += out.reward + penalized * cfg.r_infeasible
        if success_step is None and goal_reached(scenario, out.next):
            success_step = out.next.steps_taken
        st, x, h, feas, mask = out.next, x_next, h_next, feas_next, mask_next
        if out.done:
            break
    return EpisodeSummary(total, st.steps_taken, success_step is not None, success_step, penalties)


@dataclass
class TrainStats:
    episode_rewards: list[float] = field(default_factory=list)
    episode_lengths: list[int] = field(default_factory=list)
    episode_success: list[bool] = field(default_factory=list)
    first_success_episode: int | None = None
    best_length: int | None = None
    wall_clock: float = 0.0

    def add(self, ep: EpisodeSummary) -> None:
        n = len(self.episode_rewards)
        self.episode_rewards.append(ep.total_reward)
        self.episode_lengths.append(ep.length)
        self.episode_success.append(ep.success)
        if ep.success:
            if self.first_success_episode is None:
                self.first_success_episode = n
            if self.best_length is None or ep.success_step < self.best_length:
                self.best_length = ep.success_step

    def moving_average(self, window: int = 50) -> np.ndarray:
        r = np.asarray(self.episode_rewards, dtype=np.float64)
        if len(r) < window:
            return np.array([r.mean()]) if len(r) else np.array([])
        return np.convolve(r, np.ones(window) / window, mode="valid")

    def summary(self) -> dict:
        return {
            "episodes": len(self.episode_rewards),
            "successes": int(sum(self.episode_success)),
            "first_success_episode": self.first_success_episode,
            "best_length": self.best_length,
            "wall_clock": round(self.wall_clock, 3),
        }


@dataclass
class TrainResult:
    stats: TrainStats
    agent: Agent
    config: AgentConfig
    seed: int

    def checkpoint(self) -> dict[str, np.ndarray]:
        return self.agent.tensors()


def make_agent(scenario: CyberScenario, config: AgentConfig, rng: np.random.Generator) -> Agent:
    return Agent(scenario.state_dim, len(canonical_actions(scenario)), config, rng)


def train_agent(scenario: CyberScenario, config: AgentConfig, seed: int) -> TrainResult:
    """Run ``config.episodes`` training episodes; reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    agent = make_agent(scenario, config, rng)
    buffer = ReplayBuffer(config.replay_capacity, scenario.state_dim, config.gru_units, agent.n_actions)
    stats = TrainStats()
    t0 = time.perf_counter()
    for e in range(config.episodes):
        stats.add(run_episode(scenario, agent, buffer, rng, train=True, sigma=config.sigma_at(e)))
    stats.wall_clock = time.perf_counter() - t0
    return TrainResult(stats, agent, config, seed)


def stats_csv(stats: TrainStats) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["episode", "total_reward", "length", "success"])
    for e, (r, n, ok) in enumerate(zip(stats.episode_rewards, stats.episode_lengths, stats.episode_success)):
        w.writerow([e, f"{r:g}", n, "true" if ok else "false"])
    return buf.getvalue()


def config_dict(config: AgentConfig) -> dict:
    return asdict(config)
