"""Learning controller: replay, target network, and a per-volume agent bank.

One agent is a small value network trained on episodes whose initial backlog
falls inside its volume band. A bank holds one agent per band and dispatches
on the episode's backlog fraction, which keeps each network on the part of
the state space it was trained for.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace
from statistics import median

import numpy as np

from .contacts import Scenario
from .mlp import Adam, QNetwork, soft_update
from .policies import Policy
from .rewards import RewardParams, episode_reward, step_reward
from .simulator import DEFAULT_ALPHA, DownlinkEnv, Observation


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform, no-repeat sampling."""

    def __init__(self, capacity: int = 10_000) -> None:
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._data: list[tuple] = []
        self._write = 0

    def __len__(self) -> int:
        return len(self._data)

    def push(self, obs, action: int, reward: float, next_obs, terminal: bool) -> None:
        item = (obs, action, reward, next_obs, terminal)
        if len(self._data) < self.capacity:
            self._data.append(item)
        else:
            self._data[self._write] = item
        self._write = (self._write + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Batch of distinct transitions as stacked arrays."""
        if batch_size > len(self._data):
            raise ValueError(f"buffer holds {len(self._data)} < batch {batch_size}")
        idx = rng.choice(len(self._data), size=batch_size, replace=False)
        obs = np.stack([self._data[i][0] for i in idx])
        actions = np.array([self._data[i][1] for i in idx], dtype=int)
        rewards = np.array([self._data[i][2] for i in idx], dtype=float)
        next_obs = np.stack([self._data[i][3] for i in idx])
        terminal = np.array([self._data[i][4] for i in idx], dtype=bool)
        return obs, actions, rewards, next_obs, terminal


def encode_observation(obs: Observation, max_contacts: int) -> np.ndarray:
    """Flatten an observation to [cover, volume/V, capacity/V, (cover, len/max)...].

    Rows beyond the real plan must be zero padding; a plan with more than
    max_contacts genuine rows cannot be encoded for this network.
    """
    rows = list(obs.future_info)
    if len(rows) > max_contacts:
        extra = rows[max_contacts:]
        if any(cover != 0.0 or length != 0 for cover, length in extra):
            raise ValueError(
                f"plan has more than max_contacts={max_contacts} contacts"
            )
        rows = rows[:max_contacts]
    rows += [(0.0, 0)] * (max_contacts - len(rows))
    v = float(obs.total_capacity) if obs.total_capacity > 0 else 1.0
    max_len = float(obs.max_contact_length) if obs.max_contact_length > 0 else 1.0
    flat = [obs.next_cover, obs.remaining_volume / v, obs.remaining_capacity / v]
    for cover, length in rows:
        flat.append(cover)
        flat.append(length / max_len)
    return np.array(flat, dtype=float)


def greedy_action(net: QNetwork, x: np.ndarray) -> int:
    q = net.forward(x)
    # ties favour transmitting
    return 1 if q[1] >= q[0] else 0


def select_action(net: QNetwork, x: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over the two actions."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(2))
    return greedy_action(net, x)


def double_dqn_targets(
    rewards: np.ndarray,
    q_next_online: np.ndarray,
    q_next_target: np.ndarray,
    terminal: np.ndarray,
    gamma: float,
) -> np.ndarray:
    """Bootstrapped targets where the online net picks and the target net scores."""
    n_actions = q_next_online.shape[1]
    # argmax with ties toward the higher action index, matching greedy_action
    picked = (n_actions - 1) - np.argmax(q_next_online[:, ::-1], axis=1)
    boot = q_next_target[np.arange(len(rewards)), picked]
    return rewards + gamma * np.where(terminal, 0.0, boot)


@dataclass(frozen=True)
class DqnHyperparams:
    """Training configuration; defaults are the tuned desk-scale settings."""

    lr: float = 0.01
    replay_capacity: int = 10_000
    gamma: float = 0.99
    epsilon_decay: float = 0.005
    minibatch: int = 64
    target_update_every: int = 1
    l2: float = 1e-4
    tau: float = 0.001
    episodes: int = 5000
    epsilon_start: float = 1.0
    epsilon_floor: float = 0.01
    hidden: tuple[int, ...] = (64, 64)
    clip_norm: float = 10.0
    c: float = 100.0
    min_episodes: int = 1000
    val_every: int = 250
    val_episodes: int = 100
    plateau_patience: int = 8
    plateau_rel_tol: float = 1e-3


@dataclass(frozen=True)
class EnvFactory:
    """Builds per-episode environments off one template scenario."""

    template: Scenario
    alpha: float = DEFAULT_ALPHA
    max_contacts: int | None = None

    def __post_init__(self) -> None:
        if len(self.template.plan) == 0:
            raise ValueError("template plan has no contacts")
        if self.max_contacts is None:
            object.__setattr__(self, "max_contacts", len(self.template.plan))

    @property
    def capacity(self) -> int:
        return self.template.plan.capacity_slots

    @property
    def max_length(self) -> int:
        return self.template.plan.max_length_slots

    def __call__(self, initial_volume_slots: int) -> DownlinkEnv:
        scenario = replace(self.template, initial_volume_slots=initial_volume_slots)
        return DownlinkEnv(scenario, alpha=self.alpha, max_contacts=self.max_contacts)


def _validation_set(
    env_factory: EnvFactory,
    volume_range: tuple[float, float],
    hyper: DqnHyperparams,
    seed: int,
) -> list[tuple[int, int]]:
    """Fixed (backlog, episode seed) pairs used to score snapshots during training."""
    lo, hi = volume_range
    rng = np.random.default_rng([seed, 771])
    pairs = []
    for _ in range(hyper.val_episodes):
        fraction = rng.uniform(lo, hi)
        omega0 = min(env_factory.capacity, max(1, round(fraction * env_factory.capacity)))
        pairs.append((omega0, int(rng.integers(1 << 32))))
    return pairs


def _validation_score(
    net: QNetwork, env_factory: EnvFactory, val_set: list[tuple[int, int]]
) -> float:
    """Median objective of the greedy policy over the validation set."""
    ratios, efficiencies = [], []
    for omega0, episode_seed in val_set:
        env = env_factory(omega0)
        obs = env.reset(episode_seed=episode_seed)
        while obs is not None:
            obs, _ = env.step(greedy_action(net, encode_observation(obs, env_factory.max_contacts)))
        summary = env.metrics()
        ratios.append(summary.delivery_ratio)
        efficiencies.append(summary.energy_efficiency)
    alpha = env_factory.alpha
    return alpha * median(ratios) + (1.0 - alpha) * median(efficiencies)


def train_agent(
    env_factory: EnvFactory,
    volume_range: tuple[float, float],
    hyper: DqnHyperparams = DqnHyperparams(),
    seed: int = 0,
) -> QNetwork:
    """Train one agent on episodes whose backlog fraction is uniform in volume_range.

    Deterministic for a fixed seed. Step rewards are scaled against the band's
    largest backlog rather than each episode's, so the net is not asked to fit
    values that differ only by the sampled episode size. Every val_every
    episodes the greedy policy is scored on a fixed validation set; the best
    snapshot wins, and training stops early once that score has gone
    plateau_patience rounds without improving.
    """
    lo, hi = volume_range
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError(f"bad volume_range {volume_range}")
    rng = np.random.default_rng(seed)
    obs_dim = 3 + 2 * env_factory.max_contacts
    net = QNetwork.create((obs_dim, *hyper.hidden, 2), rng)
    target = net.copy()
    opt = Adam(lr=hyper.lr, weight_decay=hyper.l2, clip_norm=hyper.clip_norm)
    buffer = ReplayBuffer(hyper.replay_capacity)
    epsilon = hyper.epsilon_start
    zeros = np.zeros(obs_dim)
    beta_norm = max(1, round(hi * env_factory.capacity))
    step_params = RewardParams(beta=beta_norm, c=hyper.c)
    val_set = _validation_set(env_factory, volume_range, hyper, seed) if hyper.val_episodes > 0 else []
    best: QNetwork | None = None
    best_score = -math.inf
    stale_rounds = 0
    grad_steps = 0

    for ep in range(hyper.episodes):
        fraction = rng.uniform(lo, hi)
        omega0 = min(env_factory.capacity, max(1, round(fraction * env_factory.capacity)))
        env = env_factory(omega0)
        obs = env.reset(episode_seed=int(rng.integers(1 << 32)))
        while obs is not None:
            x = encode_observation(obs, env_factory.max_contacts)
            action = select_action(net, x, epsilon, rng)
            next_obs, outcome = env.step(action)
            reward = step_reward(
                outcome.delivered, outcome.unsuccessful, outcome.contact_length, step_params, action
            )
            terminal = next_obs is None
            if terminal:
                summary = env.metrics()
                reward += episode_reward(
                    summary.delivery_ratio, summary.utilized_time, RewardParams(beta=omega0, c=hyper.c)
                )
                x_next = zeros
            else:
                x_next = encode_observation(next_obs, env_factory.max_contacts)
            buffer.push(x, action, float(reward), x_next, terminal)

            if len(buffer) >= hyper.minibatch:
                b_obs, b_act, b_rew, b_next, b_term = buffer.sample(hyper.minibatch, rng)
                q_next_online = net.forward(b_next)
                q_next_target = target.forward(b_next)
                targets = double_dqn_targets(
                    b_rew, q_next_online, q_next_target, b_term, hyper.gamma
                )
                loss, grads_w, grads_b = net.loss_grads(b_obs, b_act, targets)
                if not np.isfinite(loss):
                    raise RuntimeError(f"training diverged at episode {ep} (loss={loss})")
                opt.step(net, grads_w, grads_b)
                grad_steps += 1
                if grad_steps % hyper.target_update_every == 0:
                    soft_update(target, net, hyper.tau)
            obs = next_obs

        epsilon = max(hyper.epsilon_floor, epsilon * (1.0 - hyper.epsilon_decay))

        if val_set and (ep + 1) % hyper.val_every == 0:
            score = _validation_score(net, env_factory, val_set)
            material = score > best_score + hyper.plateau_rel_tol * max(abs(best_score), 1e-12)
            if score > best_score:
                best_score = score
                best = net.copy()
            if material:
                stale_rounds = 0
            else:
                stale_rounds += 1
                if ep + 1 >= hyper.min_episodes and stale_rounds >= hyper.plateau_patience:
                    break
    return net if best is None else best


DEFAULT_VOLUME_EDGES = (1.0 / 3.0, 2.0 / 3.0, 1.0)


@dataclass(frozen=True)
class AgentModel:
    """One trained agent plus the constants needed to reuse it."""

    net: QNetwork
    volume_range: tuple[float, float]
    capacity: int
    max_length: int
    max_contacts: int


@dataclass(frozen=True)
class AgentBank:
    """Agents covering contiguous left-open volume bands that partition (0, 1]."""

    agents: tuple[AgentModel, ...]

    def __post_init__(self) -> None:
        if not self.agents:
            raise ValueError("bank needs at least one agent")
        lo = 0.0
        for agent in self.agents:
            a_lo, a_hi = agent.volume_range
            if abs(a_lo - lo) > 1e-9 or a_hi <= a_lo:
                raise ValueError("volume ranges must partition (0, 1] contiguously")
            lo = a_hi
        if abs(lo - 1.0) > 1e-9:
            raise ValueError("volume ranges must end at 1.0")


def bank_select(bank: AgentBank, initial_volume_slots: int, capacity: int) -> AgentModel:
    """Agent whose band contains the backlog fraction; bands are (lo, hi]."""
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    fraction = initial_volume_slots / capacity
    if fraction <= 0.0 or fraction > 1.0:
        raise ValueError(f"no agent covers backlog fraction {fraction}")
    for agent in bank.agents:
        lo, hi = agent.volume_range
        if lo < fraction <= hi:
            return agent
    raise ValueError(f"no agent covers backlog fraction {fraction}")


def train_bank(
    env_factory: EnvFactory,
    volume_edges: tuple[float, ...] = DEFAULT_VOLUME_EDGES,
    hyper: DqnHyperparams = DqnHyperparams(),
    seed: int = 0,
) -> AgentBank:
    """One agent per band; bands are (0, e1], (e1, e2], ... ending at 1.0."""
    if not volume_edges or abs(volume_edges[-1] - 1.0) > 1e-9:
        raise ValueError("volume_edges must end at 1.0")
    children = np.random.SeedSequence(seed).spawn(len(volume_edges))
    agents = []
    lo = 0.0
    for edge, child in zip(volume_edges, children):
        agent_seed = int(child.generate_state(1)[0])
        net = train_agent(env_factory, (lo, edge), hyper, seed=agent_seed)
        agents.append(
            AgentModel(
                net=net,
                volume_range=(lo, edge),
                capacity=env_factory.capacity,
                max_length=env_factory.max_length,
                max_contacts=env_factory.max_contacts,
            )
        )
        lo = edge
    return AgentBank(tuple(agents))


# -- persistence -----------------------------------------------------------

MODEL_KIND = "fsosched-qnet"
BANK_KIND = "fsosched-agent-bank"


def save_model(model: AgentModel, path: str) -> None:
    doc = {
        "kind": MODEL_KIND,
        "version": 1,
        "volume_range": list(model.volume_range),
        "capacity": model.capacity,
        "max_length": model.max_length,
        "max_contacts": model.max_contacts,
        "net": model.net.to_dict(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path: str) -> AgentModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") != MODEL_KIND:
        raise ValueError(f"{path} is not a model file")
    return AgentModel(
        net=QNetwork.from_dict(doc["net"]),
        volume_range=tuple(doc["volume_range"]),
        capacity=int(doc["capacity"]),
        max_length=int(doc["max_length"]),
        max_contacts=int(doc["max_contacts"]),
    )


def save_bank(bank: AgentBank, out_dir: str, stem: str = "agent") -> str:
    """Write one model file per agent plus a manifest; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i, agent in enumerate(bank.agents):
        name = f"{stem}_{i}.json"
        save_model(agent, os.path.join(out_dir, name))
        entries.append({"model_path": name, "volume_range": list(agent.volume_range)})
    manifest = os.path.join(out_dir, "bank.json")
    with open(manifest, "w", encoding="utf-8") as fh:
        json.dump({"kind": BANK_KIND, "version": 1, "agents": entries}, fh, indent=2)
        fh.write("\n")
    return manifest


def load_bank(path: str) -> AgentBank:
    """Load a bank manifest, or a single model file as a one-agent bank."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") == MODEL_KIND:
        agent = load_model(path)
        if agent.volume_range != (0.0, 1.0):
            agent = replace(agent, volume_range=(0.0, 1.0))
        return AgentBank((agent,))
    if doc.get("kind") != BANK_KIND:
        raise ValueError(f"{path} is neither a bank manifest nor a model file")
    base = os.path.dirname(os.path.abspath(path))
    agents = tuple(
        load_model(os.path.join(base, entry["model_path"])) for entry in doc["agents"]
    )
    return AgentBank(agents)


class DqnBankPolicy(Policy):
    """Greedy rollout policy dispatching to the bank agent for the episode backlog."""

    def __init__(self, bank: AgentBank, name: str = "dqn") -> None:
        self.bank = bank
        self.name = name
        self._model: AgentModel | None = None

    def begin_episode(self, env: DownlinkEnv) -> None:
        self._model = bank_select(
            self.bank,
            env.scenario.initial_volume_slots,
            env.scenario.plan.capacity_slots,
        )

    def decide(self, obs: Observation) -> int:
        if self._model is None:
            raise RuntimeError("begin_episode was never called")
        x = encode_observation(obs, self._model.max_contacts)
        return greedy_action(self._model.net, x)
