"""Contact-selection policies and the clairvoyant upper bound.

Policies are rolled out through DownlinkEnv: begin_episode runs right after
reset, decide is called once per remaining contact.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from statistics import median

from .contacts import Scenario
from .simulator import (
    DEFAULT_ALPHA,
    DownlinkEnv,
    EpisodeMetrics,
    EpisodeRealization,
    Observation,
    compute_metrics,
)

MAX_ORACLE_CONTACTS = 20

DEFAULT_BAND_EDGES = (1.0 / 3.0, 2.0 / 3.0, 1.0)
DEFAULT_THRESHOLD_GRID = tuple(round(0.1 * k, 1) for k in range(11))


class Policy:
    """Base rollout policy; subclasses override decide and optionally begin_episode."""

    name = "policy"

    def begin_episode(self, env: DownlinkEnv) -> None:
        pass

    def decide(self, obs: Observation) -> int:
        raise NotImplementedError


def threshold_decide(cover: float, nu: float) -> int:
    """Transmit exactly when the forecast cover does not exceed the threshold."""
    if not 0.0 <= cover <= 1.0:
        raise ValueError(f"cover {cover} outside [0, 1]")
    if not 0.0 <= nu <= 1.0:
        raise ValueError(f"threshold {nu} outside [0, 1]")
    return 1 if cover <= nu else 0


def use_all_decide() -> int:
    """Degenerate baseline: transmit at every contact."""
    return 1


def _check_bands(bands: tuple[tuple[float, float], ...]) -> tuple[tuple[float, float], ...]:
    bands = tuple((float(u), float(nu)) for u, nu in bands)
    if not bands:
        raise ValueError("need at least one band")
    prev = 0.0
    for upper, nu in bands:
        if upper <= prev:
            raise ValueError("band upper bounds must be strictly increasing")
        if not 0.0 <= nu <= 1.0:
            raise ValueError(f"band threshold {nu} outside [0, 1]")
        prev = upper
    if bands[-1][0] != 1.0:
        raise ValueError("last band must end at 1.0")
    return bands


def multi_threshold_decide(
    cover: float,
    remaining_volume: int,
    capacity: int,
    bands: tuple[tuple[float, float], ...],
) -> int:
    """Threshold rule whose threshold depends on the backlog fraction.

    bands are (upper_bound, threshold) pairs; the first band whose upper bound
    is at least remaining_volume/capacity applies. An empty buffer never
    transmits.
    """
    bands = _check_bands(bands)
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    if remaining_volume == 0:
        return 0
    fraction = remaining_volume / capacity
    for upper, nu in bands:
        if fraction <= upper:
            return threshold_decide(cover, nu)
    raise ValueError(f"backlog fraction {fraction} above the last band")


class ThresholdPolicy(Policy):
    def __init__(self, nu: float, name: str | None = None) -> None:
        if not 0.0 <= nu <= 1.0:
            raise ValueError(f"threshold {nu} outside [0, 1]")
        self.nu = nu
        self.name = name if name is not None else f"threshold_{nu:g}"

    def decide(self, obs: Observation) -> int:
        return threshold_decide(obs.next_cover, self.nu)


class MultiThresholdPolicy(Policy):
    def __init__(self, bands: tuple[tuple[float, float], ...], name: str = "multi_threshold") -> None:
        self.bands = _check_bands(bands)
        self.name = name

    def decide(self, obs: Observation) -> int:
        return multi_threshold_decide(
            obs.next_cover, obs.remaining_volume, obs.total_capacity, self.bands
        )


class UseAllPolicy(Policy):
    name = "use_all"

    def decide(self, obs: Observation) -> int:
        return use_all_decide()


@dataclass(frozen=True)
class OraclePlan:
    """Best action vector for one frozen realization and its achieved metrics."""

    actions: tuple[int, ...]
    achieved: EpisodeMetrics


def _fast_contact_table(realization: EpisodeRealization, lengths: list[int]):
    """Per-contact data for O(1) transmit replay, exactly matching transmit()."""
    table = []
    for availability, length in zip(realization.availabilities, lengths):
        if availability.per_slot_mask is None:
            table.append(("volume", availability.delta_slots, None))
        else:
            positions = [i for i, clear in enumerate(availability.per_slot_mask[:length]) if clear]
            table.append(("mask", len(positions), positions))
    return table


def oracle_search(
    scenario: Scenario,
    realization: EpisodeRealization,
    alpha: float = DEFAULT_ALPHA,
) -> OraclePlan:
    """Exhaustive search over all action vectors against a frozen realization.

    Ties on the objective prefer fewer used contacts, then the
    lexicographically smallest vector. Only feasible for small plans.
    """
    plan = scenario.plan
    n = len(plan)
    if n > MAX_ORACLE_CONTACTS:
        raise ValueError(f"plan has {n} contacts; oracle_search caps at {MAX_ORACLE_CONTACTS}")
    if len(realization.availabilities) != n:
        raise ValueError("realization does not match plan")
    lengths = [c.length_slots for c in plan.contacts]
    table = _fast_contact_table(realization, lengths)
    omega0 = scenario.initial_volume_slots

    best_key: tuple | None = None
    best_actions: tuple[int, ...] | None = None
    best_metrics: EpisodeMetrics | None = None
    for actions in product((0, 1), repeat=n):
        omega = omega0
        delivered_total = utilized = excess = 0
        for i, action in enumerate(actions):
            if omega == 0:
                break
            if action == 0:
                continue
            kind, delta, positions = table[i]
            length = lengths[i]
            if length == 0:
                continue
            if kind == "volume":
                attempted = min(omega, length)
                delivered = min(delta, attempted)
            elif delta >= omega:
                attempted = positions[omega - 1] + 1
                delivered = omega
            else:
                attempted = length
                delivered = delta
            omega -= delivered
            delivered_total += delivered
            utilized += attempted
            excess += attempted - delivered
        metrics = compute_metrics(omega0, delivered_total, utilized, excess, alpha)
        used = sum(actions)
        key = (-metrics.objective, used, actions)
        if best_key is None or key < best_key:
            best_key = key
            best_actions = actions
            best_metrics = metrics
    return OraclePlan(best_actions, best_metrics)


class OraclePolicy(Policy):
    """Replays the exhaustive-search action vector for each episode."""

    name = "oracle"

    def __init__(self) -> None:
        self._actions: tuple[int, ...] | None = None
        self._step = 0

    def begin_episode(self, env: DownlinkEnv) -> None:
        plan = oracle_search(env.scenario, env.realization, env.alpha)
        self._actions = plan.actions
        self._step = 0

    def decide(self, obs: Observation) -> int:
        if self._actions is None:
            raise RuntimeError("begin_episode was never called")
        action = self._actions[self._step]
        self._step += 1
        return action


def rollout(env: DownlinkEnv, policy: Policy, episode_seed: int) -> EpisodeMetrics:
    """Play one episode to completion and return its metrics."""
    obs = env.reset(episode_seed)
    policy.begin_episode(env)
    while obs is not None:
        obs, _ = env.step(policy.decide(obs))
    return env.metrics()


def calibrate_multi_threshold(
    training_scenarios: list[Scenario],
    candidate_thresholds: tuple[float, ...] = DEFAULT_THRESHOLD_GRID,
    band_edges: tuple[float, ...] = DEFAULT_BAND_EDGES,
    alpha: float = DEFAULT_ALPHA,
    episodes_per_scenario: int = 1,
) -> MultiThresholdPolicy:
    """Pick the best fixed threshold per volume band from training rollouts.

    Each scenario is binned by its initial backlog fraction; every candidate
    threshold is rolled out on the same episodes and the one with the highest
    median objective wins, ties going to the larger threshold. A band with no
    training episodes falls back to the largest candidate.
    """
    if not training_scenarios:
        raise ValueError("need at least one training scenario")
    if not candidate_thresholds:
        raise ValueError("need at least one candidate threshold")
    if episodes_per_scenario <= 0:
        raise ValueError("episodes_per_scenario must be positive")
    edges = tuple(float(e) for e in band_edges)
    _check_bands(tuple((e, 0.0) for e in edges))
    candidates = sorted(set(float(nu) for nu in candidate_thresholds))

    scores: list[dict[float, list[float]]] = [
        {nu: [] for nu in candidates} for _ in edges
    ]
    for scenario in training_scenarios:
        capacity = scenario.plan.capacity_slots
        if capacity == 0 or scenario.initial_volume_slots == 0:
            continue
        fraction = scenario.initial_volume_slots / capacity
        band = next(i for i, e in enumerate(edges) if fraction <= e)
        env = DownlinkEnv(scenario, alpha=alpha)
        for k in range(episodes_per_scenario):
            for nu in candidates:
                metrics = rollout(env, ThresholdPolicy(nu), episode_seed=k)
                scores[band][nu].append(metrics.objective)

    bands = []
    for edge, band_scores in zip(edges, scores):
        best_nu = candidates[-1]
        best_med: float | None = None
        for nu in candidates:
            if not band_scores[nu]:
                continue
            med = median(band_scores[nu])
            if best_med is None or med >= best_med:
                best_med = med
                best_nu = nu
        bands.append((edge, best_nu))
    return MultiThresholdPolicy(tuple(bands))
