"""Episodic downlink environment.

One episode walks a contact plan in time order with a buffer of bundles to
flush. At each contact the controller either transmits (action 1) or leaves
the laser off (action 0). Skipped contacts cost nothing; used contacts charge
the slots during which the terminal actually attempted transmission, whether
or not the slot got through the clouds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .contacts import ContactPlan, Scenario
from .weather import (
    Availability,
    BernoulliSampled,
    CloudForecast,
    GaussianVolume,
    HistoricalWeather,
    UniformSyntheticWeather,
    forecast_for_plan,
    gen_uniform_cover,
    sample_plan_availability,
)

DEFAULT_ALPHA = 0.9

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class Observation:
    """What the controller sees before deciding on the next contact.

    future_info lists (cover, length_slots) for every remaining contact
    including the next one, zero-padded on the right to max_contacts rows.
    total_capacity and max_contact_length are plan constants carried along so
    encoders can normalize without reaching back into the scenario.
    """

    next_cover: float
    remaining_volume: int
    remaining_capacity: int
    future_info: tuple[tuple[float, int], ...]
    total_capacity: int
    max_contact_length: int


@dataclass(frozen=True)
class StepOutcome:
    """Accounting for one contact decision."""

    action: int
    delivered: int
    unsuccessful: int
    contact_length: int
    excess_power: int


@dataclass(frozen=True)
class EpisodeMetrics:
    """End-of-episode summary.

    utilized_time is in slots and counts only transmission attempts during
    used contacts. By convention delivery_ratio is 1 when there was nothing
    to deliver and energy_efficiency is 1 when no slot was ever attempted.
    """

    delivery_ratio: float
    energy_efficiency: float
    utilized_time: int
    excess_total: int
    objective: float


@dataclass(frozen=True)
class EpisodeRealization:
    """Frozen weather and availability draws for one episode."""

    forecast: CloudForecast
    availabilities: tuple[Availability, ...]


def weighted_objective(delivery_ratio: float, energy_efficiency: float, alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha {alpha} outside [0, 1]")
    return alpha * delivery_ratio + (1.0 - alpha) * energy_efficiency


def objective(metrics: EpisodeMetrics, alpha: float) -> float:
    """Recompute the blended objective from stored ratios under a new alpha."""
    return weighted_objective(metrics.delivery_ratio, metrics.energy_efficiency, alpha)


def compute_metrics(
    initial_volume: int,
    delivered_total: int,
    utilized_slots: int,
    excess_total: int,
    alpha: float,
) -> EpisodeMetrics:
    w = delivered_total / initial_volume if initial_volume > 0 else 1.0
    y = delivered_total / utilized_slots if utilized_slots > 0 else 1.0
    return EpisodeMetrics(w, y, utilized_slots, excess_total, weighted_objective(w, y, alpha))


def transmit(availability: Availability, length_slots: int, omega: int) -> tuple[int, int]:
    """Push bundles through one contact; returns (delivered, attempted_slots).

    Volume-level availability treats the contact as a pool of availability.delta_slots
    deliverable bundles and attempts min(omega, length) slots. Slot-level
    availability walks the mask: every slot is attempted while the buffer is
    non-empty and only clear slots deliver.
    """
    if omega <= 0 or length_slots <= 0:
        return 0, 0
    if availability.per_slot_mask is None:
        attempted = min(omega, length_slots)
        delivered = min(availability.delta_slots, attempted)
        return delivered, attempted
    delivered = 0
    attempted = 0
    for clear in availability.per_slot_mask[:length_slots]:
        attempted += 1
        if clear:
            delivered += 1
            if delivered == omega:
                break
    return delivered, attempted


class DownlinkEnv:
    """Sequential contact-selection environment over one scenario.

    Weather and availability for an episode are fully drawn at reset from
    (scenario.seed, episode_seed), so every policy replayed with the same pair
    sees bit-identical conditions.
    """

    def __init__(
        self,
        scenario: Scenario,
        alpha: float = DEFAULT_ALPHA,
        max_contacts: int | None = None,
    ) -> None:
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha {alpha} outside [0, 1]")
        n = len(scenario.plan)
        if max_contacts is None:
            max_contacts = n
        if max_contacts < n:
            raise ValueError(f"plan has {n} contacts but max_contacts is {max_contacts}")
        self.scenario = scenario
        self.alpha = alpha
        self.max_contacts = max_contacts
        self._started = False

    # -- episode lifecycle -------------------------------------------------

    def reset(self, episode_seed: int = 0) -> Observation | None:
        """Draw a fresh episode; returns the first observation or None if the
        episode is terminal out of the gate (empty plan or empty buffer)."""
        if episode_seed < 0:
            raise ValueError("episode_seed must be non-negative")
        scenario = self.scenario
        rng = np.random.default_rng(
            [scenario.seed & _SEED_MASK, episode_seed & _SEED_MASK]
        )
        forecast = self._episode_forecast(rng)
        availabilities = sample_plan_availability(
            scenario.plan, forecast, scenario.availability_model, rng
        )
        self._realization = EpisodeRealization(forecast, availabilities)
        self._cursor = 0
        self._remaining_volume = scenario.initial_volume_slots
        self._delivered_total = 0
        self._utilized_slots = 0
        self._excess_total = 0
        self._outcomes: list[StepOutcome] = []
        self._started = True
        return self._observe()

    def _episode_forecast(self, rng: np.random.Generator) -> CloudForecast:
        model = self.scenario.weather_model
        if isinstance(model, UniformSyntheticWeather):
            return gen_uniform_cover(len(self.scenario.plan), rng)
        if isinstance(model, HistoricalWeather):
            return forecast_for_plan(model.traces, self.scenario.plan)
        if isinstance(model, CloudForecast):
            if len(model) != len(self.scenario.plan):
                raise ValueError("fixed forecast length does not match plan")
            return model
        raise TypeError(f"unknown weather model {model!r}")

    @property
    def done(self) -> bool:
        self._require_started()
        return self._cursor >= len(self.scenario.plan) or self._remaining_volume == 0

    @property
    def cursor(self) -> int:
        self._require_started()
        return self._cursor

    @property
    def remaining_volume(self) -> int:
        self._require_started()
        return self._remaining_volume

    @property
    def delivered_total(self) -> int:
        self._require_started()
        return self._delivered_total

    @property
    def realization(self) -> EpisodeRealization:
        self._require_started()
        return self._realization

    @property
    def outcomes(self) -> tuple[StepOutcome, ...]:
        self._require_started()
        return tuple(self._outcomes)

    def step(self, action: int) -> tuple[Observation | None, StepOutcome]:
        if action not in (0, 1):
            raise ValueError(f"action must be 0 or 1, got {action}")
        if self.done:
            raise RuntimeError("episode is terminal; call reset() first")
        contact = self.scenario.plan.contacts[self._cursor]
        length = contact.length_slots
        if action == 1:
            availability = self._realization.availabilities[self._cursor]
            delivered, attempted = transmit(availability, length, self._remaining_volume)
            unsuccessful = attempted - delivered
            self._remaining_volume -= delivered
            self._delivered_total += delivered
            self._utilized_slots += attempted
            self._excess_total += unsuccessful
        else:
            delivered = unsuccessful = 0
        outcome = StepOutcome(action, delivered, unsuccessful, length, unsuccessful)
        self._outcomes.append(outcome)
        self._cursor += 1
        return self._observe(), outcome

    def metrics(self) -> EpisodeMetrics:
        if not self.done:
            raise RuntimeError("metrics are only defined once the episode is terminal")
        return compute_metrics(
            self.scenario.initial_volume_slots,
            self._delivered_total,
            self._utilized_slots,
            self._excess_total,
            self.alpha,
        )

    # -- helpers -----------------------------------------------------------

    def _require_started(self) -> None:
        if not self._started:
            raise RuntimeError("call reset() before using the environment")

    def _observe(self) -> Observation | None:
        if self.done:
            return None
        plan = self.scenario.plan
        m = self._cursor
        rows = [
            (self._realization.forecast.per_contact_cover[i], plan.contacts[i].length_slots)
            for i in range(m, len(plan))
        ]
        rows += [(0.0, 0)] * (self.max_contacts - len(rows))
        return Observation(
            next_cover=self._realization.forecast.per_contact_cover[m],
            remaining_volume=self._remaining_volume,
            remaining_capacity=sum(c.length_slots for c in plan.contacts[m:]),
            future_info=tuple(rows),
            total_capacity=plan.capacity_slots,
            max_contact_length=plan.max_length_slots,
        )


def replay_actions(
    plan: ContactPlan,
    realization: EpisodeRealization,
    initial_volume: int,
    actions: tuple[int, ...] | list[int],
    alpha: float = DEFAULT_ALPHA,
) -> EpisodeMetrics:
    """Score a full action vector against a frozen realization.

    Uses the same accounting as DownlinkEnv.step; actions past the point where
    the buffer empties are ignored, matching the environment's terminal rule.
    """
    if len(actions) != len(plan):
        raise ValueError("need one action per contact")
    omega = initial_volume
    delivered_total = utilized = excess = 0
    for contact, availability, action in zip(plan.contacts, realization.availabilities, actions):
        if omega == 0:
            break
        if action == 1:
            delivered, attempted = transmit(availability, contact.length_slots, omega)
            omega -= delivered
            delivered_total += delivered
            utilized += attempted
            excess += attempted - delivered
    return compute_metrics(initial_volume, delivered_total, utilized, excess, alpha)


def dump_episode_trace(
    outcomes: tuple[StepOutcome, ...], metrics: EpisodeMetrics, path: str
) -> None:
    """Write one JSON object per step followed by the final metrics record."""
    with open(path, "w", encoding="utf-8") as fh:
        for outcome in outcomes:
            fh.write(json.dumps(asdict(outcome)) + "\n")
        fh.write(json.dumps(asdict(metrics)) + "\n")
