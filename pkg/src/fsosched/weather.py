"""Cloud cover forecasts and the mapping from cover to usable contact volume.

Cover is always a fraction in [0, 1]. Two availability models are provided:

* volume-level: the deliverable volume of a contact is one gaussian draw
  centred on the clear fraction of the contact,
* slot-level: every slot is independently blocked with probability equal to
  the cover, which makes the deliverable volume binomial and also yields a
  per-slot mask.
"""

from __future__ import annotations

import bisect
import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Mapping

import numpy as np

from .contacts import Contact, ContactPlan


@dataclass(frozen=True)
class CloudForecast:
    """Per-contact cloud cover fractions for one episode."""

    per_contact_cover: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "per_contact_cover", tuple(float(v) for v in self.per_contact_cover)
        )
        for v in self.per_contact_cover:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"cloud cover {v} outside [0, 1]")

    def __len__(self) -> int:
        return len(self.per_contact_cover)


@dataclass(frozen=True)
class HistoricalWeatherTrace:
    """Timestamped cloud cover samples for one station, strictly time-ordered.

    The trace is read as a step function: each sample holds from its timestamp
    until the next one, and the trace covers the closed span from its first to
    its last timestamp.
    """

    station: str
    samples: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "samples",
            tuple((float(t), float(v)) for t, v in self.samples),
        )
        if not self.samples:
            raise ValueError(f"trace for {self.station} has no samples")
        for (t0, v0), (t1, _) in zip(self.samples, self.samples[1:]):
            if t1 <= t0:
                raise ValueError(f"trace for {self.station} is not strictly increasing")
        for _, v in self.samples:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"trace for {self.station} has cover {v} outside [0, 1]")

    @property
    def start_s(self) -> float:
        return self.samples[0][0]

    @property
    def end_s(self) -> float:
        return self.samples[-1][0]

    def mean_cover(self, t0: float, t1: float) -> float:
        """Time-weighted mean cover over [t0, t1]; t0 == t1 reads the instant."""
        if t1 < t0:
            raise ValueError("interval end before start")
        if t0 < self.start_s or t1 > self.end_s:
            raise ValueError(
                f"interval [{t0}, {t1}] outside trace coverage "
                f"[{self.start_s}, {self.end_s}] for {self.station}"
            )
        times = [t for t, _ in self.samples]
        if t0 == t1:
            idx = _step_index(times, t0)
            return self.samples[idx][1]
        acc = 0.0
        for i, (t, v) in enumerate(self.samples):
            seg_end = self.samples[i + 1][0] if i + 1 < len(self.samples) else t
            lo = max(t, t0)
            hi = min(seg_end, t1)
            if hi > lo:
                acc += v * (hi - lo)
        return acc / (t1 - t0)


def _step_index(times: list[float], t: float) -> int:
    # last sample at or before t
    return max(0, bisect.bisect_right(times, t) - 1)


@dataclass(frozen=True)
class Availability:
    """Realized usable volume of one contact.

    per_slot_mask is only present for the slot-level model; True means the
    slot was clear.
    """

    delta_slots: int
    per_slot_mask: tuple[bool, ...] | None = None

    def __post_init__(self) -> None:
        if self.delta_slots < 0:
            raise ValueError("delta_slots must be >= 0")
        if self.per_slot_mask is not None:
            object.__setattr__(self, "per_slot_mask", tuple(bool(b) for b in self.per_slot_mask))
            if sum(self.per_slot_mask) != self.delta_slots:
                raise ValueError("per_slot_mask does not sum to delta_slots")


@dataclass(frozen=True)
class UniformSyntheticWeather:
    """Fresh per-episode cover, uniform on {0.0, 0.1, ..., 1.0}."""


@dataclass(frozen=True)
class HistoricalWeather:
    """Cover read from station traces keyed by ground-station name."""

    traces: Mapping[str, HistoricalWeatherTrace] = field(default_factory=dict)


@dataclass(frozen=True)
class GaussianVolume:
    """Volume-level availability; sigma is a fraction of the contact length."""

    sigma_fraction: float = 0.05

    def __post_init__(self) -> None:
        if self.sigma_fraction < 0:
            raise ValueError("sigma_fraction must be >= 0")


@dataclass(frozen=True)
class BernoulliSampled:
    """Slot-level availability; each slot blocked independently with prob = cover."""


def gen_uniform_cover(n_contacts: int, rng: int | np.random.Generator) -> CloudForecast:
    """Uniform cover per contact, rounded to the nearest multiple of 0.1."""
    if n_contacts < 0:
        raise ValueError("n_contacts must be >= 0")
    gen = np.random.default_rng(rng) if isinstance(rng, int) else rng
    u = gen.random(n_contacts)
    levels = np.floor(u * 10 + 0.5) / 10
    return CloudForecast(tuple(float(v) for v in levels))


def save_forecast(forecast: CloudForecast, path: str) -> None:
    """Write per-contact cover as a JSON list."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(list(forecast.per_contact_cover), fh)
        fh.write("\n")


def load_forecast(path: str) -> CloudForecast:
    with open(path, encoding="utf-8") as fh:
        values = json.load(fh)
    if not isinstance(values, list):
        raise ValueError(f"{path}: expected a JSON list of cover fractions")
    return CloudForecast(tuple(float(v) for v in values))


def ingest_weather_csv(path: str, station: str) -> HistoricalWeatherTrace:
    """Read a trace from CSV with header timestamp_iso8601,cloud_cover_percent."""
    samples: list[tuple[float, float]] = []
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: no samples")
        header = [h.strip() for h in header]
        if header[:2] != ["timestamp_iso8601", "cloud_cover_percent"]:
            raise ValueError(f"{path}: unexpected header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                ts = _parse_iso8601(row[0].strip())
                percent = float(row[1])
            except (ValueError, IndexError) as bad:
                raise ValueError(f"{path}:{lineno}: cannot parse row {row}: {bad}") from None
            if not 0.0 <= percent <= 100.0:
                raise ValueError(f"{path}:{lineno}: cover {percent}% outside [0, 100]")
            samples.append((ts, percent / 100.0))
    if not samples:
        raise ValueError(f"{path}: no samples")
    for (t0, _), (t1, _) in zip(samples, samples[1:]):
        if t1 <= t0:
            raise ValueError(f"{path}: timestamps are not strictly increasing near {t1}")
    return HistoricalWeatherTrace(station, tuple(samples))


def _parse_iso8601(text: str) -> float:
    raw = text.replace("Z", "+00:00") if text.endswith("Z") else text
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def forecast_for_plan(
    trace: HistoricalWeatherTrace | Mapping[str, HistoricalWeatherTrace],
    plan: ContactPlan,
) -> CloudForecast:
    """Time-weighted mean cover over each contact's span.

    Accepts a single trace applied to every contact, or a mapping from
    ground-station name to trace.
    """
    covers = []
    for c in plan.contacts:
        if isinstance(trace, HistoricalWeatherTrace):
            t = trace
        else:
            try:
                t = trace[c.ground_station]
            except KeyError:
                raise ValueError(f"no weather trace for station {c.ground_station}") from None
        covers.append(t.mean_cover(c.start_time_unix_s, c.end_time_unix_s(plan.link)))
    return CloudForecast(tuple(covers))


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))


def sample_availability_gaussian(
    contact: Contact, cover: float, sigma_slots: float, rng: np.random.Generator
) -> Availability:
    """One gaussian draw centred on the clear fraction of the contact.

    The draw is rounded half away from zero and clamped to [0, length].
    """
    if not 0.0 <= cover <= 1.0:
        raise ValueError(f"cover {cover} outside [0, 1]")
    if sigma_slots < 0:
        raise ValueError("sigma_slots must be >= 0")
    g = rng.normal((1.0 - cover) * contact.length_slots, sigma_slots)
    delta = min(max(_round_half_away(g), 0), contact.length_slots)
    return Availability(delta)


def sample_availability_bernoulli(
    contact: Contact, cover: float, rng: np.random.Generator
) -> Availability:
    """Independent per-slot draws; a slot is clear when its uniform beats the cover."""
    if not 0.0 <= cover <= 1.0:
        raise ValueError(f"cover {cover} outside [0, 1]")
    z = rng.random(contact.length_slots)
    mask = tuple(bool(v) for v in (z > cover))
    return Availability(sum(mask), mask)


def sample_plan_availability(
    plan: ContactPlan,
    forecast: CloudForecast,
    model: GaussianVolume | BernoulliSampled,
    rng: np.random.Generator,
) -> tuple[Availability, ...]:
    """Sample every contact in plan order; draw order is part of determinism."""
    if len(forecast) != len(plan):
        raise ValueError("forecast length does not match plan")
    out = []
    for contact, cover in zip(plan.contacts, forecast.per_contact_cover):
        if isinstance(model, GaussianVolume):
            sigma = model.sigma_fraction * contact.length_slots
            out.append(sample_availability_gaussian(contact, cover, sigma, rng))
        elif isinstance(model, BernoulliSampled):
            out.append(sample_availability_bernoulli(contact, cover, rng))
        else:
            raise TypeError(f"unknown availability model {model!r}")
    return tuple(out)
