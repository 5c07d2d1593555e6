"""Contact plans and buffer bookkeeping for an optical downlink.

All volumes are counted in bundle-slots: one slot is the time the link needs
to transmit exactly one bundle, so a contact of ``length_slots`` can carry at
most that many bundles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

GB_20_BITS = 160_000_000_000
RATE_8_GBPS = 8_000_000_000


@dataclass(frozen=True)
class LinkParams:
    """Fixed radio-independent link budget: bundle size and optical data rate."""

    bundle_size_bits: int = GB_20_BITS
    data_rate_bps: int = RATE_8_GBPS

    def __post_init__(self) -> None:
        if self.bundle_size_bits <= 0:
            raise ValueError("bundle_size_bits must be positive")
        if self.data_rate_bps <= 0:
            raise ValueError("data_rate_bps must be positive")

    @property
    def slot_duration_s(self) -> float:
        """Seconds needed to transmit one bundle."""
        return self.bundle_size_bits / self.data_rate_bps


DEFAULT_LINK = LinkParams()


@dataclass(frozen=True)
class Contact:
    """One ground-station pass, already discretized to whole bundle-slots."""

    id: int
    start_time_unix_s: float
    length_slots: int
    ground_station: str

    def __post_init__(self) -> None:
        if self.length_slots < 0:
            raise ValueError(f"contact {self.id}: length_slots must be >= 0")

    def end_time_unix_s(self, link: LinkParams) -> float:
        return self.start_time_unix_s + self.length_slots * link.slot_duration_s


@dataclass(frozen=True)
class ContactPlan:
    """Time-ordered sequence of contacts over one downlink period."""

    contacts: tuple[Contact, ...]
    link: LinkParams = DEFAULT_LINK

    def __post_init__(self) -> None:
        object.__setattr__(self, "contacts", tuple(self.contacts))

    def __len__(self) -> int:
        return len(self.contacts)

    @property
    def capacity_slots(self) -> int:
        return total_capacity(self)

    @property
    def max_length_slots(self) -> int:
        return max((c.length_slots for c in self.contacts), default=0)


def slots_from_duration(duration_s: float, link: LinkParams) -> int:
    """Whole bundle-slots that fit in a duration; partial slots carry nothing."""
    if not math.isfinite(duration_s) or duration_s < 0:
        raise ValueError("duration_s must be finite and non-negative")
    if float(duration_s).is_integer():
        # exact integer path so multiples of the slot duration never lose a slot
        return int(duration_s) * link.data_rate_bps // link.bundle_size_bits
    return int(math.floor(duration_s * link.data_rate_bps / link.bundle_size_bits))


def total_capacity(plan: ContactPlan) -> int:
    """Sum of contact lengths in slots; the most a plan could ever deliver."""
    return sum(c.length_slots for c in plan.contacts)


def remaining_capacity(plan: ContactPlan, current_index: int) -> int:
    """Capacity left in contacts from current_index onward."""
    if not 0 <= current_index <= len(plan):
        raise ValueError(f"current_index {current_index} outside [0, {len(plan)}]")
    return sum(c.length_slots for c in plan.contacts[current_index:])


def validate_plan(plan: ContactPlan) -> list[str]:
    """Return a list of violation messages; an empty list means the plan is usable."""
    problems: list[str] = []
    seen: dict[int, int] = {}
    for c in plan.contacts:
        if c.id in seen:
            problems.append(f"duplicate contact id {c.id}")
        seen[c.id] = c.id
    for prev, cur in zip(plan.contacts, plan.contacts[1:]):
        if cur.start_time_unix_s < prev.start_time_unix_s:
            problems.append(
                f"contacts {prev.id} and {cur.id} are out of time order"
            )
        elif cur.start_time_unix_s < prev.end_time_unix_s(plan.link):
            problems.append(f"contacts {prev.id} and {cur.id} overlap")
    return problems


@dataclass(frozen=True)
class Scenario:
    """Everything needed to roll out episodes: plan, buffer backlog, models, seed.

    weather_model and availability_model are the config objects from
    :mod:`fsosched.weather`. seed is the base seed all per-episode streams are
    derived from and must be non-negative.
    """

    plan: ContactPlan
    initial_volume_slots: int
    weather_model: object
    availability_model: object
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.initial_volume_slots <= self.plan.capacity_slots:
            raise ValueError(
                f"initial_volume_slots {self.initial_volume_slots} outside "
                f"[0, {self.plan.capacity_slots}]"
            )
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def make_equal_plan(
    n_contacts: int,
    length_slots: int,
    link: LinkParams = DEFAULT_LINK,
    start_unix_s: float = 0.0,
    period_s: float = 5700.0,
    ground_station: str = "gs-0",
) -> ContactPlan:
    """Plan of n equal contacts, one per orbital period."""
    if n_contacts < 0:
        raise ValueError("n_contacts must be >= 0")
    if length_slots * link.slot_duration_s > period_s:
        raise ValueError("contacts longer than the period would overlap")
    contacts = tuple(
        Contact(i, start_unix_s + i * period_s, length_slots, ground_station)
        for i in range(n_contacts)
    )
    return ContactPlan(contacts, link)


def make_random_plan(
    n_contacts: int,
    stations: tuple[str, ...],
    length_slots_range: tuple[int, int],
    seed: int,
    link: LinkParams = DEFAULT_LINK,
    start_unix_s: float = 0.0,
    period_s: float = 5700.0,
) -> ContactPlan:
    """Plan with random per-contact lengths and stations.

    Contacts stay one period apart so the plan always validates.
    """
    if n_contacts < 0:
        raise ValueError("n_contacts must be >= 0")
    if not stations:
        raise ValueError("need at least one station")
    lo, hi = length_slots_range
    if not 0 <= lo <= hi:
        raise ValueError("bad length_slots_range")
    if hi * link.slot_duration_s > period_s:
        raise ValueError("contacts longer than the period would overlap")
    rng = np.random.default_rng(seed)
    contacts = []
    for i in range(n_contacts):
        length = int(rng.integers(lo, hi + 1))
        station = stations[int(rng.integers(len(stations)))]
        contacts.append(Contact(i, start_unix_s + i * period_s, length, station))
    return ContactPlan(tuple(contacts), link)


def plan_to_dict(plan: ContactPlan) -> dict:
    return {
        "link": {
            "bundle_size_bits": plan.link.bundle_size_bits,
            "data_rate_bps": plan.link.data_rate_bps,
        },
        "contacts": [
            {
                "id": c.id,
                "start_time_unix_s": c.start_time_unix_s,
                "length_slots": c.length_slots,
                "ground_station": c.ground_station,
            }
            for c in plan.contacts
        ],
    }


def plan_from_dict(doc: dict) -> ContactPlan:
    try:
        link = LinkParams(
            int(doc["link"]["bundle_size_bits"]), int(doc["link"]["data_rate_bps"])
        )
        contacts = []
        for entry in doc["contacts"]:
            if "length_slots" in entry:
                length = int(entry["length_slots"])
            else:
                length = slots_from_duration(float(entry["length_s"]), link)
            contacts.append(
                Contact(
                    int(entry["id"]),
                    float(entry["start_time_unix_s"]),
                    length,
                    str(entry["ground_station"]),
                )
            )
    except KeyError as missing:
        raise ValueError(f"contact plan is missing field {missing}") from None
    return ContactPlan(tuple(contacts), link)


def save_plan(plan: ContactPlan, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan_to_dict(plan), fh, indent=2)
        fh.write("\n")


def load_plan(path: str) -> ContactPlan:
    with open(path, encoding="utf-8") as fh:
        return plan_from_dict(json.load(fh))
