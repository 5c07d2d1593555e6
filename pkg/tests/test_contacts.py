"""Contact plans: slot discretization, capacity accounting, persistence."""

import pytest
from hypothesis import given, strategies as st

from fsosched import (
    Contact,
    ContactPlan,
    LinkParams,
    Scenario,
    UniformSyntheticWeather,
    GaussianVolume,
    load_plan,
    make_equal_plan,
    make_random_plan,
    plan_from_dict,
    plan_to_dict,
    save_plan,
    slots_from_duration,
    total_capacity,
    validate_plan,
)
from fsosched.contacts import DEFAULT_LINK, remaining_capacity


def test_default_link_slot_duration():
    # one bundle is 1.6e11 bits; at 8 Gbit/s that is a 20 s slot
    assert DEFAULT_LINK.bundle_size_bits == 160_000_000_000
    assert DEFAULT_LINK.data_rate_bps == 8_000_000_000
    assert DEFAULT_LINK.slot_duration_s == 20.0


def test_slots_from_duration_exact_and_floor():
    assert slots_from_duration(600.0, DEFAULT_LINK) == 30
    assert slots_from_duration(619.9, DEFAULT_LINK) == 30
    assert slots_from_duration(19.9, DEFAULT_LINK) == 0
    assert slots_from_duration(0.0, DEFAULT_LINK) == 0


@given(st.floats(min_value=0.0, max_value=1e6, allow_nan=False))
def test_slots_from_duration_never_overcounts(duration):
    slots = slots_from_duration(duration, DEFAULT_LINK)
    assert slots * DEFAULT_LINK.slot_duration_s <= duration + 1e-6
    assert (slots + 1) * DEFAULT_LINK.slot_duration_s > duration - 1e-6


def test_equal_plan_capacity():
    plan = make_equal_plan(10, 30)
    assert len(plan) == 10
    assert plan.capacity_slots == 300
    assert plan.max_length_slots == 30
    assert total_capacity(plan) == 300
    assert remaining_capacity(plan, 0) == 300
    assert remaining_capacity(plan, 9) == 30
    assert remaining_capacity(plan, 10) == 0


def test_equal_plan_spacing():
    plan = make_equal_plan(3, 30, period_s=5700.0)
    starts = [c.start_time_unix_s for c in plan.contacts]
    assert starts == [0.0, 5700.0, 11400.0]
    assert validate_plan(plan) == []


def test_random_plan_within_bounds():
    plan = make_random_plan(20, ("a", "b"), (5, 30), seed=3)
    assert len(plan) == 20
    assert all(5 <= c.length_slots <= 30 for c in plan.contacts)
    assert all(c.ground_station in ("a", "b") for c in plan.contacts)
    assert validate_plan(plan) == []


def test_random_plan_deterministic():
    a = make_random_plan(8, ("x",), (1, 10), seed=5)
    b = make_random_plan(8, ("x",), (1, 10), seed=5)
    assert a == b


def test_validate_plan_flags_overlap_and_order():
    link = DEFAULT_LINK
    overlapping = ContactPlan(
        (
            Contact(0, 0.0, 30, "gs"),
            Contact(1, 100.0, 30, "gs"),
        ),
        link,
    )
    problems = validate_plan(overlapping)
    assert problems, "contacts 600 s long starting 100 s apart must be flagged"
    out_of_order = ContactPlan(
        (
            Contact(0, 5700.0, 1, "gs"),
            Contact(1, 0.0, 1, "gs"),
        ),
        link,
    )
    assert validate_plan(out_of_order)


def test_contact_negative_length_rejected():
    with pytest.raises(ValueError):
        Contact(0, 0.0, -1, "gs")


def test_scenario_validation():
    plan = make_equal_plan(2, 10)
    with pytest.raises(ValueError):
        Scenario(plan, -1, UniformSyntheticWeather(), GaussianVolume(), seed=0)
    with pytest.raises(ValueError):
        Scenario(plan, 21, UniformSyntheticWeather(), GaussianVolume(), seed=0)
    ok = Scenario(plan, 20, UniformSyntheticWeather(), GaussianVolume(), seed=0)
    assert ok.initial_volume_slots == 20


def test_plan_round_trip_dict():
    plan = make_random_plan(6, ("a", "b"), (2, 12), seed=9)
    again = plan_from_dict(plan_to_dict(plan))
    assert again == plan


def test_plan_round_trip_file(tmp_path):
    plan = make_random_plan(6, ("a", "b"), (2, 12), seed=9, start_unix_s=1709251200.0)
    path = tmp_path / "plan.json"
    save_plan(plan, str(path))
    assert load_plan(str(path)) == plan
    # a second save produces identical bytes
    path2 = tmp_path / "plan2.json"
    save_plan(plan, str(path2))
    assert path.read_bytes() == path2.read_bytes()


def test_link_params_validation():
    with pytest.raises(ValueError):
        LinkParams(bundle_size_bits=0)
    with pytest.raises(ValueError):
        LinkParams(data_rate_bps=-1)
