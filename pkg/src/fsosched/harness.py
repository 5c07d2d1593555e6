"""Experiment runner: paired rollouts, aggregation, and file formats.

Every policy in an experiment replays the same episodes: episode seeds are
derived from the base seed and episode index only, so realizations are
bit-identical across policies and across runs.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .contacts import (
    ContactPlan,
    Scenario,
    load_plan,
    make_equal_plan,
    save_plan,
)
from .dqn import DqnBankPolicy, load_bank
from .policies import (
    MultiThresholdPolicy,
    OraclePolicy,
    Policy,
    ThresholdPolicy,
    UseAllPolicy,
    rollout,
)
from .simulator import DEFAULT_ALPHA, DownlinkEnv
from .weather import (
    BernoulliSampled,
    GaussianVolume,
    HistoricalWeather,
    UniformSyntheticWeather,
    forecast_for_plan,
    ingest_weather_csv,
)


class ConfigError(ValueError):
    """Bad experiment, scenario, or policy configuration."""


RESULT_COLUMNS = ("policy", "episode", "seed", "w", "y", "theta_slots", "excess_slots", "z")

# Tag mixed into the per-episode RNG key for volume draws so they stay
# decoupled from the weather stream.
_VOLUME_STREAM = 2_977_011


@dataclass(frozen=True)
class ResultRow:
    policy: str
    episode: int
    seed: int
    w: float
    y: float
    theta_slots: int
    excess_slots: int
    z: float


@dataclass(frozen=True)
class ResultTable:
    rows: tuple[ResultRow, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))

    def __len__(self) -> int:
        return len(self.rows)

    def policies(self) -> tuple[str, ...]:
        seen: list[str] = []
        for row in self.rows:
            if row.policy not in seen:
                seen.append(row.policy)
        return tuple(seen)

    def values(self, policy: str, metric: str) -> list[float]:
        return [getattr(row, metric) for row in self.rows if row.policy == policy]


@dataclass(frozen=True)
class VolumeSpec:
    """Per-episode initial backlog: fixed slots, fixed fraction, or a uniform
    fraction range sampled independently per episode."""

    fixed_slots: int | None = None
    fixed_fraction: float | None = None
    uniform_fraction: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        given = sum(
            spec is not None
            for spec in (self.fixed_slots, self.fixed_fraction, self.uniform_fraction)
        )
        if given != 1:
            raise ConfigError("volume spec needs exactly one of slots/fraction/uniform")
        if self.uniform_fraction is not None:
            lo, hi = self.uniform_fraction
            if not 0.0 <= lo <= hi <= 1.0:
                raise ConfigError(f"bad uniform fraction range {self.uniform_fraction}")
        if self.fixed_fraction is not None and not 0.0 <= self.fixed_fraction <= 1.0:
            raise ConfigError(f"fraction {self.fixed_fraction} outside [0, 1]")
        if self.fixed_slots is not None and self.fixed_slots < 0:
            raise ConfigError("fixed_slots must be >= 0")

    def slots_for_episode(self, capacity: int, base_seed: int, episode: int) -> int:
        if self.fixed_slots is not None:
            return self.fixed_slots
        if self.fixed_fraction is not None:
            return _fraction_to_slots(self.fixed_fraction, capacity)
        lo, hi = self.uniform_fraction
        rng = np.random.default_rng([base_seed, episode, _VOLUME_STREAM])
        return _fraction_to_slots(float(rng.uniform(lo, hi)), capacity)


def _fraction_to_slots(fraction: float, capacity: int) -> int:
    return min(capacity, max(0, round(fraction * capacity)))


def derive_episode_seed(base_seed: int, episode: int) -> int:
    """Stable per-episode seed; independent of evaluation order."""
    return int(np.random.SeedSequence([base_seed, episode]).generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    plan: ContactPlan
    weather_model: object
    availability_model: object
    volume: VolumeSpec
    policies: tuple[Policy, ...]
    episodes: int
    base_seed: int = 0
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self) -> None:
        if self.episodes <= 0:
            raise ConfigError("episodes must be positive")
        if not self.policies:
            raise ConfigError("need at least one policy")
        names = [p.name for p in self.policies]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate policy names in {names}")


def run_experiment(config: ExperimentConfig) -> ResultTable:
    """Roll every policy over the same episode set and collect one row each."""
    template = Scenario(
        plan=config.plan,
        initial_volume_slots=0,
        weather_model=config.weather_model,
        availability_model=config.availability_model,
        seed=config.base_seed,
    )
    rows: list[ResultRow] = []
    for episode in range(config.episodes):
        episode_seed = derive_episode_seed(config.base_seed, episode)
        omega0 = config.volume.slots_for_episode(
            config.plan.capacity_slots, config.base_seed, episode
        )
        scenario = replace(template, initial_volume_slots=omega0)
        for policy in config.policies:
            env = DownlinkEnv(scenario, alpha=config.alpha)
            metrics = rollout(env, policy, episode_seed)
            rows.append(
                ResultRow(
                    policy=policy.name,
                    episode=episode,
                    seed=episode_seed,
                    w=metrics.delivery_ratio,
                    y=metrics.energy_efficiency,
                    theta_slots=metrics.utilized_time,
                    excess_slots=metrics.excess_total,
                    z=metrics.objective,
                )
            )
    return ResultTable(tuple(rows))


# -- aggregation -----------------------------------------------------------


def _midpoint_median(sorted_values: list[float]) -> float:
    n = len(sorted_values)
    if n == 0:
        raise ValueError("median of empty data")
    mid = n // 2
    if n % 2 == 1:
        return sorted_values[mid]
    return (sorted_values[mid - 1] + sorted_values[mid]) / 2.0


def median_quartiles(values: list[float]) -> tuple[float, float, float]:
    """(q1, median, q3) with the midpoint convention; quartiles are medians of
    the halves, the central element being excluded for odd counts."""
    s = sorted(values)
    med = _midpoint_median(s)
    k = len(s) // 2
    lower = s[:k]
    upper = s[len(s) - k :]
    q1 = _midpoint_median(lower) if lower else med
    q3 = _midpoint_median(upper) if upper else med
    return q1, med, q3


@dataclass(frozen=True)
class SummaryRow:
    policy: str
    metric: str
    median: float
    q1: float
    q3: float
    min: float
    max: float


def aggregate(table: ResultTable, metrics: tuple[str, ...] = ("w", "y", "z")) -> list[SummaryRow]:
    """Per-policy distribution summary, policies in first-appearance order."""
    if not table.rows:
        raise ValueError("cannot aggregate an empty table")
    out = []
    for policy in table.policies():
        for metric in metrics:
            values = table.values(policy, metric)
            q1, med, q3 = median_quartiles(values)
            out.append(SummaryRow(policy, metric, med, q1, q3, min(values), max(values)))
    return out


# -- result files ----------------------------------------------------------


def _format_cell(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def export_results(table: ResultTable, path: str, fmt: str = "csv") -> None:
    """Write rows in column order; floats keep full precision so a reload
    reproduces the table exactly and reruns are byte-identical."""
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unknown format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fmt == "csv":
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(RESULT_COLUMNS)
            for row in table.rows:
                writer.writerow(
                    [_format_cell(getattr(row, col)) for col in RESULT_COLUMNS]
                )
        else:
            for row in table.rows:
                doc = {col: getattr(row, col) for col in RESULT_COLUMNS}
                fh.write(json.dumps(doc) + "\n")


def load_results(path: str) -> ResultTable:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    rows: list[ResultRow] = []
    if text.lstrip().startswith("{"):
        for line in text.splitlines():
            if not line.strip():
                continue
            doc = json.loads(line)
            rows.append(_row_from_fields(doc))
    else:
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(header) != RESULT_COLUMNS:
            raise ValueError(f"{path}: unexpected result header {header}")
        for record in reader:
            if not record:
                continue
            rows.append(_row_from_fields(dict(zip(RESULT_COLUMNS, record))))
    return ResultTable(tuple(rows))


def _row_from_fields(doc: dict) -> ResultRow:
    return ResultRow(
        policy=str(doc["policy"]),
        episode=int(doc["episode"]),
        seed=int(doc["seed"]),
        w=float(doc["w"]),
        y=float(doc["y"]),
        theta_slots=int(doc["theta_slots"]),
        excess_slots=int(doc["excess_slots"]),
        z=float(doc["z"]),
    )


def export_summary(summaries: list[SummaryRow], path: str | None = None) -> str:
    """Summary as CSV text; optionally also written to a file."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("policy", "metric", "median", "q1", "q3", "min", "max"))
    for s in summaries:
        writer.writerow(
            (s.policy, s.metric, *(repr(v) for v in (s.median, s.q1, s.q3, s.min, s.max)))
        )
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


# -- scenario and config files ----------------------------------------------


def gen_synthetic_scenario(
    out_dir: str,
    n_contacts: int = 10,
    length_slots: int = 30,
    volume_fraction: float | None = None,
    volume_slots: int | None = None,
    availability: str = "gaussian",
    sigma_fraction: float = 0.05,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
) -> tuple[str, str]:
    """Write an equal-contact plan plus a scenario file referencing it."""
    if n_contacts <= 0:
        raise ConfigError("n_contacts must be positive")
    if length_slots <= 0:
        raise ConfigError("length_slots must be positive")
    os.makedirs(out_dir, exist_ok=True)
    plan = make_equal_plan(n_contacts, length_slots)
    plan_path = os.path.join(out_dir, "plan.json")
    save_plan(plan, plan_path)
    doc = {
        "plan_path": "plan.json",
        "weather": {"type": "uniform-synthetic"},
        "availability_model": _availability_to_dict(
            _parse_availability({"type": availability, "sigma_fraction": sigma_fraction})
        ),
        "alpha": alpha,
        "seed": seed,
    }
    if volume_slots is not None:
        doc["initial_volume_slots"] = volume_slots
    else:
        doc["initial_volume_fraction"] = 0.1 if volume_fraction is None else volume_fraction
    scenario_path = os.path.join(out_dir, "scenario.json")
    with open(scenario_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return plan_path, scenario_path


def gen_case_study_scenario(
    out_dir: str,
    plan_path: str,
    weather_csvs: dict[str, str],
    volume_fraction: float | None = None,
    volume_slots: int | None = None,
    availability: str = "bernoulli",
    sigma_fraction: float = 0.05,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
) -> str:
    """Write a scenario tying an existing plan to station weather files.

    Fails fast if a station lacks weather or a contact falls outside its
    trace.
    """
    plan = load_plan(plan_path)
    traces = {
        station: ingest_weather_csv(path, station) for station, path in weather_csvs.items()
    }
    stations = {c.ground_station for c in plan.contacts}
    missing = stations - set(traces)
    if missing:
        raise ConfigError(f"no weather file for stations {sorted(missing)}")
    forecast_for_plan(traces, plan)  # raises if coverage is incomplete
    os.makedirs(out_dir, exist_ok=True)
    doc = {
        "plan_path": os.path.abspath(plan_path),
        "weather": {
            "type": "historical",
            "csv_paths": {s: os.path.abspath(p) for s, p in weather_csvs.items()},
        },
        "availability_model": _availability_to_dict(
            _parse_availability({"type": availability, "sigma_fraction": sigma_fraction})
        ),
        "alpha": alpha,
        "seed": seed,
    }
    if volume_slots is not None:
        doc["initial_volume_slots"] = volume_slots
    else:
        doc["initial_volume_fraction"] = 0.5 if volume_fraction is None else volume_fraction
    scenario_path = os.path.join(out_dir, "scenario.json")
    with open(scenario_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return scenario_path


def _parse_availability(spec) -> GaussianVolume | BernoulliSampled:
    if isinstance(spec, str):
        spec = {"type": spec}
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError(f"bad availability model spec {spec!r}")
    kind = spec["type"]
    if kind == "gaussian":
        return GaussianVolume(float(spec.get("sigma_fraction", 0.05)))
    if kind == "bernoulli":
        return BernoulliSampled()
    raise ConfigError(f"unknown availability model {kind!r}")


def _availability_to_dict(model) -> dict:
    if isinstance(model, GaussianVolume):
        return {"type": "gaussian", "sigma_fraction": model.sigma_fraction}
    if isinstance(model, BernoulliSampled):
        return {"type": "bernoulli"}
    raise ConfigError(f"unknown availability model {model!r}")


def _parse_weather(spec: dict, base_dir: str):
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError(f"bad weather spec {spec!r}")
    kind = spec["type"]
    if kind == "uniform-synthetic":
        return UniformSyntheticWeather()
    if kind == "historical":
        paths = spec.get("csv_paths")
        if not isinstance(paths, dict) or not paths:
            raise ConfigError("historical weather needs csv_paths {station: path}")
        traces = {
            station: ingest_weather_csv(_resolve(path, base_dir), station)
            for station, path in paths.items()
        }
        return HistoricalWeather(traces)
    raise ConfigError(f"unknown weather type {kind!r}")


def _resolve(path: str, base_dir: str) -> str:
    return path if os.path.isabs(path) else os.path.join(base_dir, path)


def load_scenario(path: str) -> tuple[Scenario, float]:
    """Read a scenario file; returns the scenario and its alpha."""
    base_dir = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as bad:
        raise ConfigError(f"{path}: invalid JSON: {bad}") from None
    try:
        plan = load_plan(_resolve(doc["plan_path"], base_dir))
        weather = _parse_weather(doc["weather"], base_dir)
        availability = _parse_availability(doc["availability_model"])
        alpha = float(doc.get("alpha", DEFAULT_ALPHA))
        seed = int(doc.get("seed", 0))
        if "initial_volume_slots" in doc:
            volume = int(doc["initial_volume_slots"])
        elif "initial_volume_fraction" in doc:
            volume = _fraction_to_slots(float(doc["initial_volume_fraction"]), plan.capacity_slots)
        else:
            raise ConfigError(f"{path}: missing initial volume")
    except KeyError as missing:
        raise ConfigError(f"{path}: missing field {missing}") from None
    try:
        scenario = Scenario(plan, volume, weather, availability, seed)
    except ValueError as bad:
        raise ConfigError(f"{path}: {bad}") from None
    return scenario, alpha


def build_policy(spec: dict, base_dir: str = ".") -> Policy:
    """Instantiate a policy from its config dict."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError(f"bad policy spec {spec!r}")
    kind = spec["type"]
    name = spec.get("name")
    if kind == "threshold":
        if "nu" not in spec:
            raise ConfigError("threshold policy needs nu")
        return ThresholdPolicy(float(spec["nu"]), name=name)
    if kind == "multi_threshold":
        if "path" in spec:
            with open(_resolve(spec["path"], base_dir), encoding="utf-8") as fh:
                stored = json.load(fh)
            bands = stored.get("bands")
        else:
            bands = spec.get("bands")
        if not bands:
            raise ConfigError("multi_threshold policy needs bands")
        bands = tuple((float(u), float(nu)) for u, nu in bands)
        return MultiThresholdPolicy(bands, name=name or "multi_threshold")
    if kind == "use_all":
        policy = UseAllPolicy()
        if name:
            policy.name = name
        return policy
    if kind == "oracle":
        policy = OraclePolicy()
        if name:
            policy.name = name
        return policy
    if kind == "dqn":
        if "model_path" not in spec:
            raise ConfigError("dqn policy needs model_path")
        bank = load_bank(_resolve(spec["model_path"], base_dir))
        return DqnBankPolicy(bank, name=name or "dqn")
    raise ConfigError(f"unknown policy type {kind!r}")


def load_experiment_config(path: str) -> ExperimentConfig:
    """Read an experiment file: scenario reference or inline pieces + policies."""
    base_dir = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as bad:
        raise ConfigError(f"{path}: invalid JSON: {bad}") from None
    if "scenario_path" in doc:
        scenario, alpha = load_scenario(_resolve(doc["scenario_path"], base_dir))
        plan = scenario.plan
        weather = scenario.weather_model
        availability = scenario.availability_model
        default_volume = {"slots": scenario.initial_volume_slots}
        base_seed = scenario.seed
    else:
        try:
            plan = load_plan(_resolve(doc["plan_path"], base_dir))
            weather = _parse_weather(doc["weather"], base_dir)
            availability = _parse_availability(doc["availability_model"])
        except KeyError as missing:
            raise ConfigError(f"{path}: missing field {missing}") from None
        default_volume = None
        alpha = DEFAULT_ALPHA
        base_seed = 0
    volume_doc = doc.get("volume", default_volume)
    if volume_doc is None:
        raise ConfigError(f"{path}: missing volume spec")
    volume = _parse_volume(volume_doc)
    alpha = float(doc.get("alpha", alpha))
    base_seed = int(doc.get("seed", base_seed))
    episodes = int(doc.get("episodes", 0))
    policy_specs = doc.get("policies")
    if not policy_specs:
        raise ConfigError(f"{path}: missing policies")
    policies = tuple(build_policy(p, base_dir) for p in policy_specs)
    return ExperimentConfig(
        plan=plan,
        weather_model=weather,
        availability_model=availability,
        volume=volume,
        policies=policies,
        episodes=episodes,
        base_seed=base_seed,
        alpha=alpha,
    )


def _parse_volume(doc: dict) -> VolumeSpec:
    if not isinstance(doc, dict):
        raise ConfigError(f"bad volume spec {doc!r}")
    if "slots" in doc:
        return VolumeSpec(fixed_slots=int(doc["slots"]))
    if "fraction" in doc:
        return VolumeSpec(fixed_fraction=float(doc["fraction"]))
    if "uniform_fraction" in doc:
        lo, hi = doc["uniform_fraction"]
        return VolumeSpec(uniform_fraction=(float(lo), float(hi)))
    raise ConfigError(f"volume spec needs slots, fraction, or uniform_fraction: {doc!r}")
