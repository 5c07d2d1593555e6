"""Desk-scale simulator and policy suite for optical satellite downlink
scheduling under cloud cover."""

from .contacts import (
    GB_20_BITS,
    RATE_8_GBPS,
    Contact,
    ContactPlan,
    LinkParams,
    Scenario,
    load_plan,
    make_equal_plan,
    make_random_plan,
    save_plan,
    slots_from_duration,
)
from .dqn import (
    AgentBank,
    AgentModel,
    DqnBankPolicy,
    DqnHyperparams,
    EnvFactory,
    bank_select,
    encode_observation,
    load_bank,
    load_model,
    save_bank,
    save_model,
    train_agent,
    train_bank,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    ResultRow,
    ResultTable,
    VolumeSpec,
    aggregate,
    build_policy,
    export_results,
    export_summary,
    gen_case_study_scenario,
    gen_synthetic_scenario,
    load_experiment_config,
    load_results,
    load_scenario,
    median_quartiles,
    run_experiment,
)
from .policies import (
    MultiThresholdPolicy,
    OraclePolicy,
    Policy,
    ThresholdPolicy,
    UseAllPolicy,
    calibrate_multi_threshold,
    oracle_search,
    rollout,
)
from .rewards import RewardParams, episode_reward, step_reward
from .simulator import (
    DownlinkEnv,
    EpisodeMetrics,
    Observation,
    compute_metrics,
    weighted_objective,
)
from .weather import (
    BernoulliSampled,
    CloudForecast,
    GaussianVolume,
    HistoricalWeather,
    HistoricalWeatherTrace,
    UniformSyntheticWeather,
    forecast_for_plan,
    gen_uniform_cover,
    ingest_weather_csv,
    load_forecast,
    save_forecast,
)

__version__ = "0.1.0"
