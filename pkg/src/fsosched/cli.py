"""Command line entry point.

Subcommands: gen-scenario, train, calibrate, eval, oracle, report.
Exit codes: 0 success, 1 configuration or I/O problem, 2 runtime failure.
Diagnostics go to stderr; results go to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from .dqn import (
    DEFAULT_VOLUME_EDGES,
    DqnHyperparams,
    EnvFactory,
    save_bank,
    train_bank,
)
from .harness import (
    ConfigError,
    aggregate,
    export_results,
    export_summary,
    gen_case_study_scenario,
    gen_synthetic_scenario,
    load_experiment_config,
    load_results,
    load_scenario,
    run_experiment,
)
from .policies import DEFAULT_BAND_EDGES, DEFAULT_THRESHOLD_GRID, calibrate_multi_threshold, oracle_search
from .simulator import DownlinkEnv


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}")


def _station_path(text: str) -> tuple[str, str]:
    station, sep, path = text.partition("=")
    if not sep or not station or not path:
        raise argparse.ArgumentTypeError(f"expected STATION=CSV_PATH, got {text!r}")
    return station, path


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the seed")
    common.add_argument(
        "--alpha", type=float, default=argparse.SUPPRESS, help="objective weight on delivery ratio"
    )

    parser = argparse.ArgumentParser(
        prog="fsosched",
        description="Optical downlink scheduling: scenarios, policies, training, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser(
        "gen-scenario", parents=[common], help="write a plan/scenario file pair"
    )
    p.add_argument("--kind", choices=("synthetic", "case-study"), default="synthetic")
    p.add_argument("--out-dir", default=".", help="directory for the generated files")
    p.add_argument("--contacts", type=int, default=10, help="contact count (synthetic)")
    p.add_argument("--length-slots", type=int, default=30, help="slots per contact (synthetic)")
    p.add_argument("--volume-fraction", type=float, default=None)
    p.add_argument("--volume-slots", type=int, default=None)
    p.add_argument("--availability", choices=("gaussian", "bernoulli"), default=None)
    p.add_argument("--sigma-fraction", type=float, default=0.05)
    p.add_argument("--plan", default=None, help="existing plan file (case-study)")
    p.add_argument(
        "--weather",
        type=_station_path,
        action="append",
        default=[],
        metavar="STATION=CSV",
        help="station weather file (case-study, repeatable)",
    )
    p.set_defaults(func=cmd_gen_scenario)

    p = sub.add_parser("train", parents=[common], help="train an agent bank on a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out-dir", default="bank", help="directory for model files")
    p.add_argument("--episodes", type=int, default=None, help="training episodes per agent")
    p.add_argument(
        "--edges",
        type=_float_list,
        default=DEFAULT_VOLUME_EDGES,
        help="volume band edges, comma separated, ending at 1.0",
    )
    p.set_defaults(func=cmd_train)

    p = sub.add_parser(
        "calibrate", parents=[common], help="fit per-band thresholds on a scenario"
    )
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", default="policy.json", help="where to write the fitted policy")
    p.add_argument("--scenarios-per-band", type=int, default=30)
    p.add_argument("--candidates", type=_float_list, default=DEFAULT_THRESHOLD_GRID)
    p.add_argument("--edges", type=_float_list, default=DEFAULT_BAND_EDGES)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("eval", parents=[common], help="run an experiment config")
    p.add_argument("--config", required=True, help="experiment file")
    p.add_argument("--out", default="results.csv", help="per-episode result rows")
    p.add_argument("--format", choices=("csv", "jsonl"), default=None)
    p.add_argument("--summary", default=None, help="also write the aggregate table here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        "oracle", parents=[common], help="exhaustive best actions for one episode"
    )
    p.add_argument("--scenario", required=True)
    p.add_argument("--episode-seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", parents=[common], help="aggregate a result file")
    p.add_argument("--results", required=True, help="rows written by eval")
    p.add_argument("--out", default=None, help="also write the summary CSV here")
    p.set_defaults(func=cmd_report)

    return parser


def cmd_gen_scenario(args) -> int:
    seed = getattr(args, "seed", 0)
    alpha = getattr(args, "alpha", 0.9)
    if args.kind == "synthetic":
        availability = args.availability or "gaussian"
        plan_path, scenario_path = gen_synthetic_scenario(
            args.out_dir,
            n_contacts=args.contacts,
            length_slots=args.length_slots,
            volume_fraction=args.volume_fraction,
            volume_slots=args.volume_slots,
            availability=availability,
            sigma_fraction=args.sigma_fraction,
            alpha=alpha,
            seed=seed,
        )
        print(plan_path)
        print(scenario_path)
        return 0
    if not args.plan:
        raise ConfigError("case-study generation needs --plan")
    if not args.weather:
        raise ConfigError("case-study generation needs at least one --weather STATION=CSV")
    availability = args.availability or "bernoulli"
    scenario_path = gen_case_study_scenario(
        args.out_dir,
        plan_path=args.plan,
        weather_csvs=dict(args.weather),
        volume_fraction=args.volume_fraction,
        volume_slots=args.volume_slots,
        availability=availability,
        sigma_fraction=args.sigma_fraction,
        alpha=alpha,
        seed=seed,
    )
    print(scenario_path)
    return 0


def cmd_train(args) -> int:
    scenario, alpha = load_scenario(args.scenario)
    alpha = getattr(args, "alpha", alpha)
    seed = getattr(args, "seed", scenario.seed)
    hyper = DqnHyperparams() if args.episodes is None else DqnHyperparams(episodes=args.episodes)
    factory = EnvFactory(scenario, alpha=alpha)
    bank = train_bank(factory, volume_edges=args.edges, hyper=hyper, seed=seed)
    manifest = save_bank(bank, args.out_dir)
    print(manifest)
    return 0


def cmd_calibrate(args) -> int:
    template, alpha = load_scenario(args.scenario)
    alpha = getattr(args, "alpha", alpha)
    seed = getattr(args, "seed", template.seed)
    capacity = template.plan.capacity_slots
    edges = args.edges
    scenarios = []
    lo = 0.0
    for band, hi in enumerate(edges):
        for j in range(args.scenarios_per_band):
            rng = np.random.default_rng([seed, band, j])
            fraction = lo + (hi - lo) * float(rng.uniform())
            slots = min(capacity, max(1, round(fraction * capacity)))
            weather_seed = int(np.random.SeedSequence([seed, band, j, 1]).generate_state(1)[0])
            scenarios.append(
                replace(template, initial_volume_slots=slots, seed=weather_seed)
            )
        lo = hi
    policy = calibrate_multi_threshold(
        scenarios, candidate_thresholds=args.candidates, band_edges=edges, alpha=alpha
    )
    doc = {"type": "multi_threshold", "bands": [list(b) for b in policy.bands]}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(json.dumps(doc))
    return 0


def cmd_eval(args) -> int:
    config = load_experiment_config(args.config)
    if hasattr(args, "seed"):
        config = replace(config, base_seed=args.seed)
    if hasattr(args, "alpha"):
        config = replace(config, alpha=args.alpha)
    fmt = args.format or ("jsonl" if args.out.endswith(".jsonl") else "csv")
    table = run_experiment(config)
    export_results(table, args.out, fmt=fmt)
    print(f"wrote {len(table)} rows to {args.out}", file=sys.stderr)
    summary = aggregate(table)
    text = export_summary(summary, args.summary)
    print(text, end="")
    return 0


def cmd_oracle(args) -> int:
    scenario, alpha = load_scenario(args.scenario)
    alpha = getattr(args, "alpha", alpha)
    if hasattr(args, "seed"):
        scenario = replace(scenario, seed=args.seed)
    env = DownlinkEnv(scenario, alpha=alpha)
    env.reset(args.episode_seed)
    plan = oracle_search(scenario, env.realization, alpha)
    doc = {
        "episode_seed": args.episode_seed,
        "actions": list(plan.actions),
        "w": plan.achieved.delivery_ratio,
        "y": plan.achieved.energy_efficiency,
        "z": plan.achieved.objective,
        "theta_slots": plan.achieved.utilized_time,
        "excess_slots": plan.achieved.excess_total,
    }
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(args.out)
    else:
        print(text, end="")
    return 0


def cmd_report(args) -> int:
    table = load_results(args.results)
    text = export_summary(aggregate(table), args.out)
    print(text, end="")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) is None:
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # sequencing bugs, numeric blowups
        print(f"runtime error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
