#!/usr/bin/env python3
"""Generate synthetic station cloud-cover CSVs for the two-trace case study.

Station A mixes clear and overcast hours (U-shaped cover distribution) and is
meant for training; station B skews clear and is the held-out evaluation
trace. Both files use the ingest format: timestamp_iso8601,cloud_cover_percent.
"""

import argparse
import csv
from datetime import datetime, timedelta, timezone

import numpy as np

EPOCH = datetime(2024, 3, 1, tzinfo=timezone.utc)
HOURS = 17


def write_trace(path: str, seed: int, a: float, b: float, hours: int = HOURS) -> None:
    rng = np.random.default_rng(seed)
    covers = np.clip(rng.beta(a, b, hours), 0.0, 1.0)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp_iso8601", "cloud_cover_percent"])
        for k, cover in enumerate(covers):
            stamp = (EPOCH + timedelta(hours=k)).strftime("%Y-%m-%dT%H:%M:%SZ")
            writer.writerow([stamp, f"{100.0 * cover:.4f}"])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default=".", help="directory for the CSV files")
    parser.add_argument("--seed-a", type=int, default=100)
    parser.add_argument("--seed-b", type=int, default=201)
    parser.add_argument("--hours", type=int, default=HOURS)
    args = parser.parse_args()
    write_trace(f"{args.out_dir}/station_a.csv", args.seed_a, 0.8, 0.8, args.hours)
    write_trace(f"{args.out_dir}/station_b.csv", args.seed_b, 1.2, 2.8, args.hours)
    print(f"wrote {args.out_dir}/station_a.csv and {args.out_dir}/station_b.csv")


if __name__ == "__main__":
    main()
