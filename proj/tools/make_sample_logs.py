#!/usr/bin/env python3
"""Writes small synthetic delivery logs drawn from the built-in reference weekday.

Usage: make_sample_logs.py [--days N] [--seed S] [--out DIR]
"""
import argparse
import csv
import datetime as dt
import math
import random
from pathlib import Path

LAMBDA = [3.0, 4.5, 5.0, 2.0, 4.5, 5.5, 5.5, 2.0, 3.0, 4.5, 5.5, 6.0, 5.5, 5.0, 5.0, 4.5,
          5.0, 5.5, 5.5, 5.5, 5.0, 4.5, 4.5, 1.5, 3.5, 5.0, 5.0, 4.0, 3.5, 3.5, 3.0, 2.5]
P_VARIETY = [0.06, 0.0, 0.2, 0.74]
P_WEIGHT = [0.80, 0.14, 0.04, 0.015, 0.005]
OPEN = dt.timedelta(hours=8, minutes=30)


def poisson(rng, mean):
    # Knuth's method; the means here are small.
    limit, k, p = math.exp(-mean), 0, 1.0
    while True:
        p *= rng.random()
        if p <= limit:
            return k
        k += 1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--days", type=int, default=5)
    ap.add_argument("--seed", type=int, default=2017)
    ap.add_argument("--out", default="data")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    first = dt.date(2017, 9, 18)  # a Monday
    deliveries, totals = [], {}
    for d in range(args.days):
        day = first + dt.timedelta(days=d)
        start = dt.datetime.combine(day, dt.time()) + OPEN
        for k, lam in enumerate(LAMBDA):
            for _ in range(poisson(rng, lam)):
                when = start + dt.timedelta(minutes=30 * k + rng.uniform(0, 29.99))
                cls = rng.choices(range(5, 30, 5), weights=P_WEIGHT)[0]
                load = round(rng.uniform(cls - 4.9, cls), 1)
                variety = rng.choices(range(1, 5), weights=P_VARIETY)[0]
                deliveries.append((when, load, variety))
                totals[(day, variety)] = totals.get((day, variety), 0.0) + load
    deliveries.sort()

    with open(out / "deliveries.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["timestamp", "load_tonnes", "variety"])
        for when, load, variety in deliveries:
            w.writerow([when.strftime("%Y-%m-%d %H:%M:%S"), f"{load:.1f}", variety])
    with open(out / "variety_totals.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["date", "variety", "total_tonnes"])
        for (day, variety), tonnes in sorted(totals.items()):
            w.writerow([day.isoformat(), variety, f"{tonnes:.1f}"])


if __name__ == "__main__":
    main()
