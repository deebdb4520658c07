#!/usr/bin/env python3
"""Writes a synthetic stand-in for motes 9-13 of the Intel Berkeley lab file.

The public dataset is not redistributed here. This excerpt mimics its line
format and rough statistics (indoor temperature drift, per-mote bias, report
dropouts, occasional garbled lines) so the real-data pipeline can be run
offline. Replace it with the real file via `sstm intel --data <path>`.
"""
import argparse
import math
import random
from datetime import datetime, timedelta

MOTES = (9, 10, 11, 12, 13)
EPOCH_SECONDS = 31.0


def temperature(t_hours: float) -> float:
    return 19.5 + 2.5 * math.sin(2 * math.pi * (t_hours - 9.0) / 24.0) + 0.4 * math.sin(t_hours * 1.7)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epochs", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=2004)
    ap.add_argument("--dropout", type=float, default=0.2)
    ap.add_argument("-o", "--output", default="data/intel_lab_excerpt.txt")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    bias = {m: rng.uniform(-0.5, 0.5) for m in MOTES}
    start = datetime(2004, 2, 28, 0, 58, 46)
    lines = []
    for epoch in range(1, args.epochs + 1):
        for mote in MOTES:
            if rng.random() < args.dropout:
                continue
            t = start + timedelta(seconds=epoch * EPOCH_SECONDS + rng.uniform(0.0, 2.0))
            hours = (t - start).total_seconds() / 3600.0
            temp = temperature(hours) + bias[mote] + rng.gauss(0.0, 0.1)
            humid = 37.0 - 0.8 * (temp - 19.5) + rng.gauss(0.0, 0.3)
            light = max(0.0, 45.0 + rng.gauss(0.0, 2.0))
            volt = 2.70 - 0.00002 * epoch + rng.gauss(0.0, 0.002)
            stamp = t.strftime("%Y-%m-%d %H:%M:%S.%f")
            lines.append(f"{stamp} {epoch} {mote} {temp:.4f} {humid:.4f} {light:.2f} {volt:.5f}")
    lines.sort(key=lambda s: s[:26])
    # The real file has truncated and garbled rows; keep a few.
    for pos in sorted(rng.sample(range(len(lines)), 6), reverse=True):
        lines.insert(pos, lines[pos].rsplit(" ", 3)[0] if pos % 2 else lines[pos].replace(" ", " ?", 1))
    with open(args.output, "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
