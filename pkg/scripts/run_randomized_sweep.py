#!/usr/bin/env python3
"""Seed sweep of the hidden-basis oracle: how often the low-correlation
event holds, and whether the floor held whenever it did."""

import argparse

from resistor.harness import RunConfig, sweep
from resistor.instance import RANDOMIZED


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--T", type=int, default=4)
    parser.add_argument("--k", type=int, default=1)
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--fail-prob", type=float, default=0.2)
    parser.add_argument("--method", default="psg", choices=["psg", "agd", "cubic"])
    parser.add_argument("--base-seed", type=int, default=0)
    args = parser.parse_args()

    report = sweep(
        RunConfig(
            mode=RANDOMIZED,
            T=args.T,
            k=args.k,
            method=args.method,
            seed=args.base_seed,
            fail_prob=args.fail_prob,
            mc_samples=10_000,
        ),
        args.seeds,
    )
    for o in report.outcomes:
        held = "held" if o.event_e_held else "VIOLATED"
        print(f"seed {o.seed:>4}: event {held:>8}, min gap {o.min_gap:.4f} (floor {o.floor:.4f})")
    print(
        f"event held {report.held_count}/{report.n_seeds} "
        f"(threshold {report.held_threshold:.4f}): {'PASS' if report.passed else 'FAIL'}"
    )
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
