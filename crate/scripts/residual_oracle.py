#!/usr/bin/env python3
"""Monte Carlo oracle for residual frame-loss rates after concealment.

Estimates, independently of the Rust implementation, the mean and the
run-to-run spread of the residual loss rate (fraction of frames that are
still not bit-exact after concealment) for two receiver strategies over
a two-state Gilbert loss channel:

  piggyback   a lost frame is recovered bit-exactly iff the next frame
              arrives, so the residual indicator for frame i is
              lost(i) AND lost(i+1); a lost frame at end of stream stays
              unrecovered.
  repetition  repeating a neighbour is never bit-exact, so the residual
              rate equals the raw frame loss rate.

Channel: two-state Markov chain, start in Good, one uniform draw per
frame step:
    P(loss | previous good) = p_gb
    P(loss | previous lost) = p_bb
Closed forms:
    pi_B                = p_gb / (p_gb + 1 - p_bb)
    residual(piggyback) = pi_B * p_bb
    residual(repetition)= pi_B

The printed sigma values are meant to be frozen into test code as the
tolerance for a mean over `--mean-of` independent runs.

Usage:
    python3 scripts/residual_oracle.py [--runs 400] [--frames 100000]
                                       [--p-gb 0.125] [--p-bb 0.5]
                                       [--mean-of 10] [--seed 20240901]
"""

import argparse
import math

import numpy as np


def simulate_runs(runs, frames, p_gb, p_bb, seed):
    """Walk `runs` independent chains in parallel, one step per frame."""
    rng = np.random.default_rng(seed)
    lost_prev = np.zeros(runs, dtype=bool)  # start in Good
    lost_count = np.zeros(runs, dtype=np.int64)
    pair_count = np.zeros(runs, dtype=np.int64)  # lost(i) & lost(i+1)
    tail_lost = np.zeros(runs, dtype=bool)

    first = True
    for _ in range(frames):
        u = rng.random(runs)
        threshold = np.where(lost_prev, p_bb, p_gb)
        lost = u < threshold
        lost_count += lost
        if not first:
            pair_count += tail_lost & lost
        tail_lost = lost
        lost_prev = lost
        first = False

    # a lost final frame has no successor and stays unrecovered
    piggyback_residual = (pair_count + tail_lost) / frames
    repetition_residual = lost_count / frames
    return piggyback_residual, repetition_residual


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=400)
    ap.add_argument("--frames", type=int, default=100_000)
    ap.add_argument("--p-gb", type=float, default=0.125)
    ap.add_argument("--p-bb", type=float, default=0.5)
    ap.add_argument("--mean-of", type=int, default=10)
    ap.add_argument("--seed", type=int, default=20240901)
    args = ap.parse_args()

    pi_b = args.p_gb / (args.p_gb + 1.0 - args.p_bb)
    expect_pb = pi_b * args.p_bb
    expect_rep = pi_b

    pb, rep = simulate_runs(args.runs, args.frames, args.p_gb, args.p_bb, args.seed)

    def report(name, samples, expected):
        mean = samples.mean()
        sd_run = samples.std(ddof=1)
        sd_mean = sd_run / math.sqrt(args.mean_of)
        print(f"{name}:")
        print(f"  closed form          = {expected:.6f}")
        print(f"  empirical mean       = {mean:.6f}  ({args.runs} runs x {args.frames} frames)")
        print(f"  sigma per run        = {sd_run:.6e}")
        print(f"  sigma of mean-of-{args.mean_of:<3d} = {sd_mean:.6e}")
        print(f"  3 sigma band         = [{expected - 3 * sd_mean:.6f}, {expected + 3 * sd_mean:.6f}]")
        return sd_mean

    print(f"channel: p_gb={args.p_gb} p_bb={args.p_bb} pi_B={pi_b:.6f}")
    sd_pb = report("piggyback residual", pb, expect_pb)
    sd_rep = report("repetition residual", rep, expect_rep)

    print()
    print("frozen constants for test code:")
    print(f"  PIGGYBACK_RESIDUAL = {expect_pb};")
    print(f"  PIGGYBACK_SIGMA = {sd_pb:.6e};")
    print(f"  REPETITION_RESIDUAL = {expect_rep};")
    print(f"  REPETITION_SIGMA = {sd_rep:.6e};")


if __name__ == "__main__":
    main()
