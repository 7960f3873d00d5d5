"""Support-recovery rate of the classical solver vs threshold scale.

For each threshold scale, runs seeded trials of: draw a sparse pixel-aligned
target, render it noiselessly, solve with 50 splitting iterations using
rho = scale * max(image), and check that every true center lies within 1 px
of a dominant separated peak of |p|.  Prints one line per scale.

Usage: python scripts/sweep_recovery.py [--trials 100] [--scales 0.05,0.15,0.3]
"""

import argparse
import sys

import numpy as np

from psckit.core import RadarConfig, xy_to_pixel
from psckit.forward_model import build_dictionary
from psckit.hqs import HqsParams, hqs_solve
from psckit.simulator import SimConfig, gen_target, render_sample


def dominant_peaks(grid, count):
    # greedy 3x3 non-max suppression
    work = np.array(grid, dtype=float)
    peaks = []
    for _ in range(count):
        i, j = np.unravel_index(int(np.argmax(work)), work.shape)
        if work[i, j] <= 0.0:
            break
        peaks.append((i, j))
        work[max(0, i - 1):i + 2, max(0, j - 1):j + 2] = 0.0
    return peaks


def recovered(truth, result, radar):
    peaks = dominant_peaks(np.abs(result.p.data), len(truth.centers))
    return all(
        any(max(abs(i - pi), abs(j - pj)) <= 1 for pi, pj in peaks)
        for i, j in (xy_to_pixel(c.x, c.y, radar) for c in truth.centers))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--scales", default="0.05,0.1,0.15,0.25,0.4",
                    help="comma-separated rho / max(image) ratios")
    ap.add_argument("--iters", type=int, default=50)
    ap.add_argument("--mu", type=float, default=0.9)
    ap.add_argument("--printed", action="store_true",
                    help="use the as-printed p-update instead of the proximal one")
    args = ap.parse_args(argv)

    radar = RadarConfig(1e10, 6e7, 48, 0.0, 6e-3, 48, 32.0, 32, 32)
    config = SimConfig(num_targets=1, centers_per_target=(1, 5),
                       min_separation_px=5.0, seed=0, radar=radar)
    dic = build_dictionary(radar)

    for scale in (float(s) for s in args.scales.split(",")):
        hits = 0
        for trial in range(args.trials):
            rng = np.random.default_rng(trial)
            truth = gen_target(config, rng)
            sample = render_sample(truth, config, dic=dic, rng=rng)
            params = HqsParams(t=0.001, rho=scale * float(sample.image.data.max()),
                               mu=args.mu, num_iters=args.iters,
                               proximal_mode=not args.printed)
            if recovered(truth, hqs_solve(dic, sample.image.data, params), radar):
                hits += 1
        print(f"rho = {scale:.2f} * max(image): {hits}/{args.trials} recovered")
    return 0


if __name__ == "__main__":
    sys.exit(main())
