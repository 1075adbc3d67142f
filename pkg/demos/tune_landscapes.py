"""Compare the tuners on every synthetic landscape preset.

Simulates a 112-core machine and gives BO and SA a budget of 6% of the
configuration space, then prints how close each gets to the exhaustive
optimum (1.00 means it found the optimum).

    python3 demos/tune_landscapes.py [--seeds 5]
"""
import argparse
import math

import numpy as np

from argotune import LandscapeTarget, SearchSpace, TunerBudget, bayes_tune, default_policy, preset_suite, simulated_annealing
from argotune.landscape import evaluate, optimum


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--cores", type=int, default=112)
    args = ap.parse_args()

    space = SearchSpace.capped(args.cores)
    k = math.ceil(0.06 * len(space))
    print(f"{len(space)} configurations, budget {k} evaluations\n")
    print(f"{'preset':<20} {'optimum':<12} {'default':>8} {'BO med':>8} {'BO worst':>9} {'SA med':>8} {'SA worst':>9}")
    for preset in preset_suite(space):
        best_cfg, best = optimum(preset, space)
        default = evaluate(preset, default_policy(space)) / best
        ratios = {}
        for name, tuner in (("bo", bayes_tune), ("sa", simulated_annealing)):
            ratios[name] = np.array([tuner(space, LandscapeTarget(preset), TunerBudget(k, k), seed=s)[1].best()[1]
                                     for s in range(args.seeds)]) / best
        print(f"{preset.name:<20} {str(best_cfg.as_tuple()):<12} {default:8.2f} "
              f"{np.median(ratios['bo']):8.3f} {ratios['bo'].max():9.3f} "
              f"{np.median(ratios['sa']):8.3f} {ratios['sa'].max():9.3f}")
    print("\nratios are best-found / optimum epoch time; lower is better")


if __name__ == "__main__":
    main()
