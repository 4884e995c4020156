"""Timing of the EQ run and the non-sampling measures on a 10k-voter synthetic instance."""
import argparse
import time

from pbmeasures.measures import NON_SAMPLING, OutcomeAnalysis, compute_measure
from pbmeasures.model import TieBreakOrder
from pbmeasures.synthetic import random_instance


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--voters", type=int, default=10_000)
    ap.add_argument("--projects", type=int, default=100)
    ap.add_argument("--mean-ballot", type=float, default=5.0)
    ap.add_argument("--rule", default="eq")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    inst = random_instance(args.voters, args.projects, args.mean_ballot, seed=args.seed)
    order = TieBreakOrder.file_order(inst)
    t0 = time.perf_counter()
    an = OutcomeAnalysis(inst, args.rule, order)
    print(f"rule run: {time.perf_counter() - t0:.3f} s, {len(an.outcome.selected)} funded")
    losing = [p.id for p in inst.projects if p.id not in an.outcome.selected]
    total = 0.0
    for kind in NON_SAMPLING:
        t1 = time.perf_counter()
        worst = (0.0, None)
        for pid in losing:
            t2 = time.perf_counter()
            compute_measure(kind, inst, args.rule, order, pid, analysis=an)
            worst = max(worst, (time.perf_counter() - t2, pid))
        spent = time.perf_counter() - t1
        total += spent
        print(f"{kind.value:14s} {spent:7.2f} s  (slowest project {worst[1]}: {worst[0]:.2f} s)")
    print(f"total {total:.1f} s over {len(losing)} losing projects")


if __name__ == "__main__":
    main()
