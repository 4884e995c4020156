"""Print the information package of every losing project of a .pb file."""
import argparse

from pbmeasures.measures import OutcomeAnalysis
from pbmeasures.model import TieBreakOrder
from pbmeasures.pabulib import load_instance
from pbmeasures.report import build_package, losing_projects
from pbmeasures.sampling import SamplingConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("file")
    ap.add_argument("--rule", default="eq")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--exhaustive-cap", type=int, default=1000,
                    help="enumerate subsets exactly up to this many, sample beyond")
    args = ap.parse_args()

    inst, _ = load_instance(args.file)
    order = TieBreakOrder.file_order(inst)
    an = OutcomeAnalysis(inst, args.rule, order)
    cfg = SamplingConfig(samples=args.samples, seed=args.seed, exhaustive_cap=args.exhaustive_cap)
    print(f"funded: {', '.join(an.outcome.selected)}")
    for pid in losing_projects(an):
        pkg = build_package(inst, args.rule, order, pid, cfg, analysis=an)
        cells = []
        for m in pkg.measures:
            cells.append(f"{m.kind.value}={m.raw}" if m.defined else f"{m.kind.value}=undefined")
        print(f"{pid:>6} cost {pkg.cost} score {pkg.score}: " + "  ".join(cells))


if __name__ == "__main__":
    main()
