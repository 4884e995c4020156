"""Write the bundled synthetic corpus (small, seeded .pb files)."""
import argparse
from pathlib import Path

from pbmeasures.pabulib import serialize_instance
from pbmeasures.synthetic import random_instance


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "corpus"))
    ap.add_argument("--count", type=int, default=6)
    ap.add_argument("--voters", type=int, default=60)
    ap.add_argument("--projects", type=int, default=8)
    ap.add_argument("--mean-ballot", type=float, default=3.0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for seed in range(args.count):
        inst = random_instance(args.voters, args.projects, args.mean_ballot, seed=seed,
                               cost_range=(5, 40))
        (out / f"synthetic_{seed:02d}.pb").write_text(serialize_instance(inst), encoding="utf-8")
        print(f"wrote synthetic_{seed:02d}.pb ({inst.n_voters} voters, {inst.n_projects} projects)")


if __name__ == "__main__":
    main()
