"""Accuracy and parameter count across k for the tiny3 fixture, optionally over several seeds.

Scores are computed once per trained model and only the selection is redone per k.

    python3 scripts/run_sweep.py --seeds 0 1 2 3 4 --out runs/sweep.csv
"""
import argparse
import csv
import sys
from dataclasses import replace

from ocnna.cli import parse_k_grid
from ocnna.fixture import DeskFixture, build_desk_fixture
from ocnna.graph import count_parameters
from ocnna.metrics import evaluate
from ocnna.pruner import PruneConfig, apply_prune, plan_prune, score_model, select_all


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--k-grid", type=parse_k_grid, default=parse_k_grid("0:75:5"))
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["seed", "k", "base_accuracy", "accuracy", "params", "rpr"])
    for seed in args.seeds:
        cfg = DeskFixture(seed=seed, train=replace(DeskFixture().train, seed=seed))
        fx = build_desk_fixture(cfg)
        scores = score_model(fx.model, fx.d_var)
        for k in args.k_grid:
            pruned = apply_prune(fx.model, plan_prune(fx.model, select_all(scores, PruneConfig(k=k))))
            rep = evaluate(fx.model, pruned, fx.test_set)
            writer.writerow([seed, f"{k:g}", f"{rep.base_accuracy:.4f}", f"{rep.pruned_accuracy:.4f}",
                             count_parameters(pruned), f"{rep.rpr:.4f}"])
            out.flush()
    if out is not sys.stdout:
        out.close()


if __name__ == "__main__":
    main()
