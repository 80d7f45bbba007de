"""Train the frozen tiny3 fixture, prune it at one k and print the metrics table.

    python3 scripts/run_fixture.py --k 40 --out runs/fixture
"""
import argparse
import json
import time
from dataclasses import replace
from pathlib import Path

from ocnna.fixture import DeskFixture, build_desk_fixture
from ocnna.io import save_model
from ocnna.metrics import evaluate
from ocnna.pruner import PruneConfig, ocnna, prune_manifest


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--k", type=float, default=40.0)
    ap.add_argument("--seed", type=int, default=0, help="fixture seed (0 is the frozen one)")
    ap.add_argument("--out", type=Path, default=None, help="directory for model, datasets and reports")
    args = ap.parse_args()

    cfg = DeskFixture(seed=args.seed, train=replace(DeskFixture().train, seed=args.seed))
    t0 = time.perf_counter()
    fx = build_desk_fixture(cfg)
    print(f"trained in {time.perf_counter() - t0:.1f}s, final loss {fx.history[-1]:.4f}")
    pruned, reports = ocnna(fx.model, fx.d_var, PruneConfig(k=args.k))
    report = evaluate(fx.model, pruned, fx.test_set)
    print(report.table())
    for r in reports:
        print(f"layer {r.layer_index}: kept {len(r.kept_indices)}/{len(r.scores)} threshold {r.threshold:.4f}")
    if args.out:
        fx.save(args.out)
        save_model(pruned, args.out / f"tiny3_k{args.k:g}.ocnn")
        (args.out / "metrics.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        (args.out / "manifest.json").write_text(
            json.dumps(prune_manifest(fx.model, pruned, reports), indent=2) + "\n")


if __name__ == "__main__":
    main()
