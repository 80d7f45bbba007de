"""Command-line entry point.

Exit codes: 0 success, 1 usage, 2 IO/format, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .data import split_dataset
from .errors import DimensionError, FormatError, NumericError
from .graph import count_parameters, infer_shapes
from .io import load_dataset, load_model, save_dataset, save_model
from .metrics import evaluate, rpr
from .parallel import default_workers
from .pruner import PruneConfig, apply_prune, plan_prune, prune_manifest, score_model, select_all
from .trainer import PRESETS, TrainConfig, build_model, build_preset, make_synthetic_dataset, train

log = logging.getLogger("ocnna")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_K = 40.0
DEFAULT_DVAR_FRACTION = 0.10


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _k(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"k must be a number, got {text!r}") from None
    if not 0 <= value < 100:
        raise argparse.ArgumentTypeError(f"k must lie in [0, 100), got {text}")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"fraction must lie in (0, 1), got {text}")
    return value


def _path(text: str) -> str:
    if not text:
        raise argparse.ArgumentTypeError("path must not be empty")
    return text


def parse_k_grid(text: str) -> list[float]:
    """``"10,20,40"`` or an inclusive range ``"10:75:5"``."""
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0:
                raise ValueError
            start, stop, step = parts
            grid, i = [], 0
            while start + i * step <= stop + 1e-9:
                grid.append(round(start + i * step, 10))
                i += 1
        else:
            grid = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k grid {text!r}; use 'a:b:step' or 'k1,k2,...'") from None
    if not grid or any(not 0 <= k < 100 for k in grid):
        raise argparse.ArgumentTypeError(f"every k in the grid must lie in [0, 100): {text!r}")
    return grid


def _fmt_k(k: float):
    return int(k) if float(k).is_integer() else k


def _load_dvar(args):
    d = load_dataset(args.dvar)
    if args.dvar_fraction is not None:
        d, _ = split_dataset(d, args.dvar_fraction, args.seed)
    return d


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# -- commands -------------------------------------------------------------------

def cmd_synth(args):
    d = make_synthetic_dataset(args.classes, args.per_class, args.size, args.seed, noise=args.noise)
    if args.count is not None:
        if args.count > len(d):
            raise UsageError(f"--count {args.count} exceeds the {len(d)} generated samples")
        d = d.subset(range(args.count))
    save_dataset(d, args.out)
    print(f"wrote {len(d)} samples ({d.class_count} classes) to {args.out}")


def cmd_split(args):
    d = load_dataset(args.data)
    a, b = split_dataset(d, args.fraction, args.seed)
    save_dataset(a, args.out_a)
    save_dataset(b, args.out_b)
    print(f"wrote {len(a)} samples to {args.out_a} and {len(b)} to {args.out_b}")


def cmd_train(args):
    # a dataset path that does not exist is a bad flag, not a read failure
    if not Path(args.data).is_file():
        raise UsageError(f"dataset {args.data!r} does not exist")
    d = load_dataset(args.data)
    cfg = TrainConfig(args.lr, args.momentum, args.weight_decay, args.batch_size, args.epochs, args.seed)
    spec = args.model
    if spec in PRESETS:
        g = build_preset(spec, tuple(d.images.shape[1:]), d.class_count, args.seed)
    elif spec.endswith(".json"):
        g = build_model(json.loads(Path(spec).read_text()), args.seed)
    else:
        g = load_model(spec)
    model, history = train(g, d, cfg)
    save_model(model, args.out)
    if args.history:
        _write_json({"loss": history}, args.history)
    print(f"trained {model.name} for {cfg.epochs} epochs, final loss {history[-1]:.4f}; wrote {args.out}")


def cmd_score(args):
    g = load_model(args.model)
    scores = score_model(g, _load_dvar(args), args.workers)
    reports = select_all(scores, PruneConfig(k=args.k))
    _write_json({"model": g.name, "k": args.k, "layers": [r.to_dict() for r in reports]}, args.out)


def cmd_prune(args):
    g = load_model(args.model)
    scores = score_model(g, _load_dvar(args), args.workers)
    reports = select_all(scores, PruneConfig(k=args.k))
    pruned = apply_prune(g, plan_prune(g, reports))
    save_model(pruned, args.out)
    manifest = prune_manifest(g, pruned, reports)
    manifest_path = args.manifest or str(Path(args.out).with_suffix(".json"))
    _write_json(manifest, manifest_path)
    print(f"kept {manifest['np_pruned']} of {manifest['np_original']} parameters "
          f"(RPR {100 * manifest['rpr']:.2f}%); wrote {args.out} and {manifest_path}")


def cmd_eval(args):
    original, pruned = load_model(args.original), load_model(args.pruned)
    report = evaluate(original, pruned, load_dataset(args.test), workers=args.workers)
    print(report.table())
    if args.json:
        _write_json(report.to_dict(), args.json)


def cmd_sweep(args):
    g = load_model(args.model)
    test = load_dataset(args.test)
    scores = score_model(g, _load_dvar(args), args.workers)
    np_o = count_parameters(g)
    rows = []
    for k in args.k_grid:
        pruned = apply_prune(g, plan_prune(g, select_all(scores, PruneConfig(k=k))))
        rep = evaluate(g, pruned, test, workers=args.workers)
        rows.append((_fmt_k(k), rep.pruned_accuracy, rep.np_pruned, rpr(np_o, rep.np_pruned)))
        log.info("k=%s accuracy=%.4f params=%d", k, rep.pruned_accuracy, rep.np_pruned)
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", newline="")
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["k", "accuracy", "params", "rpr"])
        writer.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_info(args):
    g = load_model(args.model)
    shapes = infer_shapes(g)
    print(f"model {g.name}  input {'x'.join(map(str, g.input_shape))}")
    print(f"{'#':>3}  {'layer':<32} {'output':<14} {'filters':>7} {'params':>10}")
    for i, (layer, shape) in enumerate(zip(g.layers, shapes)):
        filters = str(layer.filters) if layer.kind == "conv2d" else ""
        print(f"{i:>3}  {layer.describe():<32} {'x'.join(map(str, shape)):<14} {filters:>7} {layer.parameter_count():>10}")
    print(f"total parameters: {count_parameters(g)}")


# -- parser --------------------------------------------------------------------

def _add_dvar_options(p):
    p.add_argument("--dvar-fraction", type=_fraction, default=None,
                   help="score on a stratified subset of DVAR of this size (e.g. 0.10 of a training set)")
    p.add_argument("--seed", type=int, default=0, help="seed for --dvar-fraction")
    p.add_argument("--workers", type=_positive, default=default_workers())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ocnna", description="PCA/CV filter-importance pruning for chain CNNs")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic oriented-texture dataset")
    p.add_argument("--classes", type=_positive, default=3)
    p.add_argument("--per-class", type=_positive, required=True)
    p.add_argument("--size", type=_positive, default=16)
    p.add_argument("--noise", type=float, default=0.6)
    p.add_argument("--count", type=_positive, default=None, help="keep only the first COUNT samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=_path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="stratified split, e.g. carve D_var out of a training set")
    p.add_argument("data", type=_path)
    p.add_argument("--fraction", type=_fraction, default=DEFAULT_DVAR_FRACTION)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-a", type=_path, required=True, help="the FRACTION part")
    p.add_argument("--out-b", type=_path, required=True, help="the remainder")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a preset, a JSON architecture or an existing .ocnn model")
    p.add_argument("model", type=_path, help=f"preset ({', '.join(PRESETS)}), architecture .json, or .ocnn")
    p.add_argument("data", type=_path)
    p.add_argument("--out", type=_path, required=True)
    p.add_argument("--epochs", type=_positive, required=True)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=1e-6)
    p.add_argument("--batch-size", type=_positive, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--history", default=None, help="write per-epoch losses as JSON")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="filter importance scores and keep masks as JSON")
    p.add_argument("model", type=_path)
    p.add_argument("dvar", type=_path)
    p.add_argument("--k", type=_k, default=DEFAULT_K)
    p.add_argument("--out", default=None)
    _add_dvar_options(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("prune", help="prune a model and write the smaller .ocnn plus a JSON manifest")
    p.add_argument("model", type=_path)
    p.add_argument("dvar", type=_path)
    p.add_argument("--k", type=_k, default=DEFAULT_K)
    p.add_argument("--out", type=_path, required=True)
    p.add_argument("--manifest", default=None)
    _add_dvar_options(p)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("eval", help="accuracy, accuracy drop and RPR of a pruned model")
    p.add_argument("original", type=_path)
    p.add_argument("pruned", type=_path)
    p.add_argument("test", type=_path)
    p.add_argument("--json", default=None)
    p.add_argument("--workers", type=_positive, default=default_workers())
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="accuracy and parameter count over a grid of k (CSV)")
    p.add_argument("model", type=_path)
    p.add_argument("dvar", type=_path)
    p.add_argument("test", type=_path)
    p.add_argument("--k-grid", type=parse_k_grid, default=parse_k_grid("10:75:5"))
    p.add_argument("--out", default=None)
    _add_dvar_options(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("info", help="layer table with shapes and parameter counts")
    p.add_argument("model", type=_path)
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (FormatError, DimensionError, OSError) as exc:
        print(f"ocnna: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericError as exc:
        print(f"ocnna: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError) as exc:
        print(f"ocnna: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
