"""Command-line interface.

Subcommands: gen, prune, train, sweep, compare, csq-pack, plot.
Exit codes: 0 success, 1 usage error, 2 numeric failure, 3 partial result
(packing shortfall).
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _csv_list(conv):
    def parse(text):
        return [conv(t) for t in text.split(",") if t.strip()]

    return parse


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sparse-index-lab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="sample a dataset to CSV")
    g.add_argument("--d", type=int, default=256)
    g.add_argument("--n", type=int, default=4000)
    g.add_argument("--s", type=int, default=16)
    g.add_argument("--link", default="he2")
    g.add_argument("--mode", choices=["single", "multi"], default="single")
    g.add_argument("--r", type=int, default=2, help="columns in multi mode")
    g.add_argument("--delta", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    pr = sub.add_parser("prune", help="recover a support set from a dataset CSV")
    pr.add_argument("--data", required=True)
    pr.add_argument("--M", type=int, default=16)
    pr.add_argument("--c", type=float, default=None, help="default 1/log d")
    pr.add_argument("--m", type=int, default=64)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--out", required=True)

    tr = sub.add_parser("train", help="full pipeline to a predictor bundle")
    tr.add_argument("--data", required=True)
    tr.add_argument("--M", type=int, default=16)
    tr.add_argument("--c", type=float, default=None)
    tr.add_argument("--m", type=int, default=64)
    tr.add_argument("--mode", choices=["single", "multi"], default="single")
    tr.add_argument("--kappa", type=float, default=1.0)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--out", required=True)

    for name in ("sweep", "compare"):
        sw = sub.add_parser(name, help=f"{name} over a parameter grid")
        sw.add_argument("--config", help="key=value file with [a,b,...] grids")
        sw.add_argument("--d", type=_csv_list(int))
        sw.add_argument("--n", type=_csv_list(int))
        sw.add_argument("--M", type=_csv_list(int))
        sw.add_argument("--s", type=_csv_list(int))
        sw.add_argument("--q", type=_csv_list(float))
        sw.add_argument("--alpha", type=_csv_list(float))
        sw.add_argument("--link", type=_csv_list(str))
        sw.add_argument("--mode", type=_csv_list(str))
        sw.add_argument("--delta", type=_csv_list(float))
        sw.add_argument("--seeds", type=int, default=3)
        sw.add_argument("--seed", type=int, default=0, help="base seed")
        sw.add_argument("--m", type=int, default=64)
        sw.add_argument("--kappa", type=float, default=1.0)
        sw.add_argument("--jobs", type=int, default=1)
        sw.add_argument("--resume", action="store_true")
        sw.add_argument("--out", required=True)

    cp = sub.add_parser("csq-pack", help="build and export a sparse packing")
    cp.add_argument("--d", type=int, default=2048)
    cp.add_argument("--r", type=int, default=2)
    cp.add_argument("--s", type=int, default=64)
    cp.add_argument("--q", type=float, default=1.0)
    cp.add_argument("--count", type=int, default=50)
    cp.add_argument("--k", type=int, default=2)
    cp.add_argument("--cap", type=float, default=None)
    cp.add_argument("--max-attempts", type=int, default=10**6)
    cp.add_argument("--seed", type=int, default=0)
    cp.add_argument("--out", required=True)

    pl = sub.add_parser("plot", help="render an SVG from a result CSV")
    pl.add_argument("--data", required=True)
    pl.add_argument("--kind", choices=["risk_vs_n", "residual_vs_n", "coherence_hist"], required=True)
    pl.add_argument("--out", default=None)

    return p


def _cmd_gen(args) -> int:
    from .harness import make_link, _build_model  # reuse the model registry
    from .model import dataset_to_csv, sample_dataset

    point = {"d": args.d, "s": args.s, "link": args.link, "mode": args.mode, "delta": args.delta}

    class _Shim:
        r = args.r

    model = _build_model(point, _Shim, args.seed)
    dataset_to_csv(sample_dataset(model, args.n, args.seed), args.out)
    print(f"wrote {args.n} x {args.d} dataset to {args.out}")
    return 0


def _cmd_prune(args) -> int:
    from .model import augment, dataset_from_csv
    from .pruning import PruneConfig, prune_network, save_support

    data = augment(dataset_from_csv(args.data), args.seed + 1)
    c = args.c if args.c is not None else 1.0 / math.log(data.d)
    J = prune_network(data, PruneConfig(M=args.M, c=c, m=args.m, seed=args.seed))
    save_support(J, args.out)
    print(f"recovered {len(J)} coordinates -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    from .model import augment, dataset_from_csv
    from .training import TrainConfig, fit, save_predictor

    data = augment(dataset_from_csv(args.data), args.seed + 1)
    c = args.c if args.c is not None else 1.0 / math.log(data.d)
    cfg = TrainConfig(M=args.M, c=c, m=args.m, mode=args.mode, seed=args.seed, kappa=args.kappa)
    pred = fit(data, cfg)
    save_predictor(pred, args.out)
    print(f"trained predictor on |J|={len(pred.J)} coordinates -> {args.out}")
    return 0


def _sweep_spec(args):
    from .harness import SweepSpec, parse_config

    grid = {}
    overrides = {}
    if args.config:
        cfg = parse_config(args.config)
        for key, val in cfg.items():
            if key in ("seeds", "base_seed", "r", "m", "kappa", "n_test", "jobs"):
                overrides[key] = val
            else:
                grid[key] = val if isinstance(val, list) else [val]
    for key in ("d", "n", "M", "s", "q", "alpha", "link", "mode", "delta"):
        val = getattr(args, key if key != "M" else "M")
        if val is not None:
            grid[key] = val
    overrides.setdefault("seeds", args.seeds)
    overrides.setdefault("m", args.m)
    overrides.setdefault("kappa", args.kappa)
    overrides.setdefault("jobs", args.jobs)
    return SweepSpec(
        grid=grid,
        base_seed=args.seed,
        out=args.out,
        resume=args.resume,
        **{k: v for k, v in overrides.items() if k != "jobs"},
        jobs=overrides["jobs"],
    )


def _cmd_sweep(args) -> int:
    from .harness import run_sweep

    records = run_sweep(_sweep_spec(args))
    failed = sum(1 for r in records if r.error)
    print(f"{len(records)} records ({failed} failed) -> {args.out}")
    return 0


def _cmd_compare(args) -> int:
    from .harness import compare_pruned_unpruned

    records = compare_pruned_unpruned(_sweep_spec(args))
    failed = sum(1 for r in records if r.error)
    print(f"{len(records)} paired records ({failed} failed) -> {args.out}")
    return 0


def _cmd_csq_pack(args) -> int:
    from .csq import build_packing, export_packing, verify_packing

    packing = build_packing(
        d=args.d, r=args.r, s=args.s, count=args.count, k=args.k,
        coherence_cap=args.cap, max_attempts=args.max_attempts,
        seed=args.seed, q=args.q,
    )
    export_packing(packing, args.out)
    audit = verify_packing(packing)
    print(
        f"{len(packing.frames)} frames, achieved coherence "
        f"{packing.achieved_coherence:.3e} (cap {packing.coherence_cap:.3e}), "
        f"audit ok={audit['correlation_ok'] and audit['sparsity_ok']} -> {args.out}"
    )
    if not packing.complete:
        print("warning: attempts exhausted before the requested count", file=sys.stderr)
        return 3
    return 0


def _cmd_plot(args) -> int:
    from .harness import emit_plots

    out = emit_plots(args.data, args.kind, args.out)
    print(f"wrote {out}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "prune": _cmd_prune,
    "train": _cmd_train,
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
    "csq-pack": _cmd_csq_pack,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = _COMMANDS[args.command](args)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
