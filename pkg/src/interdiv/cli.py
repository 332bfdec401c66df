"""Command-line entry point.

Subcommands: train, predict, audit, experiment, curves, synth, bench-approx.
Data goes to stdout or the requested files; diagnostics go to stderr. Exit
codes: 0 success, 1 operational failure, 2 usage error. Every command that
writes outputs also writes a manifest with the resolved parameters so the
outputs can be reproduced bit-identically.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from . import approx as approx_mod
from . import config as config_mod
from . import curves as curves_mod
from . import dataset as dataset_mod
from . import gbt, harness, idboost, metrics, relevance
from .errors import InputError, InterdivError


def _write_manifest(target_path, command: str, params: dict) -> None:
    if os.path.isdir(target_path):
        path = os.path.join(target_path, "manifest.json")
    else:
        path = str(target_path) + ".manifest.json"
    doc = {
        "tool": "interdiv",
        "version": __version__,
        "command": command,
        "parameters": params,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _load_dataset(args) -> dataset_mod.GroupedDataset:
    schema = config_mod.load_schema(args.config)
    return dataset_mod.load_csv(args.data, schema)


def _relevance_for(args, targets) -> relevance.RelevanceFunction:
    if getattr(args, "relevance_file", None):
        return relevance.load_points(args.relevance_file)
    return relevance.from_boxplot(targets)


def _boost_params(args) -> gbt.BoostParams:
    return gbt.BoostParams(
        n_rounds=args.rounds,
        learning_rate=args.eta,
        max_depth=args.depth,
        min_child_hessian=args.min_child_hessian,
        l2_lambda=args.l2_lambda,
        hess_floor=args.hess_floor,
        seed=args.seed,
    )


def _read_preds(path) -> np.ndarray:
    with open(path, encoding="utf-8-sig") as fh:
        first = fh.readline().strip()
        rows = [line.strip() for line in fh if line.strip()]
    vals = []
    try:
        vals.append(float(first.split(",")[0]))
    except ValueError:
        pass  # header line
    for line in rows:
        try:
            vals.append(float(line.split(",")[0]))
        except ValueError as exc:
            raise InputError(f"bad prediction row {line!r} in {path}") from exc
    return np.asarray(vals)


def cmd_train(args) -> int:
    ds = _load_dataset(args)
    phi = _relevance_for(args, ds.targets)
    params = _boost_params(args)
    approx_params = approx_mod.ApproxParams() if args.fast else None
    if args.model == "idboost":
        model = idboost.fit(ds, phi, params, args.w, approx_params=approx_params)
    else:
        from .losses import make_objective

        obj = make_objective(
            args.objective,
            ds,
            phi=phi,
            huber_delta=args.huber_delta,
            hess_floor=params.hess_floor,
            approx_params=approx_params if args.objective == "idloss" else None,
        )
        model = gbt.fit(ds, obj, params)
    model.to_json(args.out)
    _write_manifest(args.out, "train", {
        "data": args.data,
        "config": args.config,
        "model": args.model,
        "objective": args.objective,
        "w": args.w,
        "rounds": args.rounds,
        "depth": args.depth,
        "eta": args.eta,
        "lambda": args.l2_lambda,
        "min_child_hessian": args.min_child_hessian,
        "hess_floor": args.hess_floor,
        "huber_delta": args.huber_delta,
        "seed": args.seed,
        "fast": args.fast,
        "relevance_file": args.relevance_file,
    })
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def _load_model(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    fmt = doc.get("format")
    if fmt == gbt.FORMAT_NAME:
        return gbt.TreeEnsemble.from_dict(doc)
    if fmt == idboost.FORMAT_NAME:
        return idboost.IdBoostModel.from_dict(doc)
    raise InputError(f"unrecognized model format {fmt!r} in {path}")


def cmd_predict(args) -> int:
    ds = _load_dataset(args)
    model = _load_model(args.model)
    preds = model.predict(ds.features)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("pred\n")
        for v in preds:
            fh.write(f"{v:.17g}\n")
    _write_manifest(args.out, "predict", {
        "data": args.data, "config": args.config, "model": args.model,
    })
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def cmd_audit(args) -> int:
    ds = _load_dataset(args)
    preds = _read_preds(args.preds)
    if len(preds) != ds.n:
        raise InputError(
            f"prediction length {len(preds)} does not match dataset length {ds.n}"
        )
    phi = _relevance_for(args, ds.targets)
    report = metrics.full_report(ds, preds, phi)
    payload = report.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
        _write_manifest(args.out, "audit", {
            "data": args.data, "config": args.config, "preds": args.preds,
            "relevance_file": args.relevance_file,
        })
    if args.json or not args.out:
        print(payload)
    if not args.json:
        _print_human_report(report)
    return 0


def _fmt4(v) -> str:
    return "--" if v is None else f"{v:.4g}"


def _print_human_report(report: metrics.FairnessReport) -> None:
    err = sys.stderr
    print(f"n={report.n} groups={report.n_groups}", file=err)
    print(
        f"mse={_fmt4(report.mse)} mae={_fmt4(report.mae)} sera={_fmt4(report.sera)}",
        file=err,
    )
    print(
        f"id={_fmt4(report.id)} delta_bgl={_fmt4(report.delta_bgl)} sp={_fmt4(report.sp)}",
        file=err,
    )
    for table in report.mae_delta_tables:
        print(
            f"-- MAE delta for {table['measure_attribute']} conditioned on "
            f"{table['condition_attribute']}:",
            file=err,
        )
        for row in table["rows"]:
            delta = "--" if row["delta_pct"] is None else f"{row['delta_pct']:+.1f}%"
            flag = f" [{row['flag']}]" if row["flag"] else ""
            print(
                f"   {row['label']}: priv={_fmt4(row['mae_privileged'])} "
                f"unpriv={_fmt4(row['mae_unprivileged'])} delta={delta}{flag}",
                file=err,
            )
    for note in report.notes:
        print(f"note: {note}", file=err)


def cmd_experiment(args) -> int:
    cfg = harness.config_from_file(args.config)
    table, _ = harness.run(cfg)
    _write_manifest(cfg.out_dir, "experiment", {
        "config": os.path.abspath(args.config),
        "data": cfg.data,
        "models": list(cfg.models),
        "runs": cfg.n_runs,
        "train_ratio": cfg.train_ratio,
        "seed": cfg.base_seed,
        "metrics": list(cfg.metric_names),
        "boost": {
            "rounds": cfg.boost.n_rounds,
            "eta": cfg.boost.learning_rate,
            "depth": cfg.boost.max_depth,
            "min_child_hessian": cfg.boost.min_child_hessian,
            "lambda": cfg.boost.l2_lambda,
            "hess_floor": cfg.boost.hess_floor,
        },
        "huber_delta": cfg.huber_delta,
        "fast": cfg.fast,
        "stratify_groups": cfg.stratify_groups,
        "relevance_file": cfg.relevance_file,
    })
    for i, model in enumerate(table.models):
        cells = " ".join(
            f"{m}={table.mean[i, j]:.2f}±{table.std[i, j]:.2f}"
            for j, m in enumerate(table.metric_names)
        )
        print(f"{model}: {cells}")
    if args.curves:
        paths = harness.export_id_curves(cfg)
        for name, path in paths.items():
            print(f"curves[{name}] -> {path}")
    return 0


def cmd_curves(args) -> int:
    if args.from_experiment:
        cfg = harness.config_from_file(args.from_experiment)
        paths = harness.export_id_curves(cfg)
        for name, path in paths.items():
            print(f"curves[{name}] -> {path}")
        return 0
    ds = _load_dataset(args)
    preds = _read_preds(args.preds)
    if len(preds) != ds.n:
        raise InputError(
            f"prediction length {len(preds)} does not match dataset length {ds.n}"
        )
    phi = _relevance_for(args, ds.targets)
    cs = curves_mod.build(ds, preds, phi)
    curves_mod.export_curves(cs, args.out)
    _write_manifest(args.out, "curves", {
        "data": args.data, "config": args.config, "preds": args.preds,
        "relevance_file": args.relevance_file,
    })
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    data_path = os.path.join(args.out, "data.csv")
    schema_path = os.path.join(args.out, "schema.cfg")
    if args.kind == "scenario":
        ds, preds = dataset_mod.synth_imbalanced_scenario(
            args.n, args.divergence, args.seed
        )
        preds_path = os.path.join(args.out, "preds.csv")
        with open(preds_path, "w", encoding="utf-8") as fh:
            fh.write("pred\n")
            for v in preds:
                fh.write(f"{v:.17g}\n")
    else:
        ds = dataset_mod.synth_biased(args.n, args.seed, n_protected=args.attributes)
    _write_dataset_csv(data_path, ds)
    config_mod.write_kv_file(schema_path, {
        "target": ds.target_name,
        "protected": list(ds.protected_names),
        "privileged": ["1"] * len(ds.protected_names),
    })
    _write_manifest(args.out, "synth", {
        "kind": args.kind,
        "n": args.n,
        "divergence": args.divergence,
        "attributes": args.attributes,
        "seed": args.seed,
    })
    print(f"wrote {data_path}", file=sys.stderr)
    return 0


def _write_dataset_csv(path, ds: dataset_mod.GroupedDataset) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        cols = [ds.target_name, *ds.protected_names, *ds.feature_names]
        fh.write(",".join(cols) + "\n")
        for i in range(ds.n):
            cells = [f"{ds.targets[i]:.17g}"]
            cells += [str(int(v)) for v in ds.protected[i]]
            cells += [f"{v:.17g}" for v in ds.features[i]]
            fh.write(",".join(cells) + "\n")


def cmd_bench_approx(args) -> int:
    ds = dataset_mod.synth_biased(args.n, args.seed, n_protected=args.attributes)
    phi = relevance.from_boxplot(ds.targets)
    params = approx_mod.ApproxParams(
        sigma=args.sigma, grid_step=args.grid_step
    )
    report = approx_mod.bench_approx(
        ds, phi, params, rounds=args.rounds, w=args.w, seed=args.seed
    )
    doc = report.to_dict()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("metric,exact,fast,delta_pct\n")
            fh.write(
                f"time_s,{report.time_exact:.17g},{report.time_fast:.17g},"
                f"{report.time_pct:.17g}\n"
            )
            fh.write(
                f"sera,{report.sera_exact:.17g},{report.sera_fast:.17g},"
                f"{report.sera_delta_pct:.17g}\n"
            )
            fh.write(
                f"id,{report.id_exact:.17g},{report.id_fast:.17g},"
                f"{report.id_delta_pct:.17g}\n"
            )
            fh.write(
                f"eval_points,{report.eval_points_exact},{report.eval_points_fast},"
                f"{report.eval_points_reduction_pct:.17g}\n"
            )
        _write_manifest(args.out, "bench-approx", {
            "n": args.n, "rounds": args.rounds, "w": args.w, "seed": args.seed,
            "sigma": args.sigma, "grid_step": args.grid_step,
            "attributes": args.attributes,
        })
    print(json.dumps(doc, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="interdiv",
        description="Fairness-aware regression: divergence measurement and boosting.",
    )
    parser.add_argument("--version", action="version", version=f"interdiv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_args(p):
        p.add_argument("--data", required=True, help="input CSV")
        p.add_argument("--config", required=True, help="schema config file")
        p.add_argument("--relevance-file", dest="relevance_file", default=None,
                       help="control-point CSV overriding boxplot inference")

    p = sub.add_parser("train", help="fit a model")
    add_data_args(p)
    p.add_argument("--model", choices=("ensemble", "idboost"), default="ensemble")
    p.add_argument("--objective", choices=("mse", "huber", "sera", "idloss"),
                   default="mse")
    p.add_argument("--w", type=float, default=0.5, help="idboost fairness weight")
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--lambda", dest="l2_lambda", type=float, default=1.0)
    p.add_argument("--min-child-hessian", dest="min_child_hessian", type=float,
                   default=0.0)
    p.add_argument("--hess-floor", dest="hess_floor", type=float, default=1e-6)
    p.add_argument("--huber-delta", dest="huber_delta", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fast", action="store_true",
                   help="use simplified curves inside the divergence objective")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="apply a saved model")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("audit", help="fairness report for saved predictions")
    add_data_args(p)
    p.add_argument("--preds", required=True, help="prediction CSV (one value per row)")
    p.add_argument("--json", action="store_true", help="print JSON to stdout only")
    p.add_argument("--out", default=None, help="write the JSON report here")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("experiment", help="repeated-split model comparison")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--curves", action="store_true",
                   help="also export averaged divergence curves")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("curves", help="export per-group error curves")
    p.add_argument("--data")
    p.add_argument("--config")
    p.add_argument("--preds")
    p.add_argument("--relevance-file", dest="relevance_file", default=None)
    p.add_argument("--out")
    p.add_argument("--from-experiment", dest="from_experiment", default=None,
                   help="experiment config; export run-averaged curves instead")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("synth", help="generate synthetic data")
    p.add_argument("--kind", choices=("scenario", "biased"), default="scenario")
    p.add_argument("--n", type=int, default=500,
                   help="per-group size (scenario) or total size (biased)")
    p.add_argument("--divergence", type=float, default=1.0)
    p.add_argument("--attributes", type=int, default=2, choices=(1, 2))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench-approx", help="exact vs simplified training benchmark")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--attributes", type=int, default=1, choices=(1, 2))
    p.add_argument("--rounds", type=int, default=20)
    p.add_argument("--w", type=float, default=0.5)
    p.add_argument("--sigma", type=float, default=1e-2)
    p.add_argument("--grid-step", dest="grid_step", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench_approx)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "curves" and not args.from_experiment:
        for required in ("data", "config", "preds", "out"):
            if getattr(args, required) is None:
                parser.error(f"curves requires --{required.replace('_', '-')}")
    try:
        return args.func(args)
    except (InterdivError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
