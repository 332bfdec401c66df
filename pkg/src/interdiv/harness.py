"""Repeated-split experiment runner and rank aggregation.

An experiment fits every configured model on ``runs`` independent
train/test splits (seeded ``base_seed + run``), scores each test prediction
with the full fairness report, and aggregates per-metric ranks across runs.
A model that raises during a run is recorded as failed and ranked last for
every metric of that run rather than aborting the experiment. Per-run
predictions and models are persisted under ``<out>/run_<r>/`` so curve
export and benchmarking can reuse them without refitting.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import config as config_mod
from . import curves as curves_mod
from . import dataset as dataset_mod
from . import gbt, idboost, metrics, relevance
from .errors import InputError, InterdivError, ValidationError

DEFAULT_METRICS = ("mse", "sera", "delta_bgl", "sp", "id")


@dataclass(frozen=True)
class ExperimentConfig:
    data: str
    schema: dataset_mod.DatasetSchema
    models: tuple[str, ...]
    out_dir: str
    n_runs: int = 20
    train_ratio: float = 0.8
    base_seed: int = 0
    metric_names: tuple[str, ...] = DEFAULT_METRICS
    boost: gbt.BoostParams = field(default_factory=gbt.BoostParams)
    huber_delta: float = 1.0
    relevance_file: str | None = None
    fast: bool = False
    stratify_groups: bool = False

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValidationError("n_runs must be >= 1")
        if len(set(self.models)) != len(self.models):
            raise ValidationError("model names must be unique")
        if not self.models:
            raise ValidationError("at least one model is required")
        for name in self.models:
            _parse_model_name(name)  # typos abort here, not mid-experiment


def config_from_file(path) -> ExperimentConfig:
    kv = config_mod.parse_kv_file(path)
    schema = config_mod.schema_from_mapping(kv)
    if "data" not in kv:
        raise ValidationError("experiment config is missing the 'data' key")
    if "models" not in kv:
        raise ValidationError("experiment config is missing the 'models' key")
    base_dir = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base_dir, p)

    boost = gbt.BoostParams(
        n_rounds=int(kv.get("rounds", 100)),
        learning_rate=float(kv.get("eta", 0.1)),
        max_depth=int(kv.get("depth", 6)),
        min_child_hessian=float(kv.get("min_child_hessian", 0.0)),
        l2_lambda=float(kv.get("lambda", 1.0)),
        hess_floor=float(kv.get("hess_floor", 1e-6)),
        seed=int(kv.get("seed", 0)),
    )
    return ExperimentConfig(
        data=resolve(kv["data"]),
        schema=schema,
        models=tuple(config_mod.split_list(kv["models"])),
        out_dir=resolve(kv["out"]) if "out" in kv else os.path.join(base_dir, "out"),
        n_runs=int(kv.get("runs", 20)),
        train_ratio=float(kv.get("train_ratio", 0.8)),
        base_seed=int(kv.get("seed", 0)),
        metric_names=tuple(config_mod.split_list(kv.get("metrics", ", ".join(DEFAULT_METRICS)))),
        boost=boost,
        huber_delta=float(kv.get("huber_delta", 1.0)),
        relevance_file=resolve(kv["relevance_file"]) if "relevance_file" in kv else None,
        fast=kv.get("fast", "false").lower() in ("1", "true", "yes"),
        stratify_groups=kv.get("stratify_groups", "false").lower() in ("1", "true", "yes"),
    )


def _parse_model_name(name: str):
    """Model spec: an objective name, or ``idboost_<w>`` with w in [0, 1]."""
    low = name.lower()
    if low.startswith("xgb_"):
        low = low[4:]
    if low in ("mse", "huber", "sera", "idloss"):
        return ("ensemble", low, None)
    if low.startswith("idboost"):
        tail = low[len("idboost"):].lstrip("_")
        w = float(tail) if tail else 0.5
        if not 0.0 <= w <= 1.0:
            raise ValidationError(f"idboost weight out of range in {name!r}")
        return ("idboost", "idloss+sera", w)
    raise ValidationError(f"unknown model name {name!r}")


def fit_model(name: str, train, phi, cfg: ExperimentConfig):
    from .approx import ApproxParams
    from .losses import make_objective

    kind, objective, w = _parse_model_name(name)
    approx_params = ApproxParams() if cfg.fast else None
    if kind == "idboost":
        return idboost.fit(train, phi, cfg.boost, w, approx_params=approx_params)
    obj = make_objective(
        objective,
        train,
        phi=phi,
        huber_delta=cfg.huber_delta,
        hess_floor=cfg.boost.hess_floor,
        approx_params=approx_params if objective == "idloss" else None,
    )
    return gbt.fit(train, obj, cfg.boost)


def rank_with_ties(values) -> np.ndarray:
    """1-based ranks, ascending; tied values share the average rank."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v))
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


@dataclass
class RankTable:
    models: tuple
    metric_names: tuple
    mean: np.ndarray   # (n_models, n_metrics)
    std: np.ndarray
    ranks: np.ndarray  # (n_runs, n_models, n_metrics)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            cols = ["model"]
            for m in self.metric_names:
                cols += [f"{m}_mean_rank", f"{m}_std_rank"]
            fh.write(",".join(cols) + "\n")
            for i, model in enumerate(self.models):
                row = [model]
                for j in range(len(self.metric_names)):
                    row += [f"{self.mean[i, j]:.17g}", f"{self.std[i, j]:.17g}"]
                fh.write(",".join(row) + "\n")


def _report_metric(report: metrics.FairnessReport, name: str) -> float:
    value = getattr(report, name)
    return float(value) if value is not None else float("inf")


def run(cfg: ExperimentConfig):
    """Execute the experiment; returns (RankTable, raw metric rows)."""
    ds = dataset_mod.load_csv(cfg.data, cfg.schema)
    os.makedirs(cfg.out_dir, exist_ok=True)
    n_models = len(cfg.models)
    n_metrics = len(cfg.metric_names)
    raw_rows = []
    values = np.full((cfg.n_runs, n_models, n_metrics), np.inf)
    for r in range(cfg.n_runs):
        seed = cfg.base_seed + r
        train, test = dataset_mod.split(
            ds, cfg.train_ratio, seed, stratify_groups=cfg.stratify_groups
        )
        if cfg.relevance_file:
            phi = relevance.load_points(cfg.relevance_file)
        else:
            phi = relevance.from_boxplot(train.targets)
        run_dir = os.path.join(cfg.out_dir, f"run_{r}")
        os.makedirs(run_dir, exist_ok=True)
        for m, name in enumerate(cfg.models):
            status = "ok"
            try:
                model = fit_model(name, train, phi, cfg)
                preds = model.predict(test.features)
                report = metrics.full_report(test, preds, phi)
                for k, metric in enumerate(cfg.metric_names):
                    values[r, m, k] = _report_metric(report, metric)
                np.savetxt(
                    os.path.join(run_dir, f"preds_{name}.csv"),
                    preds,
                    fmt="%.17g",
                    header="pred",
                    comments="",
                )
                model.to_json(os.path.join(run_dir, f"model_{name}.json"))
            except InterdivError as exc:
                status = f"failed: {exc}"
            raw_rows.append(
                {
                    "run": r,
                    "seed": seed,
                    "model": name,
                    "status": status,
                    **{
                        metric: values[r, m, k]
                        for k, metric in enumerate(cfg.metric_names)
                    },
                }
            )
    ranks = np.empty_like(values)
    for r in range(cfg.n_runs):
        for k in range(n_metrics):
            ranks[r, :, k] = rank_with_ties(values[r, :, k])
    table = RankTable(
        models=cfg.models,
        metric_names=cfg.metric_names,
        mean=ranks.mean(axis=0),
        std=ranks.std(axis=0, ddof=1) if cfg.n_runs > 1 else np.zeros((n_models, n_metrics)),
        ranks=ranks,
    )
    _write_raw_csv(os.path.join(cfg.out_dir, "raw_metrics.csv"), cfg, raw_rows)
    table.to_csv(os.path.join(cfg.out_dir, "ranks.csv"))
    return table, raw_rows


def _write_raw_csv(path, cfg: ExperimentConfig, rows) -> None:
    cols = ["run", "seed", "model", "status", *cfg.metric_names]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            cells = []
            for c in cols:
                v = row[c]
                if isinstance(v, float):
                    cells.append(f"{v:.17g}")
                else:
                    cells.append(str(v).replace(",", ";"))
            fh.write(",".join(cells) + "\n")


def export_id_curves(cfg: ExperimentConfig) -> dict:
    """Average each model's normalized group curves across completed runs.

    Requires the per-run prediction files written by :func:`run`; a missing
    file is an explicit error naming the runs so a stale output directory is
    caught instead of silently averaging fewer runs. Returns the mapping of
    model name to the written CSV path.
    """
    ds = dataset_mod.load_csv(cfg.data, cfg.schema)
    missing = []
    for r in range(cfg.n_runs):
        for name in cfg.models:
            p = os.path.join(cfg.out_dir, f"run_{r}", f"preds_{name}.csv")
            if not os.path.exists(p):
                missing.append(f"run_{r}/{name}")
    if missing:
        raise InputError(
            "missing saved predictions for: " + ", ".join(missing)
        )
    curve_dir = os.path.join(cfg.out_dir, "curves")
    os.makedirs(curve_dir, exist_ok=True)
    out = {}
    for name in cfg.models:
        per_run = []
        for r in range(cfg.n_runs):
            seed = cfg.base_seed + r
            train, test = dataset_mod.split(
                ds, cfg.train_ratio, seed, stratify_groups=cfg.stratify_groups
            )
            if cfg.relevance_file:
                phi = relevance.load_points(cfg.relevance_file)
            else:
                phi = relevance.from_boxplot(train.targets)
            preds = np.atleast_1d(
                np.loadtxt(
                    os.path.join(cfg.out_dir, f"run_{r}", f"preds_{name}.csv"),
                    skiprows=1,
                )
            )
            per_run.append(curves_mod.build(test, preds, phi))
        grid = np.unique(np.concatenate([c.breakpoints for c in per_run]))
        path = os.path.join(curve_dir, f"{name}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,group,normalized_ser\n")
            for g in range(ds.n_groups):
                acc = np.zeros(len(grid))
                for cs in per_run:
                    ser_v, cnt_v = cs.values_at(grid, g)
                    acc += np.where(cnt_v > 0, ser_v / np.maximum(cnt_v, 1), 0.0)
                acc /= len(per_run)
                for t, v in zip(grid, acc):
                    fh.write(f"{t:.17g},{g},{v:.17g}\n")
        out[name] = path
    return out
