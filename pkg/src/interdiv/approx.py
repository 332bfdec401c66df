"""Curve simplification for faster loss evaluation.

The normalized error curve of each group is resampled on a uniform cutoff
grid, blurred with a truncated Gaussian kernel, and reduced to the grid
points where the first or second derivative of the blurred curve changes
sign, plus both endpoints. The piecewise-linear curve through those points
(using the original, unblurred values) approximates the step curve, and the
union of retained points across groups is the reduced cutoff grid the
divergence objective sweeps during training instead of every breakpoint.
Reported metrics are never computed from simplified curves.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import curves as curves_mod
from .curves import SerCurveSet
from .errors import ParameterError
from .relevance import RelevanceFunction


@dataclass(frozen=True)
class ApproxParams:
    sigma: float = 1e-2        # Gaussian bandwidth, in relevance units
    grid_step: float = 1e-3    # resampling step for derivative estimation
    min_points: int = 2        # floor on retained points per curve

    def __post_init__(self):
        if self.sigma <= 0:
            raise ParameterError("sigma must be positive")
        if not 0.0 < self.grid_step < 1.0:
            raise ParameterError("grid_step must be in (0, 1)")
        if self.min_points < 2:
            raise ParameterError("min_points must be >= 2")


@dataclass(frozen=True)
class SimplifiedCurve:
    """Retained (t, value) points with piecewise-linear evaluation."""

    t: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        self.t.setflags(write=False)
        self.value.setflags(write=False)

    def __call__(self, ts):
        return np.interp(np.asarray(ts, dtype=float), self.t, self.value)

    @property
    def n_points(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class SimplifiedCurveSet:
    curves: tuple
    grid_size: int

    @property
    def n_retained(self) -> tuple:
        return tuple(c.n_points for c in self.curves)


def _resample_step(curves: SerCurveSet, grid: np.ndarray) -> np.ndarray:
    """Normalized curve values (all groups) on the interval each grid point falls in."""
    norm = curves.normalized()
    idx = np.clip(
        np.searchsorted(curves.breakpoints, grid, side="right") - 1,
        0,
        norm.shape[1] - 1,
    )
    return norm[:, idx]


def _gaussian_smooth(values: np.ndarray, sigma_cells: float) -> np.ndarray:
    """Convolve with a +/-4 sigma truncated kernel, renormalized at edges."""
    radius = max(1, int(round(4.0 * sigma_cells)))
    x = np.arange(-radius, radius + 1, dtype=float)
    kernel = np.exp(-0.5 * (x / sigma_cells) ** 2)
    num = np.convolve(values, kernel, mode="same")
    den = np.convolve(np.ones_like(values), kernel, mode="same")
    return num / den


def _sign_changes(d: np.ndarray, noise_floor: float) -> np.ndarray:
    # derivative magnitudes at roundoff scale are flattened to exactly zero,
    # so flat stretches cannot flicker sign; this floors numerical noise
    # only, it is not a significance threshold
    d = np.where(np.abs(d) <= noise_floor, 0.0, d)
    s = np.sign(d)
    return np.nonzero(s[:-1] != s[1:])[0]


def simplify(curves: SerCurveSet, params: ApproxParams) -> SimplifiedCurveSet:
    """Reduce each group's normalized curve to its significant points."""
    n_grid = int(round(1.0 / params.grid_step)) + 1
    if n_grid < 3:
        raise ParameterError(
            f"grid_step={params.grid_step} is coarser than the curve support"
        )
    grid = np.linspace(0.0, 1.0, n_grid)
    h = grid[1] - grid[0]
    sigma_cells = params.sigma / params.grid_step
    resampled = _resample_step(curves, grid)
    eps = np.finfo(float).eps
    out = []
    for g in range(curves.n_groups):
        vals = resampled[g]
        smooth = _gaussian_smooth(vals, sigma_cells)
        scale = max(1.0, float(np.max(np.abs(smooth))))
        d1 = np.gradient(smooth, grid)
        d2 = np.gradient(d1, grid)
        keep = {0, n_grid - 1}
        keep.update(int(i) for i in _sign_changes(d1, 64.0 * eps * scale / h))
        keep.update(int(i) for i in _sign_changes(d2, 64.0 * eps * scale / h**2))
        if len(keep) < params.min_points:
            extra = np.linspace(0, n_grid - 1, params.min_points).round().astype(int)
            keep.update(int(i) for i in extra)
        idx = np.array(sorted(keep), dtype=int)
        out.append(SimplifiedCurve(t=grid[idx], value=vals[idx]))
    return SimplifiedCurveSet(curves=tuple(out), grid_size=n_grid)


def id_from_simplified(simplified: SimplifiedCurveSet, curves: SerCurveSet) -> float:
    """Divergence integral over the union of retained points.

    ``curves`` supplies only the (prediction-independent) count step
    functions that decide which groups are populated at a cutoff. Within
    each union segment, candidate curves are linear, so the max-min gap is
    integrated with the trapezoid rule on the segment endpoints.
    """
    grid = np.unique(np.concatenate([c.t for c in simplified.curves]))
    mid = 0.5 * (grid[:-1] + grid[1:])
    seg_len = np.diff(grid)
    idx = np.clip(
        np.searchsorted(curves.breakpoints, mid, side="right") - 1,
        0,
        curves.count.shape[1] - 1,
    )
    cand = curves.count[:, idx] > 0
    n_cand = cand.sum(axis=0)
    lo = np.stack([c(grid[:-1]) for c in simplified.curves])
    hi = np.stack([c(grid[1:]) for c in simplified.curves])

    def gap(vals):
        vmax = np.max(np.where(cand, vals, -np.inf), axis=0)
        vmin = np.min(np.where(cand, vals, np.inf), axis=0)
        return np.where(n_cand >= 2, vmax - vmin, 0.0)

    return float(np.sum(0.5 * (gap(lo) + gap(hi)) * seg_len))


@dataclass
class BenchReport:
    """Timing and accuracy comparison of exact vs simplified training."""

    n_train: int
    n_test: int
    rounds: int
    time_exact: float
    time_fast: float
    time_pct: float
    sera_exact: float
    sera_fast: float
    sera_delta_pct: float
    id_exact: float
    id_fast: float
    id_delta_pct: float
    eval_points_exact: int
    eval_points_fast: int
    eval_points_reduction_pct: float
    preds_exact: np.ndarray = field(repr=False, default=None)
    preds_fast: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if not k.startswith("preds_")}
        return d


def _pct(new: float, old: float) -> float:
    return (new - old) / old * 100.0 if old != 0 else 0.0


def bench_approx(
    ds,
    phi: RelevanceFunction,
    params: ApproxParams,
    rounds: int,
    boost_params=None,
    w: float = 0.5,
    train_ratio: float = 0.8,
    seed: int = 0,
) -> BenchReport:
    """Train the dual-ensemble model with and without curve simplification.

    Wall times cover fit plus test prediction for each arm; the error and
    divergence deltas are computed with exact metrics on the held-out
    predictions of both arms.
    """
    from . import dataset as dataset_mod
    from . import gbt, idboost, metrics

    if boost_params is None:
        boost_params = gbt.BoostParams(n_rounds=rounds, max_depth=3, l2_lambda=1e-6,
                                       seed=seed)
    else:
        from dataclasses import replace

        boost_params = replace(boost_params, n_rounds=rounds, seed=seed)
    train, test = dataset_mod.split(ds, train_ratio, seed)

    t0 = time.perf_counter()
    exact_model = idboost.fit(train, phi, boost_params, w)
    preds_exact = exact_model.predict(test.features)
    t_exact = time.perf_counter() - t0

    t0 = time.perf_counter()
    fast_model = idboost.fit(train, phi, boost_params, w, approx_params=params)
    preds_fast = fast_model.predict(test.features)
    t_fast = time.perf_counter() - t0

    curves_exact = curves_mod.build(test, preds_exact, phi)
    curves_fast = curves_mod.build(test, preds_fast, phi)
    sera_exact = curves_mod.sera(test, preds_exact, phi)
    sera_fast = curves_mod.sera(test, preds_fast, phi)
    id_exact = metrics.intersectional_divergence(curves_exact)
    id_fast = metrics.intersectional_divergence(curves_fast)
    pe = exact_model.id_ensemble.eval_points or 0
    pf = fast_model.id_ensemble.eval_points or 0
    return BenchReport(
        n_train=train.n,
        n_test=test.n,
        rounds=rounds,
        time_exact=t_exact,
        time_fast=t_fast,
        time_pct=_pct(t_fast, t_exact),
        sera_exact=sera_exact,
        sera_fast=sera_fast,
        sera_delta_pct=_pct(sera_fast, sera_exact),
        id_exact=id_exact,
        id_fast=id_fast,
        id_delta_pct=_pct(id_fast, id_exact),
        eval_points_exact=pe,
        eval_points_fast=pf,
        eval_points_reduction_pct=_pct(pf, pe),
        preds_exact=preds_exact,
        preds_fast=preds_fast,
    )
