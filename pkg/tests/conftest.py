"""Shared instance builders and independent oracles for the test suite.

The oracles here deliberately avoid the library's sweep machinery: curve
values come from per-cutoff brute force over the sample list, integrals from
dense midpoint grids, and interpolation from a scalar Hermite formula.
"""
import numpy as np
import pytest

from interdiv import dataset, relevance


def make_instance(rng, n=40, n_attrs=2, noise=1.0, uniform_noise=False):
    """Random grouped instance with every attribute two-sided."""
    y = rng.normal(0.0, 2.0, n)
    prot = rng.integers(0, 2, size=(n, n_attrs))
    combos = np.array(np.meshgrid(*[[0, 1]] * n_attrs)).T.reshape(-1, n_attrs)
    prot[: len(combos)] = combos
    ds = dataset.from_arrays(rng.normal(size=(n, 3)), y, prot)
    phi = relevance.from_boxplot(y)
    if uniform_noise:
        preds = y + rng.uniform(-1.5 * noise, 1.5 * noise, n)
    else:
        preds = y + rng.normal(0.0, noise, n)
    return ds, phi, preds


def make_instance_combos(rng, n, combos, noise=1.0, uniform_noise=True):
    """Instance drawing group labels from an explicit combo list."""
    y = rng.normal(0.0, 2.0, n)
    combos = np.asarray(combos)
    prot = combos[rng.integers(0, len(combos), size=n)]
    prot[: len(combos)] = combos
    ds = dataset.from_arrays(rng.normal(size=(n, 2)), y, prot)
    phi = relevance.from_boxplot(y)
    if uniform_noise:
        preds = y + rng.uniform(-1.5 * noise, 1.5 * noise, n)
    else:
        preds = y + rng.normal(0.0, noise, n)
    return ds, phi, preds


def hermite_scalar(x, x0, x1, v0, v1, m0, m1):
    """Direct cubic Hermite formula on one segment; the interpolation oracle."""
    h = x1 - x0
    s = (x - x0) / h
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * v0 + h10 * h * m0 + h01 * v1 + h11 * h * m1


def brute_ser(ds, preds, phi, t, group):
    """Per-cutoff recomputation of the group curve from the raw definition."""
    rel = np.asarray(phi(ds.targets))
    err = (np.asarray(preds) - ds.targets) ** 2
    mask = (ds.group_of == group) & (rel >= t)
    return float(err[mask].sum()), int(mask.sum())


def grid_normalized_curves(ds, preds, phi, step=1e-4):
    """Normalized curve values at midpoint-grid cutoffs, brute force."""
    rel = np.asarray(phi(ds.targets))
    err = (np.asarray(preds) - ds.targets) ** 2
    mids = np.arange(step / 2, 1.0, step)
    G = ds.n_groups
    vals = np.zeros((G, len(mids)))
    counts = np.zeros((G, len(mids)))
    for g in range(G):
        m = ds.group_of == g
        inc = rel[m][:, None] >= mids[None, :]
        counts[g] = inc.sum(axis=0)
        vals[g] = err[m] @ inc
    norm = np.where(counts > 0, vals / np.maximum(counts, 1), 0.0)
    return mids, norm, counts


def grid_id(ds, preds, phi, step=1e-4):
    """Midpoint-rule integration of the max-min normalized gap."""
    _, norm, counts = grid_normalized_curves(ds, preds, phi, step)
    cand = counts > 0
    nc = cand.sum(axis=0)
    vmax = np.max(np.where(cand, norm, -np.inf), axis=0)
    vmin = np.min(np.where(cand, norm, np.inf), axis=0)
    gap = np.where(nc >= 2, vmax - vmin, 0.0)
    return float(gap.sum() * step)


def grid_idloss(ds, preds, phi, step=1e-4):
    """Midpoint-rule integration of the sum-minus-min normalized curves."""
    _, norm, counts = grid_normalized_curves(ds, preds, phi, step)
    cand = counts > 0
    any_cand = cand.any(axis=0)
    total = np.where(cand, norm, 0.0).sum(axis=0)
    vmin = np.min(np.where(cand, norm, np.inf), axis=0)
    integrand = np.where(any_cand, total - np.where(any_cand, vmin, 0.0), 0.0)
    return float(integrand.sum() * step)


@pytest.fixture
def rng():
    return np.random.default_rng(1729)


def appendix_instance():
    """Four samples, two groups, flat relevance: the non-convexity witness."""
    ds = dataset.from_arrays(
        features=np.zeros((4, 1)),
        targets=[1.0, 2.0, 3.0, 4.0],
        protected=[[1], [1], [0], [0]],
    )
    phi = relevance.from_points([(0.0, 1.0), (5.0, 1.0)])
    return ds, phi
