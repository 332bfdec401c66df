"""Tabular regression data with intersectional group structure.

A :class:`GroupedDataset` binds a numeric feature matrix and target vector to
a per-sample intersectional group id. Groups are the observed combinations of
binarized protected attributes (value equal to the designated privileged
value maps to 1, anything else to 0). Group ids are assigned in decreasing
order of group size so reports are stable across reloads.

Protected columns are deliberately excluded from the feature matrix: models
trained on ``features`` never see the attributes directly, only whatever
proxies the remaining columns carry.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from . import relevance
from .errors import (
    DegenerateAttributeError,
    EmptyDataError,
    InputError,
    SchemaError,
    SplitError,
    ValidationError,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetSchema:
    """Column roles for a CSV file.

    ``privileged_values`` is aligned with ``protected_columns``; each entry
    names the attribute value that binarizes to 1. ``feature_columns`` may be
    left empty, in which case every remaining column becomes a feature.
    """

    target_column: str
    protected_columns: tuple[str, ...]
    privileged_values: tuple[str, ...]
    feature_columns: tuple[str, ...] = ()
    drop_columns: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "protected_columns", tuple(self.protected_columns))
        object.__setattr__(self, "privileged_values", tuple(str(v) for v in self.privileged_values))
        object.__setattr__(self, "feature_columns", tuple(self.feature_columns))
        object.__setattr__(self, "drop_columns", tuple(self.drop_columns))
        if not self.protected_columns:
            raise SchemaError("at least one protected column is required")
        if self.target_column in self.protected_columns:
            raise SchemaError("target column cannot also be a protected column")
        if len(set(self.protected_columns)) != len(self.protected_columns):
            raise SchemaError("protected columns must be distinct")
        if len(self.privileged_values) != len(self.protected_columns):
            raise SchemaError("one privileged value is required per protected column")


@dataclass(frozen=True)
class GroupInfo:
    """One observed protected-attribute combination and its sample count."""

    combo: tuple[int, ...]
    count: int


@dataclass(frozen=True)
class GroupedDataset:
    """Immutable feature/target arrays plus intersectional group index."""

    features: np.ndarray            # (n, d) float64
    targets: np.ndarray             # (n,)
    protected: np.ndarray           # (n, a) uint8, 1 = privileged value
    group_of: np.ndarray            # (n,) int group id into group_catalog
    group_catalog: tuple[GroupInfo, ...]
    feature_names: tuple[str, ...]
    protected_names: tuple[str, ...]
    target_name: str = "y"
    n_dropped: int = 0

    def __post_init__(self):
        for arr in (self.features, self.targets, self.protected, self.group_of):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.targets.shape[0]

    @property
    def n_groups(self) -> int:
        return len(self.group_catalog)

    def group_counts(self) -> np.ndarray:
        return np.bincount(self.group_of, minlength=self.n_groups)

    def subset(self, ids) -> "GroupedDataset":
        """Row subset that keeps the parent catalog (absent groups count 0)."""
        ids = np.asarray(ids, dtype=int)
        counts = np.bincount(self.group_of[ids], minlength=self.n_groups)
        catalog = tuple(
            GroupInfo(combo=g.combo, count=int(c))
            for g, c in zip(self.group_catalog, counts)
        )
        return GroupedDataset(
            features=self.features[ids].copy(),
            targets=self.targets[ids].copy(),
            protected=self.protected[ids].copy(),
            group_of=self.group_of[ids].copy(),
            group_catalog=catalog,
            feature_names=self.feature_names,
            protected_names=self.protected_names,
            target_name=self.target_name,
        )


def _build_catalog(protected: np.ndarray):
    """Assign group ids by decreasing size (ties broken by combo tuple)."""
    combos, inverse, counts = np.unique(
        protected, axis=0, return_inverse=True, return_counts=True
    )
    order = sorted(
        range(len(combos)), key=lambda i: (-int(counts[i]), tuple(combos[i].tolist()))
    )
    remap = np.empty(len(combos), dtype=int)
    for new_id, old_id in enumerate(order):
        remap[old_id] = new_id
    group_of = remap[inverse.ravel()]
    catalog = tuple(
        GroupInfo(combo=tuple(int(v) for v in combos[old_id]), count=int(counts[old_id]))
        for old_id in order
    )
    return group_of.astype(np.int64), catalog


def from_arrays(
    features,
    targets,
    protected,
    feature_names=None,
    protected_names=None,
    target_name: str = "y",
    n_dropped: int = 0,
) -> GroupedDataset:
    """Assemble a GroupedDataset from in-memory arrays.

    ``protected`` must already be binarized (0/1 per attribute). Used by the
    synthetic generators and anywhere a dataset is built programmatically.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(targets, dtype=float)
    A = np.asarray(protected)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if not np.all((A == 0) | (A == 1)):
        raise InputError("protected matrix must be binarized to 0/1")
    A = A.astype(np.uint8)
    n = y.shape[0]
    if X.shape[0] != n or A.shape[0] != n:
        raise InputError("features, targets, and protected must share their length")
    if not np.all(np.isfinite(y)):
        raise InputError("targets must be finite")
    group_of, catalog = _build_catalog(A)
    if feature_names is None:
        feature_names = tuple(f"x{i}" for i in range(X.shape[1]))
    if protected_names is None:
        protected_names = tuple(f"a{i}" for i in range(A.shape[1]))
    return GroupedDataset(
        features=X,
        targets=y,
        protected=A,
        group_of=group_of,
        group_catalog=catalog,
        feature_names=tuple(feature_names),
        protected_names=tuple(protected_names),
        target_name=target_name,
        n_dropped=n_dropped,
    )


_MISSING_TOKENS = frozenset({"", "na", "n/a", "nan", "null", "none", "?"})


def _is_missing(token: str) -> bool:
    return token.lower() in _MISSING_TOKENS


def _parse_float(token: str):
    try:
        v = float(token)
    except ValueError:
        return None
    return v if np.isfinite(v) else None


def load_csv(path, schema: DatasetSchema) -> GroupedDataset:
    """Load an RFC-4180 CSV and index rows by intersectional group.

    Rows whose target or protected value is missing/unparseable are dropped
    (the count is kept on ``n_dropped`` and logged). Feature columns that
    fail to parse as numbers are treated as categorical and one-hot encoded
    in lexicographic category order; unparseable values in numeric feature
    columns are imputed with the column median.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDataError(f"no header row in {path}")
        header = [h.strip() for h in header]
        rows = [r for r in reader if r]

    col_index = {name: i for i, name in enumerate(header)}
    for col in (schema.target_column, *schema.protected_columns, *schema.feature_columns):
        if col not in col_index:
            raise SchemaError(f"column {col!r} not found in {path}")

    excluded = {schema.target_column, *schema.protected_columns, *schema.drop_columns}
    if schema.feature_columns:
        feature_cols = list(schema.feature_columns)
    else:
        feature_cols = [c for c in header if c not in excluded]

    t_idx = col_index[schema.target_column]
    p_idx = [col_index[c] for c in schema.protected_columns]
    f_idx = [col_index[c] for c in feature_cols]

    targets = []
    prot_raw = []
    feat_raw = []
    n_dropped = 0
    width = len(header)
    for row in rows:
        if len(row) != width:
            n_dropped += 1
            continue
        y = _parse_float(row[t_idx].strip())
        pvals = [row[i].strip() for i in p_idx]
        if y is None or any(_is_missing(v) for v in pvals):
            n_dropped += 1
            continue
        targets.append(y)
        prot_raw.append(pvals)
        feat_raw.append([row[i].strip() for i in f_idx])

    if not targets:
        raise EmptyDataError(f"zero usable rows in {path}")
    if n_dropped:
        log.info("dropped %d unusable rows while loading %s", n_dropped, path)

    n = len(targets)
    protected = np.zeros((n, len(p_idx)), dtype=np.uint8)
    for j, priv in enumerate(schema.privileged_values):
        col = np.array([prot_raw[i][j] for i in range(n)])
        protected[:, j] = (col == priv).astype(np.uint8)
        observed = np.unique(protected[:, j])
        if observed.size < 2:
            raise DegenerateAttributeError(
                f"protected column {schema.protected_columns[j]!r} has a single "
                "observed value after binarization; group structure collapses"
            )

    blocks = []
    names = []
    for j, cname in enumerate(feature_cols):
        col = [feat_raw[i][j] for i in range(n)]
        parsed = [None if _is_missing(v) else _parse_float(v) for v in col]
        numeric = all(p is not None for p, v in zip(parsed, col) if not _is_missing(v))
        if numeric:
            vals = np.array([p if p is not None else np.nan for p in parsed], dtype=float)
            if np.all(np.isnan(vals)):
                vals = np.zeros(n)
            elif np.any(np.isnan(vals)):
                vals = np.where(np.isnan(vals), np.nanmedian(vals), vals)
            blocks.append(vals.reshape(-1, 1))
            names.append(cname)
        else:
            # categorical: one-hot in lexicographic order; missing rows encode
            # as all-zero (no category matched)
            cats = sorted({v for v in col if not _is_missing(v)})
            onehot = np.zeros((n, len(cats)), dtype=float)
            for k, cat in enumerate(cats):
                onehot[:, k] = [1.0 if v == cat else 0.0 for v in col]
            blocks.append(onehot)
            names.extend(f"{cname}={cat}" for cat in cats)

    X = np.hstack(blocks) if blocks else np.zeros((n, 0))
    return from_arrays(
        X,
        np.array(targets),
        protected,
        feature_names=names,
        protected_names=schema.protected_columns,
        target_name=schema.target_column,
        n_dropped=n_dropped,
    )


def split(ds: GroupedDataset, train_ratio: float, seed: int, stratify_groups: bool = False):
    """Reproducible uniform random split into (train, test).

    With ``stratify_groups`` the shuffle and ratio are applied per group, so
    group proportions carry over; the default is a plain shuffle.
    """
    if not 0.0 < train_ratio < 1.0:
        raise SplitError(f"train_ratio must be in (0, 1), got {train_ratio!r}")
    rng = np.random.default_rng(seed)
    if stratify_groups:
        train_ids = []
        test_ids = []
        for g in range(ds.n_groups):
            ids = np.nonzero(ds.group_of == g)[0]
            perm = ids[rng.permutation(len(ids))]
            k = int(train_ratio * len(ids))
            train_ids.append(perm[:k])
            test_ids.append(perm[k:])
        train_ids = np.sort(np.concatenate(train_ids))
        test_ids = np.sort(np.concatenate(test_ids))
    else:
        perm = rng.permutation(ds.n)
        k = int(train_ratio * ds.n)
        train_ids = np.sort(perm[:k])
        test_ids = np.sort(perm[k:])
    if len(train_ids) == 0 or len(test_ids) == 0:
        raise SplitError(
            f"split of n={ds.n} at ratio={train_ratio} leaves an empty partition"
        )
    return ds.subset(train_ids), ds.subset(test_ids)


def synth_imbalanced_scenario(n_per_group: int, divergence: float, seed: int):
    """Two groups with equal total absolute error but skewed error placement.

    Both groups share the same targets, so their relevance profiles are
    identical. Per-sample absolute errors are 1 for the privileged group; for
    the unprivileged group they are tilted toward high-relevance targets by
    ``divergence`` while keeping the group MAE equal to within float
    round-off. Returns ``(dataset, predictions)`` ready for auditing.
    """
    if n_per_group < 10:
        raise ValidationError("n_per_group must be at least 10")
    if divergence < 0:
        raise ValidationError("divergence must be nonnegative")
    rng = np.random.default_rng(seed)
    n = int(n_per_group)
    y = np.linspace(0.0, 10.0, n)
    phi = relevance.from_boxplot(y)
    r = phi(y)
    s = r - r.mean()
    if divergence > 0 and np.max(np.abs(s)) > 0:
        s = s / np.max(np.abs(s))
        s = s - s.mean()
        c = 0.95 * divergence / (1.0 + divergence)
    else:
        s = np.zeros_like(s)
        c = 0.0
    err_priv = np.ones(n)
    err_unpriv = 1.0 + c * s
    sign_p = rng.choice([-1.0, 1.0], size=n)
    sign_u = rng.choice([-1.0, 1.0], size=n)
    preds = np.concatenate([y + sign_p * err_priv, y + sign_u * err_unpriv])
    targets = np.concatenate([y, y])
    protected = np.concatenate([np.ones(n, dtype=np.uint8), np.zeros(n, dtype=np.uint8)])
    features = np.column_stack(
        [targets + rng.normal(0.0, 0.5, size=2 * n), rng.normal(size=2 * n)]
    )
    ds = from_arrays(
        features,
        targets,
        protected.reshape(-1, 1),
        feature_names=("x0", "x1"),
        protected_names=("a0",),
    )
    return ds, preds


def synth_biased(
    n: int,
    seed: int,
    n_protected: int = 2,
    tail_bias: float = 0.8,
    noise: float = 0.5,
):
    """Trainable dataset whose high-target tail depends on group membership.

    The target has a common linear part plus a tail bump triggered by one
    feature; the bump is larger for unprivileged groups. Noisy proxy columns
    leak group membership into the features, so a capacity-limited model can
    in principle learn the group-specific tails but a squared-error fit will
    favour the majority pattern. This is the training counterpart of
    :func:`synth_imbalanced_scenario`.
    """
    if n < 50:
        raise ValidationError("n must be at least 50")
    if n_protected not in (1, 2):
        raise ValidationError("n_protected must be 1 or 2")
    rng = np.random.default_rng(seed)
    a1 = (rng.random(n) < 0.6).astype(np.uint8)
    cols = [a1]
    if n_protected == 2:
        a2 = (rng.random(n) < 0.55).astype(np.uint8)
        cols.append(a2)
    A = np.column_stack(cols)
    x0 = rng.normal(size=n)
    x1 = rng.normal(size=n)
    x2 = rng.normal(size=n)
    proxies = [A[:, j] + 0.35 * rng.normal(size=n) for j in range(A.shape[1])]
    tail = (x2 > 1.0).astype(float)
    mult = 1.0 + tail_bias * (1 - A[:, 0])
    if A.shape[1] == 2:
        mult = mult + 0.5 * tail_bias * (1 - A[:, 1])
    y = 3.0 * x0 + 2.0 * x1 + 8.0 * tail * mult + noise * rng.normal(size=n)
    X = np.column_stack([x0, x1, x2, *proxies])
    names = ["x0", "x1", "x2"] + [f"proxy{j}" for j in range(A.shape[1])]
    return from_arrays(
        X,
        y,
        A,
        feature_names=names,
        protected_names=tuple(f"a{j}" for j in range(A.shape[1])),
    )
