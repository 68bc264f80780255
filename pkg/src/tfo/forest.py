"""Honest causal forest for conditional treatment effects.

Outcome and treatment are first residualized against out-of-bag honest
regression forests; causal trees are then grown on a subsample whose two
halves serve distinct roles (split structure vs. leaf estimation).  The node
effect estimator is the residual-on-residual ratio
sum(y_tilde * w_tilde) / sum(w_tilde^2), splits maximize
n_L * n_R * (tau_L - tau_R)^2, and out-of-bag predictions for a row average
only trees whose subsample excluded it.  Tree growth is seeded per tree, so
fits are bit-identical for a given (data, config) regardless of threading.
"""

import concurrent.futures
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd
from numba import njit
from scipy.special import ndtr

from .ate import AteResult, result_from_scores
from .errors import InsufficientData
from .synth import CONTINUOUS_COLUMNS

DERIVED_COLUMNS = ["rating_max_diff", "rating_mean_diff", "abs_score_margin"]
IMPORTANCE_MAX_DEPTH = 4
IMPORTANCE_DECAY = 0.5


def heterogeneity_columns(data: pd.DataFrame) -> list:
    """Default forest covariates: Table-1 variables plus the derived trio."""
    cols = [c for c in CONTINUOUS_COLUMNS if c in data.columns]
    cols += [c for c in ("period_2", "period_3") if c in data.columns]
    cols += [c for c in DERIVED_COLUMNS if c in data.columns]
    return cols


def default_n_jobs() -> int:
    """Thread cap from the TFO_THREADS environment variable (default 1)."""
    try:
        return max(1, int(os.environ.get("TFO_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class ForestConfig:
    n_trees: int = 2000
    subsample_fraction: float = 0.5
    honesty_fraction: float = 0.5
    min_node_size: int = 5
    mtry: int | None = None       # default ceil(sqrt(p))
    seed: int = 0
    n_jobs: int = 1
    clip_eps: float = 0.01

    def __post_init__(self):
        if not (0.0 < self.honesty_fraction < 1.0):
            raise ValueError("honesty_fraction must lie in (0, 1)")
        if not (0.0 < self.subsample_fraction <= 1.0):
            raise ValueError("subsample_fraction must lie in (0, 1]")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")

    def resolve_mtry(self, p: int) -> int:
        return min(p, self.mtry if self.mtry else int(np.ceil(np.sqrt(p))))


@njit(cache=True, nogil=True)
def _partition(idx, lo, hi, x, f, thr):
    i = lo
    for j in range(lo, hi):
        if x[idx[j], f] <= thr:
            tmp = idx[i]
            idx[i] = idx[j]
            idx[j] = tmp
            i += 1
    return i


@njit(cache=True, nogil=True)
def _grow_tree(x, yt, wt, struct_idx, est_idx, mtry, min_node_size, rand_pool,
               feature, threshold, left, right, value, depth):
    """Grow one honest tree in place; returns the number of nodes.

    struct_idx / est_idx are permuted in place as nodes partition them.
    A node's value comes from its estimation rows (ratio estimator) and falls
    back to the parent value when the denominator degenerates.
    """
    p = x.shape[1]
    max_nodes = feature.shape[0]
    # stack fields: node, s_lo, s_hi, e_lo, e_hi, depth
    stack = np.empty((max_nodes + 1, 6), dtype=np.int64)
    parent_val = np.empty(max_nodes + 1, dtype=np.float64)
    feat_buf = np.empty(p, dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = struct_idx.shape[0]
    stack[0, 3] = 0
    stack[0, 4] = est_idx.shape[0]
    stack[0, 5] = 0
    parent_val[0] = 0.0
    n_nodes = 1
    pool_ptr = 0
    while top >= 0:
        node = stack[top, 0]
        s_lo = stack[top, 1]
        s_hi = stack[top, 2]
        e_lo = stack[top, 3]
        e_hi = stack[top, 4]
        node_depth = stack[top, 5]
        fallback = parent_val[top]
        top -= 1

        # honest value from the estimation half
        num = 0.0
        den = 0.0
        for j in range(e_lo, e_hi):
            r = est_idx[j]
            num += yt[r] * wt[r]
            den += wt[r] * wt[r]
        val = num / den if den > 0.0 else fallback
        value[node] = val
        depth[node] = node_depth
        feature[node] = -1

        m = s_hi - s_lo
        if m < 2 * min_node_size:
            continue
        s1tot = 0.0
        s2tot = 0.0
        for j in range(s_lo, s_hi):
            r = struct_idx[j]
            s1tot += yt[r] * wt[r]
            s2tot += wt[r] * wt[r]
        if s2tot <= 0.0:
            continue

        # choose mtry distinct features (partial Fisher-Yates from the pool)
        for j in range(p):
            feat_buf[j] = j
        for t in range(mtry):
            r = t + rand_pool[pool_ptr] % (p - t)
            pool_ptr += 1
            tmp = feat_buf[t]
            feat_buf[t] = feat_buf[r]
            feat_buf[r] = tmp

        best_crit = 0.0
        best_f = -1
        best_thr = 0.0
        xs = np.empty(m, dtype=np.float64)
        y1 = np.empty(m, dtype=np.float64)
        w2 = np.empty(m, dtype=np.float64)
        for t in range(mtry):
            f = feat_buf[t]
            for j in range(m):
                r = struct_idx[s_lo + j]
                xs[j] = x[r, f]
                y1[j] = yt[r] * wt[r]
                w2[j] = wt[r] * wt[r]
            order = np.argsort(xs, kind="mergesort")
            s1 = 0.0
            s2 = 0.0
            for k in range(1, m):
                o = order[k - 1]
                s1 += y1[o]
                s2 += w2[o]
                if k < min_node_size or m - k < min_node_size:
                    continue
                a = xs[order[k - 1]]
                b = xs[order[k]]
                if a >= b:
                    continue
                den_l = s2
                den_r = s2tot - s2
                if den_l <= 0.0 or den_r <= 0.0:
                    continue
                tau_l = s1 / den_l
                tau_r = (s1tot - s1) / den_r
                diff = tau_l - tau_r
                crit = k * (m - k) * diff * diff
                if crit > best_crit:
                    best_crit = crit
                    best_f = f
                    best_thr = 0.5 * (a + b)
        if best_f < 0:
            continue

        s_mid = _partition(struct_idx, s_lo, s_hi, x, best_f, best_thr)
        e_mid = _partition(est_idx, e_lo, e_hi, x, best_f, best_thr)
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        top += 1
        stack[top, 0] = rid
        stack[top, 1] = s_mid
        stack[top, 2] = s_hi
        stack[top, 3] = e_mid
        stack[top, 4] = e_hi
        stack[top, 5] = node_depth + 1
        parent_val[top] = val
        top += 1
        stack[top, 0] = lid
        stack[top, 1] = s_lo
        stack[top, 2] = s_mid
        stack[top, 3] = e_lo
        stack[top, 4] = e_mid
        stack[top, 5] = node_depth + 1
        parent_val[top] = val
    return n_nodes


@njit(cache=True, nogil=True)
def _predict_tree(feature, threshold, left, right, value, X, out):
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]


@dataclass
class _Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    depth: np.ndarray
    subsample: np.ndarray    # sorted row ids drawn for this tree
    struct_idx: np.ndarray   # structure half (split search)
    est_idx: np.ndarray      # estimation half (leaf values)

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        _predict_tree(self.feature, self.threshold, self.left, self.right,
                      self.value, X, out)
        return out


def _build_one_tree(X, yt, wt, config, seed_seq):
    rng = np.random.default_rng(seed_seq)
    n = X.shape[0]
    k = max(2, int(np.ceil(config.subsample_fraction * n)))
    subsample = rng.permutation(n)[:k]
    n_struct = max(1, int(np.ceil(config.honesty_fraction * k)))
    struct_idx = np.ascontiguousarray(subsample[:n_struct])
    est_idx = np.ascontiguousarray(subsample[n_struct:])
    if est_idx.size == 0:  # degenerate honesty split on tiny subsamples
        est_idx = struct_idx.copy()
    mtry = config.resolve_mtry(X.shape[1])
    max_nodes = 2 * (n_struct // config.min_node_size) + 3
    pool = rng.integers(0, 2**62, size=max_nodes * mtry, dtype=np.int64)
    feature = np.empty(max_nodes, dtype=np.int64)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.zeros(max_nodes, dtype=np.int64)
    right = np.zeros(max_nodes, dtype=np.int64)
    value = np.zeros(max_nodes, dtype=np.float64)
    depth = np.zeros(max_nodes, dtype=np.int64)
    n_nodes = _grow_tree(X, yt, wt, struct_idx, est_idx, mtry,
                         config.min_node_size, pool, feature, threshold,
                         left, right, value, depth)
    sl = slice(0, n_nodes)
    return _Tree(feature[sl].copy(), threshold[sl].copy(), left[sl].copy(),
                 right[sl].copy(), value[sl].copy(), depth[sl].copy(),
                 np.sort(subsample).astype(np.int32),
                 np.sort(struct_idx).astype(np.int32),
                 np.sort(est_idx).astype(np.int32))


def _fit_trees(X, yt, wt, config, seed_key) -> list:
    seeds = np.random.SeedSequence([config.seed, seed_key]).spawn(config.n_trees)
    if config.n_jobs <= 1:
        return [_build_one_tree(X, yt, wt, config, s) for s in seeds]
    trees = [None] * config.n_trees
    with concurrent.futures.ThreadPoolExecutor(max_workers=config.n_jobs) as pool:
        futures = {pool.submit(_build_one_tree, X, yt, wt, config, s): t
                   for t, s in enumerate(seeds)}
        for fut in concurrent.futures.as_completed(futures):
            trees[futures[fut]] = fut.result()
    return trees


def _oob_average(trees, X) -> np.ndarray:
    """Per-row average of predictions from trees whose subsample excluded it."""
    n = X.shape[0]
    sums = np.zeros(n)
    counts = np.zeros(n)
    for tree in trees:
        pred = tree.predict(X)
        mask = np.ones(n, dtype=bool)
        mask[tree.subsample] = False
        sums[mask] += pred[mask]
        counts[mask] += 1
    out = np.full(n, np.nan)
    has = counts > 0
    out[has] = sums[has] / counts[has]
    if not has.all():  # rows in every subsample: fall back to the full forest
        rest = ~has
        out[rest] = np.mean([t.predict(X[rest]) for t in trees], axis=0)
    return out


def _average(trees, X) -> np.ndarray:
    out = np.zeros(X.shape[0])
    for tree in trees:
        out += tree.predict(X)
    return out / len(trees)


@dataclass
class RegressionForest:
    """Honest regression forest (the causal machinery with w_tilde == 1)."""

    trees: list
    columns: list

    def predict_frame(self, data: pd.DataFrame) -> np.ndarray:
        return _average(self.trees, _matrix(data, self.columns))

    def oob(self, X: np.ndarray) -> np.ndarray:
        return _oob_average(self.trees, X)


def _matrix(data: pd.DataFrame, columns) -> np.ndarray:
    return np.ascontiguousarray(data[list(columns)].to_numpy(dtype=np.float64))


def fit_regression_forest(data: pd.DataFrame, target: np.ndarray,
                          config: ForestConfig, columns=None,
                          seed_key: int = 0) -> RegressionForest:
    columns = list(columns) if columns is not None else heterogeneity_columns(data)
    X = _matrix(data, columns)
    ones = np.ones(X.shape[0])
    trees = _fit_trees(X, np.asarray(target, dtype=float), ones, config, seed_key)
    return RegressionForest(trees, columns)


@dataclass
class Nuisances:
    """Out-of-bag conditional-mean and propensity estimates."""

    m_hat: np.ndarray
    e_hat: np.ndarray
    m_forest: RegressionForest
    e_forest: RegressionForest


def fit_nuisances(data: pd.DataFrame, config: ForestConfig = ForestConfig(),
                  columns=None) -> Nuisances:
    """Honest regression forests for E[Y|X] and E[W|X], out of bag.

    Propensities are clipped to [clip_eps, 1 - clip_eps].  Raises
    InsufficientData when n < 10 * min_node_size.
    """
    n = len(data)
    if n < 10 * config.min_node_size:
        raise InsufficientData(
            f"need at least {10 * config.min_node_size} rows, got {n}")
    columns = list(columns) if columns is not None else heterogeneity_columns(data)
    X = _matrix(data, columns)
    y = data["y"].to_numpy(dtype=float)
    w = data["w"].to_numpy(dtype=float)
    m_forest = fit_regression_forest(data, y, config, columns, seed_key=1)
    e_forest = fit_regression_forest(data, w, config, columns, seed_key=2)
    m_hat = m_forest.oob(X)
    e_hat = np.clip(e_forest.oob(X), config.clip_eps, 1.0 - config.clip_eps)
    return Nuisances(m_hat, e_hat, m_forest, e_forest)


@dataclass
class CausalForest:
    """Fitted ensemble plus everything the downstream estimators need."""

    trees: list
    columns: list
    config: ForestConfig
    y: np.ndarray
    w: np.ndarray
    m_hat: np.ndarray
    e_hat: np.ndarray
    y_tilde: np.ndarray
    w_tilde: np.ndarray
    oob_cate: np.ndarray

    def predict_cate(self, data: pd.DataFrame) -> np.ndarray:
        """CATE at new covariate rows (plain bagging over honest leaves)."""
        return _average(self.trees, _matrix(data, self.columns))


def fit_forest(data: pd.DataFrame, nuisances: Nuisances,
               config: ForestConfig = ForestConfig(), columns=None) -> CausalForest:
    """Grow the causal forest on residualized outcome/treatment."""
    columns = list(columns) if columns is not None else heterogeneity_columns(data)
    X = _matrix(data, columns)
    y = data["y"].to_numpy(dtype=float)
    w = data["w"].to_numpy(dtype=float)
    y_tilde = y - nuisances.m_hat
    w_tilde = w - nuisances.e_hat
    trees = _fit_trees(X, y_tilde, w_tilde, config, seed_key=3)
    oob_cate = _oob_average(trees, X)
    return CausalForest(trees, columns, config, y, w, nuisances.m_hat,
                        nuisances.e_hat, y_tilde, w_tilde, oob_cate)


def fit_causal_forest(data: pd.DataFrame, config: ForestConfig = ForestConfig(),
                      columns=None) -> CausalForest:
    """Convenience: nuisances then forest, all from one seed."""
    nuis = fit_nuisances(data, config, columns)
    return fit_forest(data, nuis, config, columns)


def dr_scores(forest: CausalForest) -> np.ndarray:
    """Per-unit doubly robust effect scores Gamma_i."""
    tau = forest.oob_cate
    e = forest.e_hat
    w = forest.w
    resid = forest.y - forest.m_hat - (w - e) * tau
    return tau + (w - e) / (e * (1.0 - e)) * resid


def forest_ate(forest: CausalForest, stratum: str = "pooled") -> AteResult:
    """Forest ATE: mean of the doubly robust scores, se = sd/sqrt(n)."""
    gamma = dr_scores(forest)
    n1 = int(np.sum(forest.w == 1))
    n0 = int(np.sum(forest.w == 0))
    return result_from_scores(gamma, "forest", n1, n0, stratum)


def variable_importance(forest: CausalForest) -> pd.Series:
    """Split-frequency importance, depth-decayed.

    importance(j) is proportional to
    sum over depths k<=4 of decay^(k-1) * splits_on_j_at_k / splits_at_k,
    normalized to sum to one.  The root split has depth 1.
    """
    p = len(forest.columns)
    counts = np.zeros((p, IMPORTANCE_MAX_DEPTH))
    for tree in forest.trees:
        internal = tree.feature >= 0
        ks = tree.depth[internal] + 1
        fs = tree.feature[internal]
        keep = ks <= IMPORTANCE_MAX_DEPTH
        np.add.at(counts, (fs[keep], ks[keep] - 1), 1.0)
    totals = counts.sum(axis=0)
    weights = IMPORTANCE_DECAY ** np.arange(IMPORTANCE_MAX_DEPTH)
    raw = np.zeros(p)
    for k in range(IMPORTANCE_MAX_DEPTH):
        if totals[k] > 0:
            raw += weights[k] * counts[:, k] / totals[k]
    if raw.sum() > 0:
        raw = raw / raw.sum()
    return pd.Series(raw, index=forest.columns).sort_values(ascending=False)


def filter_variables(importance: pd.Series, keep_mass: float = 0.95) -> list:
    """Smallest prefix of the importance ranking reaching *keep_mass*."""
    ranked = importance.sort_values(ascending=False)
    kept = []
    cum = 0.0
    for name, weight in ranked.items():
        kept.append(name)
        cum += weight
        if cum >= keep_mass:
            break
    return kept


@dataclass
class CalibrationResult:
    """Mean / differential forest prediction test (one-sided)."""

    mean_coef: float
    mean_se: float
    mean_t: float
    mean_p: float
    diff_coef: float
    diff_se: float
    diff_t: float
    diff_p: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("mean_coef", "mean_se", "mean_t", "mean_p",
                 "diff_coef", "diff_se", "diff_t", "diff_p", "degenerate")}


def test_calibration(forest: CausalForest) -> CalibrationResult:
    """Regress y_tilde on C1 = tau_bar * w_tilde and
    C2 = (tau_oob - tau_bar) * w_tilde without intercept.

    Heteroskedasticity-robust (HC1) standard errors; one-sided p-values
    against coef > 0.  A mean coefficient near 1 says the forest's average
    prediction is calibrated; a significantly positive differential
    coefficient is evidence of real heterogeneity.  When all out-of-bag
    CATEs coincide the differential regressor is identically zero and the
    diff row is reported as NaN with ``degenerate=True``.
    """
    tau = forest.oob_cate
    tau_bar = float(tau.mean())
    c1 = tau_bar * forest.w_tilde
    c2 = (tau - tau_bar) * forest.w_tilde
    yt = forest.y_tilde
    n = len(yt)
    degenerate = bool(np.allclose(c2, 0.0))
    Z = np.column_stack([c1]) if degenerate else np.column_stack([c1, c2])
    beta, *_ = np.linalg.lstsq(Z, yt, rcond=None)
    resid = yt - Z @ beta
    ztz_inv = np.linalg.inv(Z.T @ Z)
    meat = (Z * (resid ** 2)[:, None]).T @ Z
    k = Z.shape[1]
    cov = ztz_inv @ meat @ ztz_inv * (n / max(1, n - k))
    ses = np.sqrt(np.diag(cov))

    def row(i):
        coef = float(beta[i])
        se = float(ses[i])
        t = coef / se if se > 0 else np.nan
        p = float(1.0 - ndtr(t)) if np.isfinite(t) else np.nan
        return coef, se, t, p

    mean_row = row(0)
    diff_row = (np.nan, np.nan, np.nan, np.nan) if degenerate else row(1)
    return CalibrationResult(*mean_row, *diff_row, degenerate=degenerate)
