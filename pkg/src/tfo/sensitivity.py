"""Robustness analyses: the marginal-sensitivity-model lambda sweep for
unmeasured confounding and the treatment-definition cutoff sweep.

For a bound lambda >= 1, every unit's true treatment odds may differ from the
fitted odds by a factor in [1/lambda, lambda].  Each arm's weight-normalized
mean is a monotone ratio in the perturbed weights, so its extremum over the
box sits at a sorted-outcome threshold configuration, found exactly by
scanning the n+1 breakpoints.  Percentile-bootstrap intervals of the
extremized stabilized IPW contrast then widen (nested) as lambda grows.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .ate import PipelineConfig, estimate_stratum, fit_propensity
from .dataset import GameBundle, assemble
from .errors import DataError
from .label import TfoDefinition, label_game


@dataclass
class LambdaResult:
    lam: float
    lo: float
    hi: float

    @property
    def significant(self) -> bool:
        return self.lo > 0.0 or self.hi < 0.0


@dataclass
class CutoffSweepResult:
    definition: TfoDefinition
    estimate: float | None
    ci95: tuple | None
    n_attempt: int
    n_nonattempt: int
    skipped: bool = False


def _extreme_arm_mean(y: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                      maximize: bool) -> float:
    """Extremum of sum(u*y)/sum(u) over the box u in [lo, hi].

    At the optimum u_i = hi_i exactly when y_i is above the optimal ratio
    (for the max), so it suffices to scan threshold configurations along the
    sorted outcomes.
    """
    order = np.argsort(y, kind="stable")
    ys = y[order]
    los = lo[order]
    his = hi[order]
    # prefix sums over the ascending order; config j gives the j smallest
    # outcomes one bound and the n-j largest the other
    num_lo = np.concatenate([[0.0], np.cumsum(ys * los)])
    den_lo = np.concatenate([[0.0], np.cumsum(los)])
    num_hi = np.concatenate([[0.0], np.cumsum(ys * his)])
    den_hi = np.concatenate([[0.0], np.cumsum(his)])
    num_hi_suffix = num_hi[-1] - num_hi
    den_hi_suffix = den_hi[-1] - den_hi
    num_lo_suffix = num_lo[-1] - num_lo
    den_lo_suffix = den_lo[-1] - den_lo
    if maximize:   # hi weights on the large outcomes
        nums = num_lo + num_hi_suffix
        dens = den_lo + den_hi_suffix
        return float(np.max(nums / dens))
    nums = num_hi + num_lo_suffix
    dens = den_hi + den_lo_suffix
    return float(np.min(nums / dens))


def extremize_estimate(y, w, e_hat, lam: float, direction: str = "max") -> float:
    """Extreme stabilized (weight-normalized) IPW contrast under the bound.

    Treated-arm weights are 1 + t*(1-e)/e and control-arm weights
    1 + (1/t)*e/(1-e) with per-unit t in [1/lam, lam]; arms extremize
    independently.  lam == 1 reproduces the unperturbed estimate exactly.
    """
    if lam < 1.0:
        raise DataError("lambda must be >= 1")
    if direction not in ("max", "min"):
        raise DataError("direction must be 'max' or 'min'")
    y = np.asarray(y, dtype=float)
    w = np.asarray(w)
    e = np.asarray(e_hat, dtype=float)
    t = w == 1
    c = w == 0
    odds_t = (1.0 - e[t]) / e[t]
    odds_c = e[c] / (1.0 - e[c])
    u_lo = 1.0 + odds_t / lam
    u_hi = 1.0 + odds_t * lam
    v_lo = 1.0 + odds_c / lam
    v_hi = 1.0 + odds_c * lam
    if direction == "max":
        mu1 = _extreme_arm_mean(y[t], u_lo, u_hi, maximize=True)
        mu0 = _extreme_arm_mean(y[c], v_lo, v_hi, maximize=False)
    else:
        mu1 = _extreme_arm_mean(y[t], u_lo, u_hi, maximize=False)
        mu0 = _extreme_arm_mean(y[c], v_lo, v_hi, maximize=True)
    return mu1 - mu0


def default_lambdas() -> np.ndarray:
    return np.round(np.arange(1.05, 1.501, 0.05), 2)


def lambda_sweep(data: pd.DataFrame, lambdas=None, n_bootstrap: int = 1000,
                 seed: int = 0, config: PipelineConfig = PipelineConfig(),
                 pooled: bool = True) -> list:
    """Percentile-bootstrap intervals of the extremized contrast per lambda.

    Each replicate resamples rows, refits the propensity model once, and
    extremizes at every lambda; the interval is
    [2.5th pct of minima, 97.5th pct of maxima].  Sharing replicates across
    lambdas makes the intervals nested by construction.
    """
    lambdas = default_lambdas() if lambdas is None else np.asarray(lambdas, dtype=float)
    rng = np.random.default_rng(seed)
    n = len(data)
    mins = np.empty((n_bootstrap, len(lambdas)))
    maxs = np.empty((n_bootstrap, len(lambdas)))
    for b in range(n_bootstrap):
        idx = rng.integers(0, n, n)
        boot = data.iloc[idx].reset_index(drop=True)
        if boot["w"].nunique() < 2:
            mins[b] = np.nan
            maxs[b] = np.nan
            continue
        _, e_hat = fit_propensity(boot, config, pooled)
        y = boot["y"].to_numpy(dtype=float)
        w = boot["w"].to_numpy()
        for j, lam in enumerate(lambdas):
            mins[b, j] = extremize_estimate(y, w, e_hat, lam, "min")
            maxs[b, j] = extremize_estimate(y, w, e_hat, lam, "max")
    out = []
    for j, lam in enumerate(lambdas):
        lo = float(np.nanpercentile(mins[:, j], 2.5))
        hi = float(np.nanpercentile(maxs[:, j], 97.5))
        out.append(LambdaResult(float(lam), lo, hi))
    return out


def lambda_sweep_frame(results: list) -> pd.DataFrame:
    return pd.DataFrame([{"lambda": r.lam, "lo": r.lo, "hi": r.hi,
                          "significant": r.significant} for r in results])


def default_cutoff_grid() -> list:
    """Windows and attempt cutoffs around the (43, 35, 28) definition."""
    grid = []
    for attempt in (27, 28, 29):
        for upper, lower in ((40, 30), (41, 32), (42, 34), (43, 35),
                             (44, 36), (45, 37)):
            if upper > lower > attempt:
                grid.append(TfoDefinition(upper, lower, attempt))
    return grid


def cutoff_sweep(events_by_game: dict, starters_lineups: dict, ratings, odds,
                 grid=None, config: PipelineConfig = PipelineConfig(),
                 min_arm: int = 50, season: str | None = None) -> list:
    """Relabel, rebuild, and re-estimate the pooled AIPW ATE per definition.

    *starters_lineups* maps game_id -> per-event lineup snapshots (computed
    once; lineups do not depend on the labeling cutoffs).  Definitions
    yielding fewer than *min_arm* observations in either arm are flagged and
    skipped.
    """
    grid = default_cutoff_grid() if grid is None else list(grid)
    results = []
    for defn in grid:
        bundles = {}
        for game_id, events in events_by_game.items():
            observations = label_game(events, defn, season)
            bundles[game_id] = GameBundle(events, starters_lineups[game_id],
                                          observations)
        matrix, _ = assemble(bundles, ratings, odds)
        n1 = int((matrix["w"] == 1).sum())
        n0 = int((matrix["w"] == 0).sum())
        if min(n1, n0) < min_arm:
            results.append(CutoffSweepResult(defn, None, None, n1, n0, skipped=True))
            continue
        res = estimate_stratum(matrix, config, "pooled")
        results.append(CutoffSweepResult(defn, res.estimate, res.ci95, n1, n0))
    return results


def cutoff_sweep_frame(results: list) -> pd.DataFrame:
    rows = []
    for r in results:
        rows.append({
            "upper": r.definition.window_upper_s,
            "lower": r.definition.window_lower_s,
            "cutoff": r.definition.attempt_cutoff_s,
            "estimate": np.nan if r.estimate is None else r.estimate,
            "lo": np.nan if r.ci95 is None else r.ci95[0],
            "hi": np.nan if r.ci95 is None else r.ci95[1],
            "n1": r.n_attempt,
            "n0": r.n_nonattempt,
            "skipped": r.skipped,
        })
    return pd.DataFrame(rows)
