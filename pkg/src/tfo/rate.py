"""Targeting-operator-characteristic curves and the rank-weighted average
treatment effect (AUTOC variant) with bootstrap inference.

toc(q) is the mean doubly robust score among the top ceil(q*n) rows by
priority minus the overall mean; rate is the uniform average of toc over the
grid q = i/n.  Priorities only enter through their ranks, so any strictly
increasing transform of the scores leaves both unchanged.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DataError, SeasonOverlap
from .forest import (ForestConfig, dr_scores, fit_causal_forest,
                     heterogeneity_columns)


@dataclass
class TocCurve:
    q: np.ndarray
    toc: np.ndarray
    band_lo: np.ndarray | None = None
    band_hi: np.ndarray | None = None

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"q": self.q, "toc": self.toc})
        if self.band_lo is not None:
            frame["band_lo"] = self.band_lo
            frame["band_hi"] = self.band_hi
        return frame


@dataclass
class RateResult:
    rule: str
    estimate: float
    se: float
    curve: TocCurve
    n_bootstrap: int

    def to_dict(self) -> dict:
        return {"rule": self.rule, "estimate": self.estimate, "se": self.se,
                "n_bootstrap": self.n_bootstrap}


def _toc_values(gamma: np.ndarray, priority: np.ndarray) -> np.ndarray:
    """toc on the grid q = i/n; ties in priority break by stable row order."""
    order = np.argsort(-priority, kind="stable")
    csum = np.cumsum(gamma[order])
    ranks = np.arange(1, len(gamma) + 1)
    overall = csum[-1] / len(gamma)
    return csum / ranks - overall


def toc_curve(gamma, priority) -> TocCurve:
    """The curve alone, without bootstrap bands."""
    gamma = np.asarray(gamma, dtype=float)
    priority = np.asarray(priority, dtype=float)
    if len(gamma) != len(priority) or len(gamma) < 2:
        raise DataError("need at least 2 rows with matching score/priority lengths")
    n = len(gamma)
    return TocCurve(np.arange(1, n + 1) / n, _toc_values(gamma, priority))


def rate_autoc(gamma, priority) -> float:
    """Point estimate: mean of toc over the q grid."""
    gamma = np.asarray(gamma, dtype=float)
    priority = np.asarray(priority, dtype=float)
    return float(np.mean(_toc_values(gamma, priority)))


def rate(gamma, priority, n_bootstrap: int = 200, seed: int = 0,
         rule: str = "cate") -> RateResult:
    """RATE with a nonparametric bootstrap over evaluation rows.

    Rows are resampled jointly (score, priority); the prioritization rule is
    held fixed.  se is the standard deviation of replicate rates; the band is
    the per-q 2.5/97.5 percentile envelope of replicate curves.
    """
    gamma = np.asarray(gamma, dtype=float)
    priority = np.asarray(priority, dtype=float)
    curve = toc_curve(gamma, priority)
    estimate = float(np.mean(curve.toc))
    n = len(gamma)
    rng = np.random.default_rng(seed)
    reps = np.empty(n_bootstrap)
    curves = np.empty((n_bootstrap, n))
    for b in range(n_bootstrap):
        idx = rng.integers(0, n, n)
        values = _toc_values(gamma[idx], priority[idx])
        curves[b] = values
        reps[b] = values.mean()
    se = float(np.std(reps, ddof=1))
    curve.band_lo = np.percentile(curves, 2.5, axis=0)
    curve.band_hi = np.percentile(curves, 97.5, axis=0)
    return RateResult(rule, estimate, se, curve, n_bootstrap)


def crossfit_scores(train: pd.DataFrame | None, evaluation: pd.DataFrame,
                    config: ForestConfig = ForestConfig(), columns=None,
                    priority_column: str | None = None):
    """Evaluation-season scores for a train-season prioritization rule.

    The priority is the CATE prediction of a causal forest fit on *train*
    (or the raw value of *priority_column*, in which case *train* may be
    None); the doubly robust scores come from nuisances and a forest fit on
    *evaluation* only, so the scores are independent of the rule.  Raises
    SeasonOverlap when the two sets share seasons.
    """
    if (train is not None and "season" in train.columns
            and "season" in evaluation.columns):
        shared = set(train["season"].unique()) & set(evaluation["season"].unique())
        if shared:
            raise SeasonOverlap(f"train and evaluation share seasons {sorted(shared)}")
    columns = list(columns) if columns is not None else heterogeneity_columns(evaluation)
    eval_forest = fit_causal_forest(evaluation.reset_index(drop=True), config, columns)
    gamma = dr_scores(eval_forest)
    if priority_column is not None:
        priority = evaluation[priority_column].to_numpy(dtype=float)
    else:
        if train is None:
            raise DataError("crossfit_scores needs a train set for the CATE rule")
        rule_forest = fit_causal_forest(train.reset_index(drop=True), config, columns)
        priority = rule_forest.predict_cate(evaluation)
    return gamma, priority
