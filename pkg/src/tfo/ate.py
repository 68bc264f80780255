"""Average treatment effect estimation (Horvitz-Thompson IPW and doubly
robust AIPW) with influence-function standard errors, plus covariate-balance
and propensity-overlap diagnostics.

The pipeline entry point fits a probit propensity model and two Gaussian
outcome models on the analysis matrix (natural cubic splines on the
continuous covariates), then forms the AIPW score per unit.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.special import ndtr

from .errors import DataError, DegenerateGroups
from .glm import BasisSpec, fit_glm
from .synth import CONTINUOUS_COLUMNS

INDICATOR_COLUMNS = ["period_2", "period_3"]


@dataclass
class AteResult:
    method: str
    estimate: float
    se: float
    ci95: tuple
    p_value: float
    psi: np.ndarray
    n1: int
    n0: int
    stratum: str = "pooled"

    def to_dict(self) -> dict:
        return {"method": self.method, "stratum": self.stratum,
                "n1": self.n1, "n0": self.n0,
                "estimate": self.estimate, "se": self.se,
                "ci_lo": self.ci95[0], "ci_hi": self.ci95[1],
                "p_value": self.p_value}


def result_from_scores(psi: np.ndarray, method: str, n1: int, n0: int,
                       stratum: str = "pooled") -> AteResult:
    """AteResult from per-unit scores: mean, influence se, CI, two-sided p."""
    n = len(psi)
    estimate = float(np.mean(psi))
    se = float(np.std(psi, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    if se > 0:
        z = estimate / se
        p = float(2.0 * (1.0 - ndtr(abs(z))))
    else:
        p = 1.0 if estimate == 0.0 else 0.0
    ci = (estimate - 1.96 * se, estimate + 1.96 * se)
    return AteResult(method, estimate, se, ci, p, psi, n1, n0, stratum)


def _validate(y, w, e_hat):
    y = np.asarray(y, dtype=float)
    w = np.asarray(w)
    e = np.asarray(e_hat, dtype=float)
    if not (len(y) == len(w) == len(e)):
        raise DataError("y, w, e_hat must have equal length")
    n1 = int(np.sum(w == 1))
    n0 = int(np.sum(w == 0))
    if n1 == 0 or n0 == 0:
        raise DegenerateGroups(f"need both arms non-empty, got n1={n1}, n0={n0}")
    if np.any(e <= 0.0) or np.any(e >= 1.0):
        raise DataError("propensities must lie strictly inside (0, 1); clip first")
    return y, w.astype(float), e, n1, n0


def ate_weights(w, e_hat) -> np.ndarray:
    """Inverse-probability weights w/e + (1-w)/(1-e)."""
    w = np.asarray(w, dtype=float)
    e = np.asarray(e_hat, dtype=float)
    return w / e + (1.0 - w) / (1.0 - e)


def ipw_ate(y, w, e_hat, hajek: bool = False, stratum: str = "pooled") -> AteResult:
    """Horvitz-Thompson inverse-probability-weighted ATE.

    Per-unit score psi_i = w y / e - (1-w) y / (1-e); the estimate is the mean
    score and se = sd(psi)/sqrt(n).  With ``hajek=True`` the arm means are
    weight-normalized and psi is recentred so mean(psi) still equals the
    estimate.
    """
    y, w, e, n1, n0 = _validate(y, w, e_hat)
    if not hajek:
        psi = w * y / e - (1.0 - w) * y / (1.0 - e)
        return result_from_scores(psi, "IPW", n1, n0, stratum)
    n = len(y)
    wt1 = w / e
    wt0 = (1.0 - w) / (1.0 - e)
    mu1 = float(np.sum(wt1 * y) / np.sum(wt1))
    mu0 = float(np.sum(wt0 * y) / np.sum(wt0))
    psi = (n * wt1 * (y - mu1) / np.sum(wt1)
           - n * wt0 * (y - mu0) / np.sum(wt0)
           + (mu1 - mu0))
    return result_from_scores(psi, "IPW-hajek", n1, n0, stratum)


def aipw_ate(y, w, e_hat, m1_hat, m0_hat, stratum: str = "pooled") -> AteResult:
    """Doubly robust (augmented IPW) ATE.

    Per-unit score
    psi_i = m1 - m0 + w (y - m1) / e - (1-w) (y - m0) / (1-e),
    i.e. the IPW contrast corrected by (w - e)/(e(1-e)) times the blend
    (1-e) m1 + e m0.  The influence-function se is sd(psi)/sqrt(n).
    """
    y, w, e, n1, n0 = _validate(y, w, e_hat)
    m1 = np.asarray(m1_hat, dtype=float)
    m0 = np.asarray(m0_hat, dtype=float)
    psi = m1 - m0 + w * (y - m1) / e - (1.0 - w) * (y - m0) / (1.0 - e)
    return result_from_scores(psi, "AIPW", n1, n0, stratum)


# ---------------------------------------------------------------------------
# Pipeline on the analysis matrix
# ---------------------------------------------------------------------------

@dataclass
class PipelineConfig:
    clip_eps: float = 0.01
    spline_df: int = 4
    propensity_link: str = "probit"
    method: str = "aipw"      # "aipw" | "ipw"
    hajek: bool = False


def model_basis(data: pd.DataFrame, pooled: bool, spline_df: int = 4) -> BasisSpec:
    """Table-1 covariates: splines on the continuous ones, period indicators
    linear, season dummies when pooling seasons.  Constant columns carry no
    information beyond the intercept and are skipped."""
    def varies(c):
        return c in data.columns and data[c].nunique() > 1

    continuous = [c for c in CONTINUOUS_COLUMNS if varies(c)]
    indicator = [c for c in INDICATOR_COLUMNS if varies(c)]
    categorical = []
    if pooled and varies("season"):
        categorical.append("season")
    return BasisSpec.from_columns(continuous, indicator, categorical, spline_df)


def fit_propensity(data: pd.DataFrame, config: PipelineConfig = PipelineConfig(),
                   pooled: bool = True):
    """Probit (default) propensity fit; returns (model, clipped e_hat)."""
    spec = model_basis(data, pooled, config.spline_df)
    model = fit_glm(data, data["w"].to_numpy(), spec, "binomial",
                    config.propensity_link, clip_eps=config.clip_eps)
    return model, model.predict(data)


def fit_outcome_models(data: pd.DataFrame, config: PipelineConfig = PipelineConfig(),
                       pooled: bool = True):
    """Gaussian-identity outcome fits per arm; returns (m1_hat, m0_hat) on all rows."""
    w = data["w"].to_numpy()
    treated = data[w == 1]
    control = data[w == 0]
    m1 = fit_glm(treated, treated["y"].to_numpy(),
                 model_basis(treated, pooled, config.spline_df), "gaussian", "identity")
    m0 = fit_glm(control, control["y"].to_numpy(),
                 model_basis(control, pooled, config.spline_df), "gaussian", "identity")
    return m1.predict(data), m0.predict(data)


def estimate_stratum(data: pd.DataFrame, config: PipelineConfig = PipelineConfig(),
                     stratum: str = "pooled") -> AteResult:
    pooled = stratum == "pooled"
    _, e_hat = fit_propensity(data, config, pooled)
    y = data["y"].to_numpy(dtype=float)
    w = data["w"].to_numpy()
    if config.method == "ipw":
        result = ipw_ate(y, w, e_hat, hajek=config.hajek, stratum=stratum)
    else:
        m1, m0 = fit_outcome_models(data, config, pooled)
        result = aipw_ate(y, w, e_hat, m1, m0, stratum=stratum)
    return result


def estimate_pipeline(data: pd.DataFrame, config: PipelineConfig = PipelineConfig()) -> dict:
    """ATE per season plus pooled; returns {stratum: AteResult}."""
    if len(data) == 0:
        raise DataError("empty analysis matrix")
    out = {}
    seasons = sorted(data["season"].unique()) if "season" in data.columns else []
    for season in seasons:
        subset = data[data["season"] == season].reset_index(drop=True)
        out[season] = estimate_stratum(subset, config, stratum=str(season))
    out["pooled"] = estimate_stratum(data.reset_index(drop=True), config, "pooled")
    return out


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

@dataclass
class BalanceReport:
    """Raw and weighted standardized mean differences per covariate.

    Both variants share the unweighted pooled SD denominator
    sqrt((var_treated + var_control) / 2).
    """

    table: pd.DataFrame
    threshold: float = 0.05

    def worst(self) -> float:
        return float(self.table["weighted_smd"].abs().max())


@dataclass
class OverlapReport:
    bin_edges: np.ndarray
    counts_treated: np.ndarray
    counts_control: np.ndarray
    range_treated: tuple = (np.nan, np.nan)
    range_control: tuple = (np.nan, np.nan)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "bin_lo": self.bin_edges[:-1],
            "bin_hi": self.bin_edges[1:],
            "treated": self.counts_treated,
            "control": self.counts_control,
        })


def balance_report(data: pd.DataFrame, weights, covariates=None,
                   threshold: float = 0.05) -> BalanceReport:
    """SMDs before and after weighting (weights from the fitted propensity)."""
    w = data["w"].to_numpy()
    weights = np.asarray(weights, dtype=float)
    if covariates is None:
        covariates = [c for c in CONTINUOUS_COLUMNS + INDICATOR_COLUMNS
                      if c in data.columns]
    rows = []
    t, c = w == 1, w == 0
    for cov in covariates:
        x = data[cov].to_numpy(dtype=float)
        pooled_sd = np.sqrt((np.var(x[t], ddof=1) + np.var(x[c], ddof=1)) / 2.0)
        zero_var = pooled_sd == 0.0 or not np.isfinite(pooled_sd)
        if zero_var:
            raw = wtd = 0.0
        else:
            raw = (x[t].mean() - x[c].mean()) / pooled_sd
            mt = np.sum(weights[t] * x[t]) / np.sum(weights[t])
            mc = np.sum(weights[c] * x[c]) / np.sum(weights[c])
            wtd = (mt - mc) / pooled_sd
        rows.append({"covariate": cov, "raw_smd": raw, "weighted_smd": wtd,
                     "zero_variance": zero_var})
    return BalanceReport(pd.DataFrame(rows), threshold)


def overlap_report(e_hat, w, n_bins: int = 20) -> OverlapReport:
    """Histogram of propensities by arm over shared [0, 1] bins."""
    e = np.asarray(e_hat, dtype=float)
    w = np.asarray(w)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    ct, _ = np.histogram(e[w == 1], bins=edges)
    cc, _ = np.histogram(e[w == 0], bins=edges)
    return OverlapReport(
        bin_edges=edges, counts_treated=ct, counts_control=cc,
        range_treated=(float(e[w == 1].min()), float(e[w == 1].max())),
        range_control=(float(e[w == 0].min()), float(e[w == 0].max())))
