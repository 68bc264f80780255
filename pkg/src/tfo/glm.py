"""Design-matrix construction with natural cubic spline bases and iteratively
reweighted least squares for binomial (probit/logit) and Gaussian (identity)
models.

The probit GAM here is the propensity model of the pipeline; the Gaussian
identity fit is the outcome model.  No penalization: fixed-knot bases keep
the fits exact, serializable, and cheap to refit inside bootstraps.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.linalg import qr as scipy_qr
from scipy.special import expit, ndtr

from .errors import (NonConvergence, RankDeficient, SchemaMismatch,
                     SeparationWarning)

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class Term:
    """One model term: 'linear', 'spline' (natural cubic, *df* columns),
    or 'indicator' (categorical expanded against a baseline level)."""

    column: str
    kind: str = "linear"
    df: int = 4


@dataclass
class BasisSpec:
    terms: list

    @classmethod
    def from_columns(cls, continuous, indicator=(), categorical=(), spline_df: int = 4):
        """Spline terms for *continuous*, linear terms for 0/1 *indicator*
        columns, expanded dummies for *categorical* columns."""
        terms = [Term(c, "spline", spline_df) for c in continuous]
        terms += [Term(c, "linear") for c in indicator]
        terms += [Term(c, "indicator") for c in categorical]
        return cls(terms)


def natural_spline_basis(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Natural cubic spline basis (no intercept column) for the given knots.

    With K knots the basis has K-1 columns: x itself plus K-2 functions
    d_k(x) - d_{K-1}(x), where d_k(x) = [(x-k_k)+^3 - (x-k_K)+^3] / (k_K-k_k).
    Linear beyond the boundary knots.
    """
    knots = np.asarray(knots, dtype=float)
    K = len(knots)
    x = np.asarray(x, dtype=float)
    cols = [x]
    if K >= 3:
        def d(k):
            num = np.clip(x - knots[k], 0, None) ** 3 - np.clip(x - knots[-1], 0, None) ** 3
            return num / (knots[-1] - knots[k])
        d_last = d(K - 2)
        for k in range(K - 2):
            cols.append(d(k) - d_last)
    return np.column_stack(cols)


def spline_knots(x: np.ndarray, df: int) -> np.ndarray:
    """df+1 knots at equally spaced quantiles (0, 1/df, ..., 1) of *x*.

    Deduplicated, and capped at the covariate's distinct values so a discrete
    covariate cannot get more basis columns than it has degrees of freedom;
    ties therefore shrink the effective df (two distinct values fall back to
    a linear column).
    """
    x = np.asarray(x, dtype=float)
    distinct = np.unique(x)
    qs = np.linspace(0.0, 1.0, df + 1)
    knots = np.unique(np.quantile(x, qs))
    if len(knots) > len(distinct):
        knots = distinct
    return knots


@dataclass
class DesignInfo:
    """Fitted basis state: knots per spline term, levels per categorical term,
    and the expanded column names."""

    terms: list
    knots: dict = field(default_factory=dict)
    levels: dict = field(default_factory=dict)
    columns: list = field(default_factory=list)


def build_design(data: pd.DataFrame, spec: BasisSpec, info: DesignInfo | None = None,
                 rank_check: bool = True):
    """Expand *data* into a design matrix with intercept.

    When *info* is None the basis state (spline knots at training quantiles,
    categorical levels) is learned from *data* and returned alongside the
    matrix; otherwise the stored state is applied.  Raises RankDeficient
    (with offending column names) when the expanded matrix is collinear, and
    SchemaMismatch when *data* lacks a required column.
    """
    fitting = info is None
    if fitting:
        info = DesignInfo(terms=list(spec.terms))
    cols = [np.ones(len(data))]
    names = ["(intercept)"]
    for term in info.terms:
        if term.column not in data.columns:
            raise SchemaMismatch(f"missing covariate column {term.column!r}")
        x = data[term.column].to_numpy()
        if term.kind == "linear":
            cols.append(x.astype(float))
            names.append(term.column)
        elif term.kind == "spline":
            if not np.all(np.isfinite(x.astype(float))):
                raise SchemaMismatch(f"non-finite values in {term.column!r}")
            if fitting:
                info.knots[term.column] = spline_knots(x, term.df)
            knots = info.knots[term.column]
            basis = natural_spline_basis(x, knots)
            cols.append(basis)
            names.extend(f"{term.column}:ns{i + 1}" for i in range(basis.shape[1]))
        elif term.kind == "indicator":
            if fitting:
                info.levels[term.column] = sorted(pd.unique(x).tolist())
            levels = info.levels[term.column]
            unseen = set(pd.unique(x)) - set(levels)
            if unseen:
                raise SchemaMismatch(f"unseen {term.column!r} levels: {sorted(unseen)}")
            for lev in levels[1:]:
                cols.append((x == lev).astype(float))
                names.append(f"{term.column}[{lev}]")
        else:
            raise ValueError(f"unknown term kind {term.kind!r}")
    X = np.column_stack(cols)
    if fitting:
        info.columns = names
        if rank_check:
            _check_rank(X, names)
    return (X, info) if fitting else X


def _check_rank(X: np.ndarray, names: list) -> None:
    r = scipy_qr(X, mode="r", pivoting=True)
    R, piv = r[0], r[1]
    diag = np.abs(np.diag(R))
    tol = diag[0] * max(X.shape) * np.finfo(float).eps if diag.size else 0.0
    rank = int(np.sum(diag > tol))
    if rank < X.shape[1]:
        offending = [names[j] for j in piv[rank:]]
        raise RankDeficient(offending)


def _link_funcs(link: str):
    if link == "logit":
        def mean(eta):
            return expit(eta)

        def dmu(eta):
            mu = expit(eta)
            return mu * (1.0 - mu)
    elif link == "probit":
        def mean(eta):
            return ndtr(eta)

        def dmu(eta):
            return np.exp(-0.5 * eta * eta) / _SQRT_2PI
    else:
        raise ValueError(f"unsupported binomial link {link!r}")
    return mean, dmu


def _binomial_deviance(y, mu):
    mu = np.clip(mu, 1e-12, 1 - 1e-12)
    return -2.0 * float(np.sum(y * np.log(mu) + (1 - y) * np.log(1 - mu)))


@dataclass
class FittedGlm:
    """Coefficients plus the basis state needed to reproduce predictions."""

    family: str
    link: str
    coef: np.ndarray
    info: DesignInfo
    n_iter: int = 0
    deviance: float = np.nan
    converged: bool = True
    clip_eps: float = 0.01

    def linear_predictor(self, data: pd.DataFrame) -> np.ndarray:
        X = build_design(data, BasisSpec(self.info.terms), info=self.info)
        return X @ self.coef

    def predict(self, data: pd.DataFrame) -> np.ndarray:
        """Fitted means; binomial probabilities are clipped to
        [clip_eps, 1 - clip_eps]."""
        eta = self.linear_predictor(data)
        if self.family == "gaussian":
            return eta
        mean, _ = _link_funcs(self.link)
        return np.clip(mean(eta), self.clip_eps, 1.0 - self.clip_eps)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "link": self.link,
            "clip_eps": self.clip_eps,
            "coef": self.coef.tolist(),
            "columns": list(self.info.columns),
            "terms": [{"column": t.column, "kind": t.kind, "df": t.df}
                      for t in self.info.terms],
            "knots": {c: k.tolist() for c, k in self.info.knots.items()},
            "levels": {c: list(v) for c, v in self.info.levels.items()},
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "FittedGlm":
        info = DesignInfo(
            terms=[Term(t["column"], t["kind"], t["df"]) for t in d["terms"]],
            knots={c: np.asarray(k, dtype=float) for c, k in d["knots"].items()},
            levels=dict(d["levels"]),
            columns=list(d["columns"]),
        )
        return cls(family=d["family"], link=d["link"], coef=np.asarray(d["coef"]),
                   info=info, clip_eps=d["clip_eps"])

    @classmethod
    def from_json(cls, path) -> "FittedGlm":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _wls(X, z, w):
    sw = np.sqrt(w)
    beta, *_ = np.linalg.lstsq(X * sw[:, None], z * sw, rcond=None)
    return beta


def fit_irls(X: np.ndarray, y: np.ndarray, family: str, link: str,
             tol: float = 1e-10, max_iter: int = 50, clip_eps: float = 0.01,
             info: DesignInfo | None = None) -> FittedGlm:
    """IRLS on a prebuilt design matrix.

    Gaussian/identity solves in one weighted-least-squares step.  Binomial
    IRLS converges when max |delta coef| < *tol*; the deviance is kept
    non-increasing by step halving.  Raises NonConvergence (carrying the last
    iterate) after *max_iter* iterations; warns SeparationWarning when more
    than 10% of fitted probabilities sit at the clip bounds.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    info = info if info is not None else DesignInfo(terms=[])
    if family == "gaussian":
        if link != "identity":
            raise ValueError("gaussian family supports the identity link only")
        beta = _wls(X, y, np.ones(len(y)))
        resid = y - X @ beta
        return FittedGlm("gaussian", "identity", beta, info, n_iter=1,
                         deviance=float(resid @ resid), clip_eps=clip_eps)
    if family != "binomial":
        raise ValueError(f"unsupported family {family!r}")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("binomial response must be 0/1")

    mean, dmu = _link_funcs(link)
    beta = np.zeros(X.shape[1])
    dev = _binomial_deviance(y, mean(X @ beta))
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        eta = X @ beta
        mu = mean(eta)
        g = np.clip(dmu(eta), 1e-10, None)
        var = np.clip(mu * (1.0 - mu), 1e-10, None)
        w = g * g / var
        z = eta + (y - mu) / g
        proposal = _wls(X, z, w)
        # step-halve until the deviance stops increasing
        step = proposal - beta
        new_dev = _binomial_deviance(y, mean(X @ (beta + step)))
        halvings = 0
        while new_dev > dev + 1e-12 and halvings < 20:
            step *= 0.5
            halvings += 1
            new_dev = _binomial_deviance(y, mean(X @ (beta + step)))
        delta = float(np.max(np.abs(step)))
        beta = beta + step
        dev = new_dev
        if delta < tol:
            break
    model = FittedGlm("binomial", link, beta, info, n_iter=n_iter, deviance=dev,
                      clip_eps=clip_eps)
    mu_hat = mean(X @ beta)
    at_bounds = np.mean((mu_hat <= clip_eps) | (mu_hat >= 1.0 - clip_eps))
    separated = at_bounds > 0.10
    if separated:
        warnings.warn(
            f"{at_bounds:.0%} of fitted probabilities at the clip bounds; "
            "possible separation", SeparationWarning)
    if n_iter >= max_iter and delta >= tol:
        model.converged = False
        if not separated:
            raise NonConvergence(
                f"IRLS did not converge in {max_iter} iterations (last step {delta:.2e})",
                model=model)
    return model


def fit_glm(data: pd.DataFrame, y: np.ndarray, spec: BasisSpec, family: str,
            link: str, clip_eps: float = 0.01, **kwargs) -> FittedGlm:
    """Build the design from *data* per *spec* and run IRLS."""
    X, info = build_design(data, spec)
    return fit_irls(X, y, family, link, clip_eps=clip_eps, info=info, **kwargs)
