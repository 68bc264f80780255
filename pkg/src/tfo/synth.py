"""Synthetic data with known ground truth: scripted play-by-play streams for
the labeling pipeline and covariate/outcome generators for the estimators.

Generated analysis tables use the same column schema the real pipeline emits,
so every estimator can be exercised end to end against stored truth.
"""

import json
from dataclasses import dataclass, field, asdict

import numpy as np
import pandas as pd
from scipy.special import ndtr

from .errors import DataError, PositivityViolation
from .pbp import PBP_COLUMNS

ANALYSIS_COLUMNS = ["w", "y", "period_2", "period_3", "time_left", "score_margin",
                    "max_rating", "max_rating_opp", "mean_rating", "mean_rating_opp",
                    "spread", "total_score", "season",
                    "rating_max_diff", "rating_mean_diff", "abs_score_margin"]

CONTINUOUS_COLUMNS = ["time_left", "score_margin", "max_rating", "max_rating_opp",
                      "mean_rating", "mean_rating_opp", "spread", "total_score"]

# Reference location/scale used to standardize covariates inside the
# generator's linear indices (so coefficient magnitudes are comparable).
# score_margin draws are clipped to +-20 so its z-score is bounded by 2.5,
# which keeps probit indices controllable for the positivity check.
_STANDARDIZE = {
    "time_left": (39.0, 2.31),
    "score_margin": (0.0, 8.0),
    "max_rating": (91.0, 4.0),
    "max_rating_opp": (91.0, 4.0),
    "mean_rating": (79.5, 5.0),
    "mean_rating_opp": (79.5, 5.0),
    "spread": (0.0, 6.0),
    "total_score": (222.0, 12.0),
}


# ---------------------------------------------------------------------------
# Scripted play-by-play streams
# ---------------------------------------------------------------------------

def script_pbp(scenario: dict) -> pd.DataFrame:
    """Render a scripted scenario as pbp.csv-format rows.

    *scenario* is ``{"game_id": str, "periods": {period: [play, ...]}}`` where
    each play is ``{"clock": "M:SS", "team": "home"|"visitor", "desc": str}``
    plus optional ``"score": (home, visitor)``.  An 'End of Period' row is
    appended to each period unless the script already has one.
    """
    rows = []
    game_id = scenario["game_id"]
    for period in sorted(scenario["periods"]):
        plays = scenario["periods"][period]
        for play in plays:
            score = play.get("score")
            rows.append({
                "game_id": game_id,
                "period": period,
                "clock": play["clock"],
                "home_desc": play["desc"] if play["team"] == "home" else "",
                "visitor_desc": play["desc"] if play["team"] == "visitor" else "",
                "home_score": "" if score is None else score[0],
                "visitor_score": "" if score is None else score[1],
            })
        if not any("end of" in p["desc"].casefold() for p in plays):
            rows.append({"game_id": game_id, "period": period, "clock": "0:00",
                         "home_desc": f"End of {period} Period", "visitor_desc": "",
                         "home_score": "", "visitor_score": ""})
    return pd.DataFrame(rows, columns=PBP_COLUMNS)


def worked_example_scenario() -> dict:
    """The Suns/Warriors worked example: a first-period non-attempt that loses
    three points of margin and a second-period attempt that gains five."""
    return {
        "game_id": "0021800002",
        "periods": {
            1: [
                {"clock": "1:30", "team": "home",
                 "desc": "Durant 12' Jump Shot (10 PTS)", "score": (29, 23)},
                {"clock": "0:42", "team": "home",
                 "desc": "Curry Out of Bounds - Bad Pass Turnover (P3.T5)"},
                {"clock": "0:25", "team": "visitor",
                 "desc": "Booker Discontinue Dribble Turnover (P2.T3)"},
                {"clock": "0:25", "team": "home", "desc": "SUB: Cook FOR Looney"},
                {"clock": "0:25", "team": "home", "desc": "SUB: Thompson FOR McKinnie"},
                {"clock": "0:07", "team": "home",
                 "desc": "Jerebko 27' 3PT Step Back Jump Shot (3 PTS) (Thompson 2 AST)",
                 "score": (32, 23)},
                {"clock": "0:01", "team": "home", "desc": "MISS Curry 55' 3PT Jump Shot"},
                {"clock": "0:00", "team": "home", "desc": "WARRIORS Rebound"},
            ],
            2: [
                {"clock": "1:00", "team": "home",
                 "desc": "Curry 26' 3PT Jump Shot (20 PTS)", "score": (65, 45)},
                {"clock": "0:37", "team": "visitor",
                 "desc": "Booker 4' Driving Finger Roll Layup (14 PTS)", "score": (65, 47)},
                {"clock": "0:31", "team": "home",
                 "desc": "Durant 3' Driving Dunk (15 PTS)", "score": (67, 47)},
                {"clock": "0:12", "team": "visitor",
                 "desc": "Booker Out of Bounds Lost Ball Turnover (P5.T9)"},
                {"clock": "0:12", "team": "home", "desc": "SUB: Cook FOR Jones"},
                {"clock": "0:12", "team": "visitor", "desc": "SUB: Bridges FOR Anderson"},
                {"clock": "0:01", "team": "home",
                 "desc": "Cook 24' 3PT Pullup Jump Shot (4 PTS) (Thompson 3 AST)",
                 "score": (70, 47)},
            ],
            3: [
                {"clock": "6:00", "team": "visitor",
                 "desc": "Booker 15' Pullup Jump Shot (16 PTS)", "score": (72, 49)},
            ],
        },
    }


def random_pbp_stream(rng: np.random.Generator, game_id: str = "g0",
                      n_periods: int = 3) -> pd.DataFrame:
    """A random but structurally plausible stream in pbp.csv format.

    Possessions alternate with random durations; each ends in a made shot,
    a missed shot plus rebound, a turnover, a foul, a violation, or a jump
    ball, with occasional substitutions.  Scores appear on scoring rows only.
    """
    rows = []
    score = [0, 0]
    players = {"home": ["Alpha", "Bravo", "Carter", "Davis", "Evans"],
               "visitor": ["Foster", "Garcia", "Hayes", "Irving", "Jones"]}
    bench = {"home": ["King", "Lopez"], "visitor": ["Moore", "Nash"]}

    def emit(period, clock, team, desc, with_score=False):
        rows.append({
            "game_id": game_id, "period": period, "clock": f"{clock // 60}:{clock % 60:02d}",
            "home_desc": desc if team == "home" else "",
            "visitor_desc": desc if team == "visitor" else "",
            "home_score": score[0] if with_score else "",
            "visitor_score": score[1] if with_score else "",
        })

    for period in range(1, n_periods + 1):
        clock = 720
        offense = "home" if rng.random() < 0.5 else "visitor"
        while clock > 0:
            clock = max(0, clock - int(rng.integers(4, 22)))
            team = offense
            opp = "visitor" if team == "home" else "home"
            shooter = players[team][int(rng.integers(0, 5))]
            roll = rng.random()
            if roll < 0.38:
                pts = 3 if rng.random() < 0.3 else 2
                score[0 if team == "home" else 1] += pts
                verb = "3PT Jump Shot" if pts == 3 else "Driving Layup"
                emit(period, clock, team, f"{shooter} {verb} ({pts} PTS)", with_score=True)
                offense = opp
            elif roll < 0.62:
                emit(period, clock, team, f"MISS {shooter} 18' Jump Shot")
                rb_team = opp if rng.random() < 0.75 else team
                rebounder = players[rb_team][int(rng.integers(0, 5))]
                emit(period, clock, rb_team, f"{rebounder} REBOUND (Off:1 Def:2)")
                offense = rb_team
            elif roll < 0.78:
                emit(period, clock, team, f"{shooter} Lost Ball Turnover (P1.T2)")
                offense = opp
            elif roll < 0.88:
                fouler = players[opp][int(rng.integers(0, 5))]
                emit(period, clock, opp, f"{fouler} P.FOUL (P2.T3)")
                if rng.random() < 0.5:
                    score[0 if team == "home" else 1] += 1
                    emit(period, clock, team, f"{shooter} Free Throw 1 of 2")
                    emit(period, clock, team, f"{shooter} Free Throw 2 of 2", with_score=True)
                    offense = opp
            elif roll < 0.94:
                emit(period, clock, team, f"{shooter} Out of Bounds Violation")
                offense = opp
            else:
                winner = players[team][0]
                emit(period, clock, team, f"Jump Ball {shooter} vs. Garcia: Tip to {winner}")
            if rng.random() < 0.08 and bench[team]:
                sub_in = bench[team].pop()
                sub_out = players[team][int(rng.integers(0, 5))]
                emit(period, clock, team, f"SUB: {sub_in} FOR {sub_out}")
                players[team][players[team].index(sub_out)] = sub_in
                bench[team].append(sub_out)
        emit(period, 0, "home", f"End of {period} Period")
    return pd.DataFrame(rows, columns=PBP_COLUMNS)


# ---------------------------------------------------------------------------
# Covariate/outcome generator with known truth
# ---------------------------------------------------------------------------

@dataclass
class EffectSpec:
    """Treatment-effect function: 'constant', 'threshold', or 'linear'."""

    kind: str = "constant"
    value: float = 0.5          # constant level / threshold high level
    variable: str = "time_left"  # threshold & linear kinds
    threshold: float = 39.0     # threshold kind: tau = value * 1{x > threshold}
    slope: float = 0.0          # linear kind: tau = value + slope * z(x)

    def evaluate(self, data: pd.DataFrame) -> np.ndarray:
        n = len(data)
        if self.kind == "constant":
            return np.full(n, float(self.value))
        loc, scale = _STANDARDIZE.get(self.variable, (0.0, 1.0))
        x = data[self.variable].to_numpy(dtype=float)
        if self.kind == "threshold":
            return np.where(x > self.threshold, float(self.value), 0.0)
        if self.kind == "linear":
            return self.value + self.slope * (x - loc) / scale
        raise DataError(f"unknown effect kind {self.kind!r}")


@dataclass
class DgpSpec:
    """Generator settings: sample size, linear indices on standardized
    covariates, the effect function, and the noise level."""

    n: int = 2000
    seed: int = 0
    propensity_intercept: float = 0.3
    propensity_coefs: dict = field(default_factory=dict)   # covariate -> probit coef
    baseline_intercept: float = 0.0
    baseline_coefs: dict = field(default_factory=dict)     # covariate -> linear coef
    effect: EffectSpec = field(default_factory=EffectSpec)
    noise_sd: float = 2.0
    seasons: tuple = ("2018-19", "2021-22")

    @classmethod
    def from_json(cls, path) -> "DgpSpec":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        raw["effect"] = EffectSpec(**raw.get("effect", {}))
        raw["seasons"] = tuple(raw.get("seasons", ("2018-19", "2021-22")))
        return cls(**raw)

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2)


def _standardized(data: pd.DataFrame, coefs: dict) -> np.ndarray:
    index = np.zeros(len(data))
    for cov, coef in coefs.items():
        loc, scale = _STANDARDIZE.get(cov, (0.0, 1.0))
        index += coef * (data[cov].to_numpy(dtype=float) - loc) / scale
    return index


def generate(spec: DgpSpec):
    """Draw one sample: (analysis DataFrame, truth dict).

    The truth dict stores the sample-average treatment effect ('ate'), the
    per-row effects ('cate'), and the implied propensities ('propensity').
    Raises PositivityViolation when any implied propensity leaves
    [0.05, 0.95].
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    period = rng.integers(1, 4, size=n)
    ratings = rng.uniform(60, 99, size=(n, 5))
    ratings_opp = rng.uniform(60, 99, size=(n, 5))
    data = pd.DataFrame({
        "period_2": (period == 2).astype(int),
        "period_3": (period == 3).astype(int),
        "time_left": rng.uniform(35, 43, size=n),
        "score_margin": np.round(np.clip(rng.normal(0, 8, size=n), -20, 20)).astype(int),
        "max_rating": ratings.max(axis=1),
        "max_rating_opp": ratings_opp.max(axis=1),
        "mean_rating": ratings.mean(axis=1),
        "mean_rating_opp": ratings_opp.mean(axis=1),
        "spread": rng.normal(0, 6, size=n),
        "total_score": rng.normal(222, 12, size=n),
        "season": rng.choice(list(spec.seasons), size=n),
    })
    e = ndtr(spec.propensity_intercept + _standardized(data, spec.propensity_coefs))
    if e.min() < 0.05 or e.max() > 0.95:
        raise PositivityViolation(
            f"implied propensities span [{e.min():.3f}, {e.max():.3f}], "
            "outside the allowed [0.05, 0.95]")
    w = (rng.random(n) < e).astype(int)
    tau = spec.effect.evaluate(data)
    m = spec.baseline_intercept + _standardized(data, spec.baseline_coefs)
    y = m + w * tau + rng.normal(0, spec.noise_sd, size=n)
    data.insert(0, "y", y)
    data.insert(0, "w", w)
    data["rating_max_diff"] = data["max_rating"] - data["max_rating_opp"]
    data["rating_mean_diff"] = data["mean_rating"] - data["mean_rating_opp"]
    data["abs_score_margin"] = data["score_margin"].abs()
    data = data[ANALYSIS_COLUMNS]
    truth = {"ate": float(tau.mean()), "cate": tau, "propensity": e}
    return data, truth


def confounded_constant_spec(tau: float = 0.66, n: int = 2000, seed: int = 0) -> DgpSpec:
    """Constant effect with strong confounding through time left.

    The probit index stays inside [-1.61, 1.61] (time-left z-score is bounded
    by sqrt(3), margin z-score by 2.5), so implied propensities respect the
    [0.05, 0.95] positivity band by construction.
    """
    return DgpSpec(
        n=n, seed=seed,
        propensity_intercept=0.0,
        propensity_coefs={"time_left": 0.75, "score_margin": -0.12},
        baseline_intercept=0.0,
        baseline_coefs={"time_left": 1.2, "score_margin": -0.8, "spread": 0.5,
                        "mean_rating": 0.4, "mean_rating_opp": -0.4},
        effect=EffectSpec(kind="constant", value=tau),
        noise_sd=2.0)


def randomized_spec(tau: float = 0.5, n: int = 2000, seed: int = 0,
                    noise_sd: float = 2.0) -> DgpSpec:
    """Coin-flip treatment (share 0.5) with a constant effect."""
    return DgpSpec(n=n, seed=seed, propensity_intercept=0.0, propensity_coefs={},
                   baseline_coefs={"time_left": 1.0, "score_margin": -0.5},
                   effect=EffectSpec(kind="constant", value=tau), noise_sd=noise_sd)


def threshold_spec(high: float = 2.0, n: int = 2000, seed: int = 0,
                   variable: str = "time_left", threshold: float = 39.0,
                   noise_sd: float = 2.0, confounded: bool = False) -> DgpSpec:
    """Sharp effect jump: tau = high * 1{variable > threshold}."""
    pcoefs = {"time_left": 0.5, "score_margin": -0.3} if confounded else {}
    return DgpSpec(n=n, seed=seed, propensity_intercept=0.0, propensity_coefs=pcoefs,
                   baseline_coefs={"time_left": 1.0, "score_margin": -0.5},
                   effect=EffectSpec(kind="threshold", value=high, variable=variable,
                                     threshold=threshold),
                   noise_sd=noise_sd)
