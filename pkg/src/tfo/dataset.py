"""Join labeled observations with on-court lineups, player ratings, and
betting odds into the analysis matrix.

Inputs: ``ratings.csv`` (season,player,rating), ``odds.csv``
(game_id,home_spread,total), optional ``aliases.csv`` (raw,canonical).
Output: ``analysis.csv`` with the exact column set in
:data:`tfo.synth.ANALYSIS_COLUMNS`.

Spread convention: ``home_spread`` is the bookmaker line (negative when the
home side is favored); the emitted ``spread`` is flipped to the observing
team's perspective, positive when that team is projected to win.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataError
from .label import ATTEMPT, NON_ATTEMPT
from .names import match_name, normalize_name
from .pbp import HOME, other_team
from .synth import ANALYSIS_COLUMNS


@dataclass
class GameBundle:
    """One game's canonical events, per-event lineup snapshots, and labels."""

    events: list
    lineups: list
    observations: list


class RatingsTable:
    """Season/player -> rating lookup with normalization and alias fallback."""

    def __init__(self, frame: pd.DataFrame, aliases: dict | None = None):
        self.aliases = {normalize_name(k): v for k, v in (aliases or {}).items()}
        self._by_season: dict[str, dict[str, float]] = {}
        for season, grp in frame.groupby("season"):
            table = {}
            for _, rec in grp.iterrows():
                key = normalize_name(rec["player"])
                if key in table:
                    raise DataError(f"duplicate rating for {rec['player']!r} in {season}")
                table[key] = float(rec["rating"])
            self._by_season[str(season)] = table

    @classmethod
    def from_csv(cls, path, aliases_path=None) -> "RatingsTable":
        frame = pd.read_csv(path)
        if list(frame.columns) != ["season", "player", "rating"]:
            raise DataError(f"ratings.csv must have columns season,player,rating, "
                            f"got {list(frame.columns)}")
        aliases = read_aliases_csv(aliases_path) if aliases_path else None
        return cls(frame, aliases)

    def lookup(self, season: str, player: str) -> float | None:
        table = self._by_season.get(str(season))
        if table is None:
            return None
        key = normalize_name(player)
        key = normalize_name(self.aliases.get(key, key))
        if key in table:
            return table[key]
        matched = match_name(player, table.keys())
        return table[matched] if matched is not None else None


def read_aliases_csv(path) -> dict:
    aliases = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["raw", "canonical"]:
            raise DataError("aliases.csv must have columns raw,canonical")
        for rec in reader:
            aliases[rec["raw"]] = rec["canonical"]
    return aliases


def read_odds_csv(path) -> pd.DataFrame:
    frame = pd.read_csv(path, dtype={"game_id": str})
    if list(frame.columns) != ["game_id", "home_spread", "total"]:
        raise DataError(f"odds.csv must have columns game_id,home_spread,total, "
                        f"got {list(frame.columns)}")
    if frame["game_id"].duplicated().any():
        raise DataError("odds.csv must have one row per game")
    return frame


@dataclass
class DropReport:
    """Rows dropped during assembly, by cause; join is lossless modulo these."""

    missing_rating: int = 0
    missing_odds: int = 0
    missing_lineup: int = 0
    details: list = field(default_factory=list)

    @property
    def total(self) -> int:
        return self.missing_rating + self.missing_odds + self.missing_lineup

    def record(self, cause: str, message: str) -> None:
        setattr(self, cause, getattr(self, cause) + 1)
        self.details.append(message)


def _side_ratings(players, season, ratings, report, label) -> tuple | None:
    if len(players) != 5:
        report.record("missing_lineup", f"{label}: lineup has {len(players)} players")
        return None
    values = []
    for p in players:
        r = ratings.lookup(season, p)
        if r is None:
            report.record("missing_rating", f"{label}: no rating for {p!r}")
            return None
        values.append(r)
    return max(values), float(np.mean(values))


def assemble(bundles: dict[str, GameBundle], ratings: RatingsTable,
             odds: pd.DataFrame):
    """Build the analysis matrix: one row per non-excluded observation.

    Returns (DataFrame with ANALYSIS_COLUMNS, DropReport).  Rows missing a
    rating, odds line, or 5-player lineup are dropped and counted.
    """
    odds_by_game = odds.set_index("game_id") if len(odds) else pd.DataFrame()
    rows = []
    report = DropReport()
    for game_id, bundle in bundles.items():
        for obs in bundle.observations:
            if obs.classification not in (ATTEMPT, NON_ATTEMPT):
                continue
            label = f"{game_id} P{obs.period} {obs.gain_clock_s}s {obs.team}"
            if obs.gain_index < 0 or obs.gain_index >= len(bundle.lineups):
                report.record("missing_lineup", f"{label}: no lineup snapshot")
                continue
            snapshot = bundle.lineups[obs.gain_index]
            own = _side_ratings(snapshot.get(obs.team, ()), obs.season, ratings,
                                report, label)
            if own is None:
                continue
            opp = _side_ratings(snapshot.get(other_team(obs.team), ()), obs.season,
                                ratings, report, label)
            if opp is None:
                continue
            if game_id not in odds_by_game.index:
                report.record("missing_odds", f"{label}: no odds for game")
                continue
            line = odds_by_game.loc[game_id]
            # bookmaker line is negative when home is favored; flip to the
            # observing team's projected winning margin
            spread = -float(line["home_spread"]) if obs.team == HOME else float(line["home_spread"])
            max_r, mean_r = own
            max_o, mean_o = opp
            rows.append({
                "w": obs.w,
                "y": obs.pod,
                "period_2": int(obs.period == 2),
                "period_3": int(obs.period == 3),
                "time_left": obs.gain_clock_s,
                "score_margin": obs.score_margin_at_gain,
                "max_rating": max_r,
                "max_rating_opp": max_o,
                "mean_rating": mean_r,
                "mean_rating_opp": mean_o,
                "spread": spread,
                "total_score": float(line["total"]),
                "season": obs.season,
                "rating_max_diff": max_r - max_o,
                "rating_mean_diff": mean_r - mean_o,
                "abs_score_margin": abs(obs.score_margin_at_gain),
            })
    matrix = pd.DataFrame(rows, columns=ANALYSIS_COLUMNS)
    return matrix, report


def summarize(matrix: pd.DataFrame) -> dict:
    """Group counts per season and pooled, plus covariate means/SDs by arm."""
    if len(matrix) == 0:
        return {"counts": {}, "covariates": pd.DataFrame()}
    counts = {}
    seasons = sorted(matrix["season"].unique())
    for key in list(seasons) + ["pooled"]:
        sub = matrix if key == "pooled" else matrix[matrix["season"] == key]
        counts[key] = {"attempts": int((sub["w"] == 1).sum()),
                       "non_attempts": int((sub["w"] == 0).sum()),
                       "rows": int(len(sub))}
    numeric = [c for c in ANALYSIS_COLUMNS if c not in ("season", "w")]
    stats = matrix.groupby("w")[numeric].agg(["mean", "std"])
    return {"counts": counts, "covariates": stats}


def write_analysis_csv(matrix: pd.DataFrame, path) -> None:
    matrix.to_csv(path, index=False)


def read_analysis_csv(path) -> pd.DataFrame:
    frame = pd.read_csv(path)
    missing = [c for c in ANALYSIS_COLUMNS if c not in frame.columns]
    if missing:
        raise DataError(f"analysis.csv is missing columns {missing}")
    return frame[ANALYSIS_COLUMNS]
