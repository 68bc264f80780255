"""Two-for-one opportunity detection, attempt/non-attempt labeling, and the
points-over-difference outcome.

An opportunity opens when a team gains possession with 35-43 seconds left in
periods 1-3 (opponent make, defensive rebound, opponent turnover, or a won
jump ball).  It becomes an attempt when the team shoots or draws a foul with
at least 28 seconds on the clock, a non-attempt when the team holds the ball
past that mark, and is excluded otherwise (turnover / other dead ball before
the mark, or a repeat opportunity by the same team in the same period).
"""

import csv
import warnings
from dataclasses import dataclass

from .errors import DataError, UnresolvedOpportunityWarning
from .pbp import HOME, CanonEvent, other_team, season_from_game_id

ATTEMPT = "Attempt"
NON_ATTEMPT = "NonAttempt"
EXCLUDED = "Excluded"

TURNOVER_BEFORE_CUTOFF = "TurnoverBeforeCutoff"
OTHER_PLAY_BEFORE_CUTOFF = "OtherPlayBeforeCutoff"
REPEAT_OPPORTUNITY = "RepeatOpportunity"

OPPONENT_MADE = "OpponentMade"
DEFENSIVE_REBOUND = "DefensiveRebound"
OPPONENT_TURNOVER = "OpponentTurnover"
JUMP_BALL_WON = "JumpBallWon"

OBSERVATIONS_COLUMNS = ["game_id", "season", "period", "team", "gain_clock_s",
                        "gain_reason", "classification", "exclusion_reason", "w", "pod"]


@dataclass(frozen=True)
class TfoDefinition:
    """Timing cutoffs of the treatment definition, in seconds remaining."""

    window_upper_s: int = 43
    window_lower_s: int = 35
    attempt_cutoff_s: int = 28

    def __post_init__(self):
        if not (self.window_upper_s > self.window_lower_s > self.attempt_cutoff_s > 0):
            raise DataError(f"cutoffs must satisfy upper > lower > attempt > 0, got {self}")


@dataclass
class Pod:
    """Change in score margin from the possession gain to the period end."""

    value: int
    team_points: int
    opponent_points: int


@dataclass
class TfoObservation:
    game_id: str
    season: str
    period: int
    team: str
    gain_clock_s: int
    gain_reason: str
    classification: str
    exclusion_reason: str | None = None
    score_margin_at_gain: int = 0
    pod: int | None = None
    gain_index: int = -1  # index into the game's event list; not serialized

    @property
    def w(self) -> int | None:
        if self.classification == ATTEMPT:
            return 1
        if self.classification == NON_ATTEMPT:
            return 0
        return None


def gain_trigger(ev: CanonEvent):
    """Possession-gain reading of one event: (gaining team, reason) or None."""
    if ev.kind == "ShotMade":
        return other_team(ev.team), OPPONENT_MADE
    if ev.kind == "FreeThrowMade" and ev.ft_final:
        return other_team(ev.team), OPPONENT_MADE
    if ev.kind == "ReboundDefensive":
        return ev.team, DEFENSIVE_REBOUND
    if ev.kind == "Turnover":
        return other_team(ev.team), OPPONENT_TURNOVER
    if ev.kind == "JumpBall":
        return ev.team, JUMP_BALL_WON
    return None


def classify_opportunity(team: str, events: list[CanonEvent], start: int,
                         definition: TfoDefinition):
    """Classify the opportunity opened for *team* at event index *start*.

    Scans the remaining events of the period in order.  At or above the
    attempt cutoff: a shot by the team or a foul by the opponent makes an
    Attempt; a team turnover or a jump ball / violation excludes.  The first
    event strictly below the cutoff (or the period ending) means the team held
    the ball through the mark: NonAttempt.  Returns
    (classification, exclusion_reason, end_index) where end_index points at
    the period's final event, or None when the stream ends mid-period.
    """
    cutoff = definition.attempt_cutoff_s
    period = events[start].period
    last_in_period = start
    for i in range(start + 1, len(events)):
        ev = events[i]
        if ev.period != period:
            # a later period started without a PeriodEnd row: implicit buzzer
            return NON_ATTEMPT, None, last_in_period
        last_in_period = i
        if ev.kind == "PeriodEnd":
            return NON_ATTEMPT, None, i
        if ev.clock_s < cutoff:
            return NON_ATTEMPT, None, _period_end_index(events, i, period)
        if ev.team == team and ev.kind in ("ShotMade", "ShotMissed"):
            return ATTEMPT, None, _period_end_index(events, i, period)
        if ev.team != team and ev.kind == "FoulCommitted":
            return ATTEMPT, None, _period_end_index(events, i, period)
        if ev.team == team and ev.kind == "Turnover":
            return EXCLUDED, TURNOVER_BEFORE_CUTOFF, None
        if ev.kind in ("JumpBall", "Violation"):
            return EXCLUDED, OTHER_PLAY_BEFORE_CUTOFF, None
        if ev.team != team and ev.kind in ("ShotMade", "ShotMissed", "FreeThrowMade",
                                           "FreeThrowMissed", "Turnover", "ReboundOffensive"):
            # possession silently changed hands above the cutoff
            return EXCLUDED, OTHER_PLAY_BEFORE_CUTOFF, None
    if events[last_in_period].clock_s == 0:
        return NON_ATTEMPT, None, last_in_period
    return None, None, None


def _period_end_index(events, start, period):
    """Index of the last event of *period* at or after *start* (None if the
    stream stops before a PeriodEnd and before any later period)."""
    last = None
    for i in range(start, len(events)):
        if events[i].period != period:
            return last
        last = i
        if events[i].kind == "PeriodEnd":
            return i
    # stream exhausted: accept the tail only if it reaches the final buzzer
    if last is not None and events[last].clock_s == 0:
        return last
    return None


def label_game(events: list[CanonEvent], definition: TfoDefinition = TfoDefinition(),
               season: str | None = None) -> list[TfoObservation]:
    """Detect, classify, and score every opportunity of one game.

    Opportunities in periods 1-3 only; a team's repeat opportunity within a
    period is kept but Excluded(RepeatOpportunity).  Opportunities that cannot
    resolve because the stream ends mid-period are dropped with a warning.
    """
    if not events:
        return []
    game_id = events[0].game_id
    season = season or season_from_game_id(game_id)
    seen: set[tuple[int, str]] = set()
    observations = []
    for idx, ev in enumerate(events):
        if ev.period > 3:
            continue
        trig = gain_trigger(ev)
        if trig is None:
            continue
        team, reason = trig
        if not (definition.window_lower_s <= ev.clock_s <= definition.window_upper_s):
            continue
        obs = TfoObservation(
            game_id=game_id, season=season, period=ev.period, team=team,
            gain_clock_s=ev.clock_s, gain_reason=reason, classification=EXCLUDED,
            score_margin_at_gain=ev.margin(team), gain_index=idx)
        if (ev.period, team) in seen:
            obs.exclusion_reason = REPEAT_OPPORTUNITY
            observations.append(obs)
            continue
        seen.add((ev.period, team))
        classification, why, end_idx = classify_opportunity(team, events, idx, definition)
        if classification is None or (classification != EXCLUDED and end_idx is None):
            warnings.warn(
                f"{game_id} P{ev.period} {ev.clock_s}s: stream ends before the "
                f"opportunity for {team} resolves; observation dropped",
                UnresolvedOpportunityWarning)
            seen.discard((ev.period, team))
            continue
        obs.classification = classification
        obs.exclusion_reason = why
        if classification in (ATTEMPT, NON_ATTEMPT):
            obs.pod = compute_pod(obs, events, end_idx).value
        observations.append(obs)
    return observations


def compute_pod(obs: TfoObservation, events: list[CanonEvent], end_index: int) -> Pod:
    """Margin change for the observing team between the gain and period end."""
    gain = events[obs.gain_index]
    end = events[end_index]
    team = obs.team
    value = end.margin(team) - gain.margin(team)
    if team == HOME:
        team_pts = end.score_home - gain.score_home
        opp_pts = end.score_visitor - gain.score_visitor
    else:
        team_pts = end.score_visitor - gain.score_visitor
        opp_pts = end.score_home - gain.score_home
    return Pod(value=value, team_points=team_pts, opponent_points=opp_pts)


def label_games(events_by_game: dict[str, list[CanonEvent]],
                definition: TfoDefinition = TfoDefinition(),
                season: str | None = None) -> list[TfoObservation]:
    out = []
    for game_events in events_by_game.values():
        out.extend(label_game(game_events, definition, season))
    return out


def observations_to_csv(observations: list[TfoObservation], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(OBSERVATIONS_COLUMNS)
        for o in observations:
            writer.writerow([o.game_id, o.season, o.period, o.team, o.gain_clock_s,
                             o.gain_reason, o.classification, o.exclusion_reason or "",
                             "" if o.w is None else o.w,
                             "" if o.pod is None else o.pod])


def read_observations_csv(path) -> list[TfoObservation]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != OBSERVATIONS_COLUMNS:
            raise DataError(f"observations.csv must have header {OBSERVATIONS_COLUMNS}, "
                            f"got {reader.fieldnames}")
        for rec in reader:
            out.append(TfoObservation(
                game_id=rec["game_id"], season=rec["season"], period=int(rec["period"]),
                team=rec["team"], gain_clock_s=int(rec["gain_clock_s"]),
                gain_reason=rec["gain_reason"], classification=rec["classification"],
                exclusion_reason=rec["exclusion_reason"] or None,
                pod=int(rec["pod"]) if rec["pod"] != "" else None))
    return out


def count_summary(observations: list[TfoObservation]) -> dict:
    """Opportunity / attempt / non-attempt / excluded counts per season and pooled."""
    seasons = sorted({o.season for o in observations})
    out = {}
    for key in seasons + ["pooled"]:
        subset = [o for o in observations if key == "pooled" or o.season == key]
        out[key] = {
            "opportunities": len(subset),
            "attempts": sum(1 for o in subset if o.classification == ATTEMPT),
            "non_attempts": sum(1 for o in subset if o.classification == NON_ATTEMPT),
            "excluded": sum(1 for o in subset if o.classification == EXCLUDED),
        }
    return out
