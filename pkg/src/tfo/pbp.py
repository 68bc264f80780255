"""Play-by-play ingestion: raw CSV rows -> canonical events -> on-court lineups.

Input files
-----------
``pbp.csv``       columns: game_id, period, clock, home_desc, visitor_desc,
                  home_score, visitor_score (UTF-8, header required).
``starters.csv``  columns: game_id, team, period, player1..player5.

Canonical events serialize to ``events.jsonl``, one JSON object per event.
"""

import csv
import json
import re
import warnings
from dataclasses import dataclass, field, asdict

from .errors import DataError, MalformedClock, LineupInconsistencyWarning
from .names import match_name

HOME = "home"
VISITOR = "visitor"

KINDS = (
    "ShotMade",
    "ShotMissed",
    "FreeThrowMade",
    "FreeThrowMissed",
    "ReboundOffensive",
    "ReboundDefensive",
    "Turnover",
    "FoulCommitted",
    "Substitution",
    "JumpBall",
    "Violation",
    "PeriodEnd",
    "Other",
)

PBP_COLUMNS = ["game_id", "period", "clock", "home_desc", "visitor_desc",
               "home_score", "visitor_score"]
STARTERS_COLUMNS = ["game_id", "team", "period",
                    "player1", "player2", "player3", "player4", "player5"]

_CLOCK_RE = re.compile(r"^(\d{1,2}):([0-5]\d)$")

# Verbs that mark a field-goal attempt in NBA descriptions.  Matched
# case-insensitively after the MISS / free-throw rules have had their turn.
SHOT_VERBS = ("jump shot", "layup", "dunk", "hook", "tip", "fadeaway",
              "pullup", "step back", "floater", "3pt")

_SUB_RE = re.compile(r"SUB:\s*(.+?)\s+FOR\s+(.+)", re.IGNORECASE)
_FT_TRIP_RE = re.compile(r"free throw\s+(\d+)\s+of\s+(\d+)", re.IGNORECASE)
_JUMP_TIP_RE = re.compile(r"tip to\s+(.+)", re.IGNORECASE)
_PERIOD_END_RE = re.compile(r"end of .*period", re.IGNORECASE)


def other_team(team: str) -> str:
    return VISITOR if team == HOME else HOME


def parse_clock(clock: str) -> int:
    """Convert 'M:SS' / 'MM:SS' to seconds remaining; raises MalformedClock."""
    m = _CLOCK_RE.match(str(clock).strip())
    if not m:
        raise MalformedClock(f"bad clock value: {clock!r}")
    return 60 * int(m.group(1)) + int(m.group(2))


@dataclass
class RawPbpRow:
    game_id: str
    period: int
    clock: str
    home_desc: str = ""
    visitor_desc: str = ""
    home_score: int | None = None
    visitor_score: int | None = None


@dataclass
class CanonEvent:
    """One canonicalized play-by-play event.

    Scores are carried forward from the last explicit score pair; payload
    fields (sub_in/sub_out, winner, raw_text, ft_final) are populated only
    for the kinds that use them.
    """

    game_id: str
    period: int
    clock_s: int
    team: str
    kind: str
    score_home: int
    score_visitor: int
    sub_in: str | None = None
    sub_out: str | None = None
    winner: str | None = None
    ft_final: bool = False
    raw_text: str | None = None

    def margin(self, team: str) -> int:
        d = self.score_home - self.score_visitor
        return d if team == HOME else -d


def classify_description(text: str, team: str = HOME, last_miss_team: str | None = None):
    """Classify one description into (kind, payload dict).

    *team* is the side whose column carried the text; *last_miss_team* is the
    side of the most recent missed shot/free throw (the context a rebound
    needs).  Rule order is fixed and part of the contract:

    1. leading ``MISS``            -> ShotMissed / FreeThrowMissed
    2. ``Free Throw``              -> FreeThrowMade (ft_final when 'N of N')
    3. ``Jump Ball``               -> JumpBall (winner from 'Tip to ...';
                                      checked before shot verbs because the
                                      tip-to phrasing contains 'Tip')
    4. shot verb                   -> ShotMade
    5. ``Turnover``                -> Turnover
    6. ``Rebound``                 -> ReboundOffensive when *team* also took
                                      the last miss, else ReboundDefensive
    7. ``SUB:``                    -> Substitution(in, out)
    8. ``FOUL`` token              -> FoulCommitted
    9. ``Violation``               -> Violation
    10. ``End of ... Period``      -> PeriodEnd

    Anything else is Other with the raw text retained for audit.
    """
    t = text.strip()
    low = t.casefold()
    if low.startswith("miss "):
        if "free throw" in low:
            return "FreeThrowMissed", {}
        return "ShotMissed", {}
    if "free throw" in low:
        m = _FT_TRIP_RE.search(low)
        final = bool(m and m.group(1) == m.group(2))
        return "FreeThrowMade", {"ft_final": final}
    if "jump ball" in low:
        jm = _JUMP_TIP_RE.search(t)
        return "JumpBall", {"winner": jm.group(1).strip() if jm else None}
    if any(v in low for v in SHOT_VERBS):
        return "ShotMade", {}
    if "turnover" in low:
        return "Turnover", {}
    if "rebound" in low:
        kind = "ReboundOffensive" if last_miss_team == team else "ReboundDefensive"
        return kind, {}
    m = _SUB_RE.search(t)
    if m:
        return "Substitution", {"sub_in": m.group(1).strip(), "sub_out": m.group(2).strip()}
    if "foul" in low:
        return "FoulCommitted", {}
    if "violation" in low:
        return "Violation", {}
    if _PERIOD_END_RE.search(low):
        return "PeriodEnd", {}
    return "Other", {"raw_text": t}


def _to_int(value):
    if value is None:
        return None
    s = str(value).strip()
    if s == "" or s.upper() in ("NA", "NAN", "NONE"):
        return None
    return int(float(s))


def rows_from_frame(frame) -> list[RawPbpRow]:
    """RawPbpRow list from a DataFrame in the pbp.csv column layout."""
    rows = []
    for rec in frame.itertuples(index=False):
        rows.append(RawPbpRow(
            game_id=str(rec.game_id), period=int(rec.period), clock=str(rec.clock),
            home_desc="" if rec.home_desc is None else str(rec.home_desc),
            visitor_desc="" if rec.visitor_desc is None else str(rec.visitor_desc),
            home_score=_to_int(rec.home_score),
            visitor_score=_to_int(rec.visitor_score)))
    return rows


def read_pbp_csv(path) -> list[RawPbpRow]:
    """Read pbp.csv, validating the documented header."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != PBP_COLUMNS:
            raise DataError(f"pbp.csv must have header {PBP_COLUMNS}, got {reader.fieldnames}")
        for i, rec in enumerate(reader):
            try:
                rows.append(RawPbpRow(
                    game_id=rec["game_id"].strip(),
                    period=int(rec["period"]),
                    clock=rec["clock"].strip(),
                    home_desc=(rec["home_desc"] or "").strip(),
                    visitor_desc=(rec["visitor_desc"] or "").strip(),
                    home_score=_to_int(rec["home_score"]),
                    visitor_score=_to_int(rec["visitor_score"]),
                ))
            except (ValueError, KeyError) as exc:
                raise DataError(f"pbp.csv row {i + 2}: {exc}") from exc
    return rows


def canonicalize_game(rows: list[RawPbpRow]) -> list[CanonEvent]:
    """Turn one game's raw rows into ordered canonical events.

    Scores carry forward from the last explicit pair; rows with identical
    clocks stay in file order; a row with both descriptions filled yields a
    home event then a visitor event.
    """
    events = []
    score_h, score_v = 0, 0
    last_miss_team = None
    game_id = rows[0].game_id if rows else ""
    for row in rows:
        if row.game_id != game_id:
            raise DataError("canonicalize_game expects rows from a single game")
        if not row.home_desc and not row.visitor_desc:
            raise DataError(f"{game_id} period {row.period} {row.clock}: both descriptions empty")
        clock_s = parse_clock(row.clock)
        if row.period <= 4 and clock_s > 720:
            raise MalformedClock(
                f"{game_id} period {row.period}: clock {row.clock} exceeds 12 minutes")
        if row.home_score is not None:
            score_h = row.home_score
        if row.visitor_score is not None:
            score_v = row.visitor_score
        for team, desc in ((HOME, row.home_desc), (VISITOR, row.visitor_desc)):
            if not desc:
                continue
            kind, payload = classify_description(desc, team, last_miss_team)
            ev = CanonEvent(
                game_id=game_id, period=row.period, clock_s=clock_s, team=team,
                kind=kind, score_home=score_h, score_visitor=score_v, **payload)
            if kind in ("ShotMissed", "FreeThrowMissed"):
                last_miss_team = team
            events.append(ev)
    return events


def canonicalize(rows: list[RawPbpRow]) -> dict[str, list[CanonEvent]]:
    """Group rows by game (file order preserved) and canonicalize each."""
    by_game: dict[str, list[RawPbpRow]] = {}
    for row in rows:
        by_game.setdefault(row.game_id, []).append(row)
    return {gid: canonicalize_game(grows) for gid, grows in by_game.items()}


def events_to_jsonl(events: list[CanonEvent], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            rec = {k: v for k, v in asdict(ev).items()
                   if v is not None and not (k == "ft_final" and v is False)}
            fh.write(json.dumps(rec) + "\n")


def events_from_jsonl(path) -> list[CanonEvent]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(CanonEvent(**json.loads(line)))
    return events


def read_starters_csv(path) -> dict[tuple[str, str, int], list[str]]:
    """Read starters.csv into {(game_id, team, period): [five players]}."""
    table = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != STARTERS_COLUMNS:
            raise DataError(
                f"starters.csv must have header {STARTERS_COLUMNS}, got {reader.fieldnames}")
        for rec in reader:
            team = rec["team"].strip().lower()
            if team not in (HOME, VISITOR):
                raise DataError(f"starters.csv: team must be home|visitor, got {rec['team']!r}")
            players = [rec[f"player{i}"].strip() for i in range(1, 6)]
            if any(not p for p in players):
                raise DataError(f"starters.csv: {rec['game_id']} {team} period {rec['period']} "
                                "must list exactly 5 players")
            table[(rec["game_id"].strip(), team, int(rec["period"]))] = players
    return table


@dataclass
class LineupInconsistency:
    game_id: str
    period: int
    clock_s: int
    team: str
    player_out: str
    message: str


@dataclass
class LineupState:
    """On-court players per team, replayed from starters + substitutions."""

    on_court: dict = field(default_factory=dict)  # team -> tuple of 5 names

    def snapshot(self):
        return {t: tuple(p) for t, p in self.on_court.items()}


def replay_lineups(events: list[CanonEvent], starters):
    """Attach an on-court snapshot to every event of one game.

    Returns (snapshots, inconsistencies) where snapshots[i] is
    {team: tuple(players)} in effect after event i.  Substituted-out players
    are located by normalized name with surname / surname+initial fallback;
    a missing outgoing player is reported and the incoming player is still
    added (best-effort repair).
    """
    if not events:
        return [], []
    game_id = events[0].game_id
    on_court: dict[str, list[str]] = {HOME: [], VISITOR: []}
    inconsistencies: list[LineupInconsistency] = []
    snapshots = []
    period = None
    for ev in events:
        if ev.period != period:
            period = ev.period
            for team in (HOME, VISITOR):
                fresh = starters.get((game_id, team, period))
                if fresh is not None:
                    on_court[team] = list(fresh)
                # else: carry the previous period's five over
        if ev.kind == "Substitution":
            squad = on_court[ev.team]
            out_match = match_name(ev.sub_out, squad)
            if out_match is not None:
                squad.remove(out_match)
            else:
                inc = LineupInconsistency(
                    game_id, ev.period, ev.clock_s, ev.team, ev.sub_out,
                    f"{game_id} P{ev.period} {ev.clock_s}s: {ev.sub_out!r} not on court for {ev.team}")
                inconsistencies.append(inc)
                warnings.warn(inc.message, LineupInconsistencyWarning)
            if match_name(ev.sub_in, squad) is None:
                squad.append(ev.sub_in)
        snapshots.append({t: tuple(p) for t, p in on_court.items()})
    return snapshots, inconsistencies


def season_from_game_id(game_id: str) -> str:
    """Derive the season label from an NBA-convention game id.

    Ids like '0021800123' encode the season start year in digits 4-5
    ('18' -> '2018-19').  Unrecognized ids map to 'unknown'.
    """
    s = str(game_id)
    if len(s) == 10 and s.isdigit():
        yy = int(s[3:5])
        start = 2000 + yy if yy < 90 else 1900 + yy
        return f"{start}-{str(start + 1)[-2:]}"
    return "unknown"
