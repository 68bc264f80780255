import pytest

from tfo import pbp, synth
from tfo.errors import DataError, LineupInconsistencyWarning, MalformedClock
from tfo.pbp import (CanonEvent, classify_description, parse_clock,
                     replay_lineups, season_from_game_id)


class TestParseClock:
    def test_table_values(self):
        assert parse_clock("0:42") == 42
        assert parse_clock("12:00") == 720
        assert parse_clock("0:00") == 0

    @pytest.mark.parametrize("bad", ["", "42", "1:5", "1:60", "-1:30", "0:42.5", "ab:cd"])
    def test_malformed(self, bad):
        with pytest.raises(MalformedClock):
            parse_clock(bad)


class TestClassify:
    def test_worked_example_rows(self):
        assert classify_description("Durant 3' Driving Dunk (15 PTS)")[0] == "ShotMade"
        assert classify_description("Booker Out of Bounds Lost Ball Turnover (P5.T9)")[0] == "Turnover"
        assert classify_description("MISS Curry 55' 3PT Jump Shot")[0] == "ShotMissed"

    def test_substitution_payload(self):
        kind, payload = classify_description("SUB: Cook FOR Looney")
        assert kind == "Substitution"
        assert payload == {"sub_in": "Cook", "sub_out": "Looney"}

    def test_free_throws(self):
        kind, payload = classify_description("Booker Free Throw 1 of 2")
        assert (kind, payload["ft_final"]) == ("FreeThrowMade", False)
        kind, payload = classify_description("Booker Free Throw 2 of 2")
        assert (kind, payload["ft_final"]) == ("FreeThrowMade", True)
        assert classify_description("MISS Booker Free Throw 1 of 2")[0] == "FreeThrowMissed"

    def test_rebound_direction_uses_last_miss(self):
        assert classify_description("WARRIORS Rebound", "home", "home")[0] == "ReboundOffensive"
        assert classify_description("WARRIORS Rebound", "home", "visitor")[0] == "ReboundDefensive"
        assert classify_description("WARRIORS Rebound", "home", None)[0] == "ReboundDefensive"

    def test_offensive_foul_is_turnover(self):
        # rule order: Turnover fires before FOUL
        assert classify_description("Iguodala Offensive Foul Turnover (P1.T3)")[0] == "Turnover"
        assert classify_description("Green S.FOUL (P2.T4)")[0] == "FoulCommitted"

    def test_jump_ball_violation_period_end(self):
        kind, payload = classify_description("Jump Ball Adams vs. Looney: Tip to Curry")
        assert (kind, payload["winner"]) == ("JumpBall", "Curry")
        assert classify_description("Kicked Ball Violation")[0] == "Violation"
        assert classify_description("End of 1st Period (9:41 PM EST)")[0] == "PeriodEnd"

    def test_unmatched_goes_to_other_with_text(self):
        kind, payload = classify_description("Iguodala STEAL (1 STL)")
        assert kind == "Other"
        assert payload["raw_text"] == "Iguodala STEAL (1 STL)"

    def test_totality_on_generated_stream(self, rng):
        frame = synth.random_pbp_stream(rng, "g1")
        events = pbp.canonicalize_game(pbp.rows_from_frame(frame))
        assert all(ev.kind in pbp.KINDS for ev in events)


class TestCanonicalize:
    def test_score_carry_forward(self, rng):
        frame = synth.random_pbp_stream(rng, "g_scores")
        rows = pbp.rows_from_frame(frame)
        events = pbp.canonicalize_game(rows)
        # one canonical event per non-empty description, in row order
        expected = []
        h, v = 0, 0
        for row in rows:
            h = row.home_score if row.home_score is not None else h
            v = row.visitor_score if row.visitor_score is not None else v
            for desc in (row.home_desc, row.visitor_desc):
                if desc:
                    expected.append((h, v))
        assert [(e.score_home, e.score_visitor) for e in events] == expected

    def test_scores_non_decreasing(self, worked_example_events):
        events = worked_example_events
        for prev, cur in zip(events, events[1:]):
            assert cur.score_home >= prev.score_home
            assert cur.score_visitor >= prev.score_visitor

    def test_clock_non_increasing_within_period(self, worked_example_events):
        by_period = {}
        for ev in worked_example_events:
            by_period.setdefault(ev.period, []).append(ev.clock_s)
        for clocks in by_period.values():
            assert all(a >= b for a, b in zip(clocks, clocks[1:]))

    def test_both_description_columns_emit_events(self):
        rows = [pbp.RawPbpRow("g", 1, "0:03",
                              home_desc="Iguodala STEAL (1 STL)",
                              visitor_desc="Booker Lost Ball Turnover (P3.T4)")]
        events = pbp.canonicalize_game(rows)
        assert [ev.kind for ev in events] == ["Other", "Turnover"]
        assert [ev.team for ev in events] == ["home", "visitor"]

    def test_empty_descriptions_rejected(self):
        with pytest.raises(DataError):
            pbp.canonicalize_game([pbp.RawPbpRow("g", 1, "0:30")])

    def test_regulation_clock_bound(self):
        with pytest.raises(MalformedClock):
            pbp.canonicalize_game([pbp.RawPbpRow("g", 1, "13:00", home_desc="x Jump Shot")])

    def test_jsonl_round_trip(self, tmp_path, worked_example_events):
        path = tmp_path / "events.jsonl"
        pbp.events_to_jsonl(worked_example_events, path)
        back = pbp.events_from_jsonl(path)
        assert back == worked_example_events

    def test_round_trip_random_stream(self, tmp_path, rng):
        frame = synth.random_pbp_stream(rng, "g2")
        events = pbp.canonicalize_game(pbp.rows_from_frame(frame))
        path = tmp_path / "events.jsonl"
        pbp.events_to_jsonl(events, path)
        assert pbp.events_from_jsonl(path) == events


def _sub_event(team, sub_in, sub_out, clock=300, period=1, game="g"):
    return CanonEvent(game, period, clock, team, "Substitution", 0, 0,
                      sub_in=sub_in, sub_out=sub_out)


def _shot_event(team, clock, period=1, game="g"):
    return CanonEvent(game, period, clock, team, "ShotMade", 0, 0)


class TestReplayLineups:
    STARTERS = {("g", "home", 1): ["Stephen Curry", "Klay Thompson", "Kevin Durant",
                                   "Draymond Green", "Kevon Looney"],
                ("g", "visitor", 1): ["Devin Booker", "TJ Warren", "Mikal Bridges",
                                      "Deandre Ayton", "Ryan Anderson"]}

    def test_scripted_timeline_matches_hand_tracking(self):
        events = [
            _shot_event("home", 600),
            _sub_event("home", "Cook", "Looney", clock=400),
            _shot_event("visitor", 350),
            _sub_event("visitor", "Holmes", "Ayton", clock=200),
            _sub_event("visitor", "Okobo", "Booker", clock=200),
            _shot_event("home", 100),
        ]
        snaps, bad = replay_lineups(events, self.STARTERS)
        assert not bad
        # hand-tracked ground truth at every event
        assert set(snaps[0]["home"]) == set(self.STARTERS[("g", "home", 1)])
        assert "Kevon Looney" not in snaps[1]["home"] and "Cook" in snaps[1]["home"]
        assert set(snaps[2]["visitor"]) == set(self.STARTERS[("g", "visitor", 1)])
        assert "Deandre Ayton" not in snaps[3]["visitor"]
        after = set(snaps[4]["visitor"])
        assert {"Holmes", "Okobo"} <= after and "Devin Booker" not in after
        assert len(snaps[5]["home"]) == 5 and len(snaps[5]["visitor"]) == 5

    def test_surname_matching_against_full_starters(self):
        events = [_sub_event("home", "Jones", "Curry")]
        snaps, bad = replay_lineups(events, self.STARTERS)
        assert not bad
        assert "Stephen Curry" not in snaps[0]["home"]

    def test_same_clock_subs_apply_in_row_order(self):
        events = [_sub_event("home", "Cook", "Looney", clock=200),
                  _sub_event("home", "Looney", "Cook", clock=200)]
        snaps, bad = replay_lineups(events, self.STARTERS)
        assert not bad
        assert "Cook" in snaps[0]["home"]
        assert "Cook" not in snaps[1]["home"] and "Looney" in snaps[1]["home"]

    def test_no_subs_keeps_lineup_constant(self):
        events = [_shot_event("home", clock) for clock in (700, 500, 300)]
        snaps, _ = replay_lineups(events, self.STARTERS)
        assert snaps[0] == snaps[1] == snaps[2]

    def test_missing_out_player_flagged_and_forced(self):
        events = [_sub_event("home", "Cook", "Nowitzki")]
        with pytest.warns(LineupInconsistencyWarning):
            snaps, bad = replay_lineups(events, self.STARTERS)
        assert len(bad) == 1 and bad[0].player_out == "Nowitzki"
        assert "Cook" in snaps[0]["home"]

    def test_period_reset_vs_carry_over(self):
        starters = dict(self.STARTERS)
        starters[("g", "home", 2)] = ["A1", "A2", "A3", "A4", "A5"]
        events = [_sub_event("home", "Cook", "Looney", clock=100, period=1),
                  _shot_event("home", 700, period=2),
                  _shot_event("visitor", 650, period=2)]
        snaps, _ = replay_lineups(events, starters)
        assert set(snaps[1]["home"]) == {"A1", "A2", "A3", "A4", "A5"}
        # visitor has no period-2 starters: carries over period 1's five
        assert set(snaps[2]["visitor"]) == set(self.STARTERS[("g", "visitor", 1)])


def test_season_from_game_id():
    assert season_from_game_id("0021800123") == "2018-19"
    assert season_from_game_id("0022100456") == "2021-22"
    assert season_from_game_id("synthetic-7") == "unknown"


def test_read_pbp_csv_header_enforced(tmp_path):
    path = tmp_path / "pbp.csv"
    path.write_text("game_id,period,clock\na,1,0:42\n")
    with pytest.raises(DataError):
        pbp.read_pbp_csv(path)


def test_read_pbp_csv_round_trip(tmp_path, rng):
    frame = synth.random_pbp_stream(rng, "g3")
    path = tmp_path / "pbp.csv"
    frame.to_csv(path, index=False)
    rows = pbp.read_pbp_csv(path)
    assert len(rows) == len(frame)
    assert rows[0].game_id == "g3"
    events_a = pbp.canonicalize_game(rows)
    events_b = pbp.canonicalize_game(pbp.rows_from_frame(frame))
    assert events_a == events_b
