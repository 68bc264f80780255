import numpy as np
import pandas as pd
import pytest

from tfo import label, pbp, synth
from tfo.dataset import (GameBundle, RatingsTable, assemble,
                         read_analysis_csv, summarize, write_analysis_csv)
from tfo.errors import DataError

SEASON = "2018-19"

STARTERS = {
    ("0021800002", "home", 1): ["Curry", "Durant", "Green", "Looney", "McKinnie"],
    ("0021800002", "home", 2): ["Curry", "Durant", "Thompson", "Jerebko", "Jones"],
    ("0021800002", "visitor", 1): ["Booker", "Warren", "Bridges", "Ayton", "Anderson"],
    ("0021800002", "visitor", 2): ["Booker", "Warren", "Holmes", "Ayton", "Anderson"],
    ("0021800003", "home", 1): ["H1", "H2", "H3", "H4", "H5"],
    ("0021800003", "visitor", 1): ["V1", "V2", "V3", "V4", "Mystery Man"],
    ("0021800004", "home", 1): ["H1", "H2", "H3", "H4", "H5"],
    ("0021800004", "visitor", 1): ["V1", "V2", "V3", "V4", "V5"],
}

RATINGS = pd.DataFrame(
    [(SEASON, p, r) for p, r in [
        ("Stephen Curry", 95), ("Kevin Durant", 96), ("Draymond Green", 85),
        ("Kevon Looney", 72), ("Alfonzo McKinnie", 65), ("Klay Thompson", 89),
        ("Jonas Jerebko", 74), ("Damian Jones", 68), ("Quinn Cook", 73),
        ("Devin Booker", 87), ("TJ Warren", 78), ("Mikal Bridges", 76),
        ("Deandre Ayton", 80), ("Ryan Anderson", 70), ("Richaun Holmes", 71),
        ("H1", 80), ("H2", 81), ("H3", 82), ("H4", 83), ("H5", 84),
        ("V1", 70), ("V2", 71), ("V3", 72), ("V4", 73), ("V5", 74),
    ]],
    columns=["season", "player", "rating"])

ODDS = pd.DataFrame({
    "game_id": ["0021800002", "0021800003"],
    "home_spread": [-7.5, 3.0],
    "total": [225.5, 210.0],
})


def simple_game(game_id):
    return {
        "game_id": game_id,
        "periods": {1: [
            {"clock": "1:00", "team": "home", "desc": "H1 Driving Layup (2 PTS)",
             "score": (10, 8)},
            {"clock": "0:40", "team": "visitor", "desc": "V1 Lost Ball Turnover (P1.T1)"},
            {"clock": "0:35", "team": "home", "desc": "H2 3' Driving Dunk (2 PTS)",
             "score": (12, 8)},
        ]},
    }


def build_bundles():
    bundles = {}
    scenarios = [synth.worked_example_scenario(),
                 simple_game("0021800003"), simple_game("0021800004")]
    for scn in scenarios:
        events = pbp.canonicalize_game(pbp.rows_from_frame(synth.script_pbp(scn)))
        lineups, _ = pbp.replay_lineups(events, STARTERS)
        observations = label.label_game(events)
        bundles[scn["game_id"]] = GameBundle(events, lineups, observations)
    return bundles


@pytest.fixture(scope="module")
def assembled():
    ratings = RatingsTable(RATINGS)
    return assemble(build_bundles(), ratings, ODDS)


EXPECTED_ROWS = [
    # hand-built from the worked example: Q1 visitor non-attempt then Q2 home attempt
    {"w": 0, "y": -3, "period_2": 0, "period_3": 0, "time_left": 42,
     "score_margin": -6, "max_rating": 87.0, "max_rating_opp": 96.0,
     "mean_rating": 78.2, "mean_rating_opp": 82.6, "spread": -7.5,
     "total_score": 225.5, "season": SEASON, "rating_max_diff": -9.0,
     "rating_mean_diff": -4.4, "abs_score_margin": 6},
    {"w": 1, "y": 5, "period_2": 1, "period_3": 0, "time_left": 37,
     "score_margin": 18, "max_rating": 96.0, "max_rating_opp": 87.0,
     "mean_rating": 84.4, "mean_rating_opp": 77.2, "spread": 7.5,
     "total_score": 225.5, "season": SEASON, "rating_max_diff": 9.0,
     "rating_mean_diff": 7.2, "abs_score_margin": 18},
]


class TestAssemble:
    def test_hand_built_fixture_rows(self, assembled):
        matrix, _ = assembled
        expected = pd.DataFrame(EXPECTED_ROWS, columns=synth.ANALYSIS_COLUMNS)
        got = matrix.reset_index(drop=True)
        pd.testing.assert_frame_equal(
            got.astype(expected.dtypes.to_dict()), expected, check_dtype=False,
            atol=1e-9)

    def test_drop_reasons_counted(self, assembled):
        # each simple game yields two observations (the resolving shot at 0:35
        # opens the counter-opportunity); both drop for the same cause
        _, report = assembled
        assert report.missing_rating == 2   # Mystery Man in 0021800003
        assert report.missing_odds == 2     # no odds for 0021800004
        assert report.missing_lineup == 0

    def test_join_lossless_modulo_drops(self, assembled):
        matrix, report = assembled
        bundles = build_bundles()
        eligible = sum(1 for b in bundles.values() for o in b.observations
                       if o.classification != label.EXCLUDED)
        assert eligible == len(matrix) + report.total

    def test_spread_flips_with_perspective(self, assembled):
        matrix, _ = assembled
        # same game, opposite sides: spreads negate, total unchanged
        assert matrix.iloc[0]["spread"] == -matrix.iloc[1]["spread"]
        assert matrix.iloc[0]["total_score"] == matrix.iloc[1]["total_score"]

    def test_rating_arithmetic_example(self):
        values = [85, 80, 78, 76, 75]
        assert max(values) == 85
        assert np.isclose(np.mean(values), 78.8)

    def test_raw_layout_mirror_leaves_rows_unchanged(self):
        # swapping the home/visitor columns of the raw data re-encodes the
        # same physical game, so the assembled rows must be identical
        scn = simple_game("0021800005")
        mirrored = {"game_id": "0021800006", "periods": {1: [
            dict(play, team=("visitor" if play["team"] == "home" else "home"),
                 score=None if play.get("score") is None else play["score"][::-1])
            for play in scn["periods"][1]]}}
        starters = {
            ("0021800005", "home", 1): ["H1", "H2", "H3", "H4", "H5"],
            ("0021800005", "visitor", 1): ["V1", "V2", "V3", "V4", "V5"],
            ("0021800006", "home", 1): ["V1", "V2", "V3", "V4", "V5"],
            ("0021800006", "visitor", 1): ["H1", "H2", "H3", "H4", "H5"],
        }
        ratings = RatingsTable(RATINGS)
        odds = pd.DataFrame({"game_id": ["0021800005", "0021800006"],
                             "home_spread": [-4.0, 4.0], "total": [215.0, 215.0]})
        bundles = {}
        for scenario in (scn, mirrored):
            events = pbp.canonicalize_game(
                pbp.rows_from_frame(synth.script_pbp(scenario)))
            lineups, _ = pbp.replay_lineups(events, starters)
            bundles[scenario["game_id"]] = GameBundle(
                events, lineups, label.label_game(events))
        matrix, report = assemble(bundles, ratings, odds)
        assert report.total == 0
        a = matrix.iloc[: len(matrix) // 2].reset_index(drop=True)
        b = matrix.iloc[len(matrix) // 2:].reset_index(drop=True)
        pd.testing.assert_frame_equal(a, b, check_dtype=False)

    def test_perspective_flip_negates_signed_covariates(self):
        # the same gain event attributed to the opposite team negates margin,
        # spread, and rating differences and keeps the projected total
        scn = simple_game("0021800007")
        events = pbp.canonicalize_game(pbp.rows_from_frame(synth.script_pbp(scn)))
        starters = {("0021800007", "home", 1): ["H1", "H2", "H3", "H4", "H5"],
                    ("0021800007", "visitor", 1): ["V1", "V2", "V3", "V4", "V5"]}
        lineups, _ = pbp.replay_lineups(events, starters)
        gain_index = next(i for i, ev in enumerate(events) if ev.kind == "Turnover")
        gain = events[gain_index]
        observations = [
            label.TfoObservation("0021800007", SEASON, 1, team, gain.clock_s,
                                 "OpponentTurnover", label.ATTEMPT,
                                 score_margin_at_gain=gain.margin(team), pod=0,
                                 gain_index=gain_index)
            for team in ("home", "visitor")]
        odds = pd.DataFrame({"game_id": ["0021800007"], "home_spread": [-4.0],
                             "total": [215.0]})
        matrix, report = assemble(
            {"0021800007": GameBundle(events, lineups, observations)},
            RatingsTable(RATINGS), odds)
        assert report.total == 0 and len(matrix) == 2
        a, b = matrix.iloc[0], matrix.iloc[1]
        for col in ("score_margin", "spread", "rating_max_diff", "rating_mean_diff"):
            assert a[col] == -b[col], col
        assert a["total_score"] == b["total_score"]

    def test_identical_lineups_zero_diff(self):
        ratings = RatingsTable(pd.DataFrame(
            [(SEASON, f"P{i}", 80 + i) for i in range(5)],
            columns=["season", "player", "rating"]))
        squad = tuple(f"P{i}" for i in range(5))
        events = pbp.canonicalize_game(pbp.rows_from_frame(
            synth.script_pbp(simple_game("0021800009"))))
        lineups = [{"home": squad, "visitor": squad} for _ in events]
        obs = label.label_game(events)
        odds = pd.DataFrame({"game_id": ["0021800009"], "home_spread": [0.0],
                             "total": [200.0]})
        matrix, report = assemble({"0021800009": GameBundle(events, lineups, obs)},
                                  ratings, odds)
        assert report.total == 0
        assert (matrix["rating_max_diff"] == 0).all()
        assert (matrix["rating_mean_diff"] == 0).all()


class TestRatingsTable:
    def test_normalization_and_surname_fallback(self):
        ratings = RatingsTable(RATINGS)
        assert ratings.lookup(SEASON, "stephen curry") == 95
        assert ratings.lookup(SEASON, "Curry") == 95          # surname fallback
        assert ratings.lookup(SEASON, "S. Curry") == 95       # initial fallback
        assert ratings.lookup(SEASON, "Nowitzki") is None
        assert ratings.lookup("1999-00", "Stephen Curry") is None

    def test_alias_resolution(self):
        ratings = RatingsTable(RATINGS, aliases={"Steph": "Stephen Curry"})
        assert ratings.lookup(SEASON, "Steph") == 95

    def test_duplicate_rating_rejected(self):
        dup = pd.DataFrame([(SEASON, "A B", 1), (SEASON, "a. b", 2)],
                           columns=["season", "player", "rating"])
        with pytest.raises(DataError):
            RatingsTable(dup)


class TestSummarize:
    def test_counts(self, assembled):
        matrix, _ = assembled
        summary = summarize(matrix)
        assert summary["counts"]["pooled"] == {"attempts": 1, "non_attempts": 1, "rows": 2}
        assert summary["counts"][SEASON]["rows"] == 2

    def test_empty(self):
        assert summarize(pd.DataFrame(columns=synth.ANALYSIS_COLUMNS))["counts"] == {}

    def test_csv_round_trip(self, tmp_path, assembled):
        matrix, _ = assembled
        path = tmp_path / "analysis.csv"
        write_analysis_csv(matrix, path)
        back = read_analysis_csv(path)
        pd.testing.assert_frame_equal(back, matrix.reset_index(drop=True),
                                      check_dtype=False)
