"""Stress the headline estimate two ways: hypothetical unmeasured
confounding, and perturbations of the treatment definition itself.

The lambda sweep asks how strong a hidden confounder would have to be (in
treatment-odds ratio) before the interval for the effect touches zero.  The
cutoff sweep relabels scripted games under alternative timing definitions
and re-runs the whole estimation pipeline for each.
"""

import numpy as np
import pandas as pd

from tfo import label, pbp, synth
from tfo.ate import PipelineConfig
from tfo.dataset import RatingsTable
from tfo.sensitivity import cutoff_sweep, cutoff_sweep_frame, lambda_sweep

data, _ = synth.generate(synth.confounded_constant_spec(0.6, n=3000, seed=9))
results = lambda_sweep(data, lambdas=[1.0, 1.1, 1.2, 1.3, 1.4, 1.5],
                       n_bootstrap=300, seed=4)
print("unmeasured-confounding sweep (95% intervals for the effect):")
for r in results:
    verdict = "significant" if r.significant else "zero inside"
    print(f"  lambda {r.lam:>4.2f}: [{r.lo:+.3f}, {r.hi:+.3f}]  {verdict}")
breaking = [r.lam for r in results if not r.significant]
if breaking:
    print(f"significance survives hidden confounders up to an odds ratio of "
          f"about {min(breaking):.2f}")

# --- cutoff sweep on a scripted season -------------------------------------
rng = np.random.default_rng(17)
events_by_game, lineups, starters = {}, {}, {}
odds_rows = []
for g in range(120):
    gid = f"demo{g:04d}"
    frame = synth.random_pbp_stream(rng, gid)
    events = pbp.canonicalize_game(pbp.rows_from_frame(frame))
    events_by_game[gid] = events
    for team, five in (("home", ["Alpha", "Bravo", "Carter", "Davis", "Evans"]),
                       ("visitor", ["Foster", "Garcia", "Hayes", "Irving", "Jones"])):
        starters[(gid, team, 1)] = five
    lineups[gid], _ = pbp.replay_lineups(events, starters)
    odds_rows.append([gid, round(float(rng.normal(0, 5)), 1), 212.0])

names = ["Alpha", "Bravo", "Carter", "Davis", "Evans", "Foster", "Garcia",
         "Hayes", "Irving", "Jones", "King", "Lopez", "Moore", "Nash"]
ratings = RatingsTable(pd.DataFrame(
    [("unknown", p, 68 + 2 * i) for i, p in enumerate(names)],
    columns=["season", "player", "rating"]))
odds = pd.DataFrame(odds_rows, columns=["game_id", "home_spread", "total"])

grid = [label.TfoDefinition(u, l, a)
        for a in (27, 28, 29)
        for u, l in ((42, 34), (43, 35), (44, 36))]
sweep = cutoff_sweep(events_by_game, lineups, ratings, odds, grid=grid,
                     config=PipelineConfig(spline_df=2), min_arm=10,
                     season="unknown")
print("\ntreatment-definition sweep (synthetic season, estimates +- CI):")
print(cutoff_sweep_frame(sweep).to_string(index=False))
print("\n(the scripted games carry no real effect, so estimates hover near "
      "zero under every definition)")
