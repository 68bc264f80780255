"""Command-line pipeline driver.

Subcommands: ingest, label, dataset, estimate, diagnose, forest, calibration,
rate, sensitivity, sweep, simulate, report.  Every subcommand reads and
writes the documented CSV/JSON artifacts; `report` renders SVGs from those
artifacts without recomputing anything.  Exit codes: 0 success, 1 usage
error, 2 data error, 3 numerical error.  The TFO_THREADS environment
variable caps forest threading.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import ate as ate_mod
from . import dataset as dataset_mod
from . import forest as forest_mod
from . import label as label_mod
from . import pbp as pbp_mod
from . import plots, rate as rate_mod, sensitivity as sens_mod, synth
from .errors import DataError, NumericalError

DEFAULT_CONFIG = {
    "seed": 0,
    "clip_eps": 0.01,
    "spline_df": 4,
    "cutoffs": {"upper": 43, "lower": 35, "attempt": 28},
    "forest": {"n_trees": 2000, "subsample_fraction": 0.5, "honesty_fraction": 0.5,
               "min_node_size": 5, "mtry": None},
    "bootstrap": {"rate": 200, "lambda": 1000},
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _UsageError(message)


def _deep_update(base: dict, extra: dict) -> dict:
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], val)
        else:
            base[key] = val
    return base


def load_config(args) -> dict:
    """defaults < --config file < explicit flags."""
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            _deep_update(cfg, json.load(fh))
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "clip_eps", None) is not None:
        cfg["clip_eps"] = args.clip_eps
    if getattr(args, "trees", None) is not None:
        cfg["forest"]["n_trees"] = args.trees
    if getattr(args, "bootstrap", None) is not None:
        cfg["bootstrap"]["rate"] = args.bootstrap
        cfg["bootstrap"]["lambda"] = args.bootstrap
    if getattr(args, "cutoffs", None) is not None:
        parts = [int(v) for v in args.cutoffs.split(",")]
        if len(parts) != 3:
            raise DataError("--cutoffs wants three integers U,L,A")
        cfg["cutoffs"] = {"upper": parts[0], "lower": parts[1], "attempt": parts[2]}
    return cfg


def _definition(cfg) -> label_mod.TfoDefinition:
    c = cfg["cutoffs"]
    return label_mod.TfoDefinition(c["upper"], c["lower"], c["attempt"])


def _pipeline_config(cfg) -> ate_mod.PipelineConfig:
    return ate_mod.PipelineConfig(clip_eps=cfg["clip_eps"], spline_df=cfg["spline_df"])


def _forest_config(cfg) -> forest_mod.ForestConfig:
    f = cfg["forest"]
    return forest_mod.ForestConfig(
        n_trees=f["n_trees"], subsample_fraction=f["subsample_fraction"],
        honesty_fraction=f["honesty_fraction"], min_node_size=f["min_node_size"],
        mtry=f["mtry"], seed=cfg["seed"], clip_eps=cfg["clip_eps"],
        n_jobs=forest_mod.default_n_jobs())


def _out_dir(args) -> Path:
    path = Path(getattr(args, "out_dir", ".") or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _read_events(args):
    rows = pbp_mod.read_pbp_csv(args.pbp)
    return pbp_mod.canonicalize(rows)


def _stratum_frame(frame, stratum):
    if stratum == "pooled":
        return frame.reset_index(drop=True)
    sub = frame[frame["season"] == stratum].reset_index(drop=True)
    if len(sub) == 0:
        raise DataError(f"no rows for stratum {stratum!r}")
    return sub


def _load_raw(args):
    """Events, per-game lineups, ratings, and odds from the raw input files."""
    events_by_game = _read_events(args)
    starters = pbp_mod.read_starters_csv(args.starters)
    lineups_by_game = {gid: pbp_mod.replay_lineups(events, starters)[0]
                       for gid, events in events_by_game.items()}
    ratings = dataset_mod.RatingsTable.from_csv(args.ratings, args.aliases)
    odds = dataset_mod.read_odds_csv(args.odds)
    return events_by_game, lineups_by_game, ratings, odds


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    events_by_game = _read_events(args)
    out = _out_dir(args) / (args.out or "events.jsonl")
    flat = [ev for events in events_by_game.values() for ev in events]
    pbp_mod.events_to_jsonl(flat, out)
    print(f"wrote {len(flat)} events from {len(events_by_game)} games to {out}")
    return 0


def cmd_label(args) -> int:
    cfg = load_config(args)
    defn = _definition(cfg)
    events_by_game = _read_events(args)
    if args.starters:  # optional: replaying surfaces lineup problems early
        starters = pbp_mod.read_starters_csv(args.starters)
        for events in events_by_game.values():
            pbp_mod.replay_lineups(events, starters)
    observations = label_mod.label_games(events_by_game, defn, args.season)
    out = _out_dir(args) / (args.out or "observations.csv")
    label_mod.observations_to_csv(observations, out)
    summary = label_mod.count_summary(observations)
    for season, counts in summary.items():
        print(f"{season}: {counts['opportunities']} opportunities, "
              f"{counts['attempts']} attempts, {counts['non_attempts']} non-attempts, "
              f"{counts['excluded']} excluded")
    print(f"wrote {out}")
    return 0


def cmd_dataset(args) -> int:
    cfg = load_config(args)
    defn = _definition(cfg)
    events_by_game, lineups_by_game, ratings, odds = _load_raw(args)
    bundles = {
        gid: dataset_mod.GameBundle(events, lineups_by_game[gid],
                                    label_mod.label_game(events, defn, args.season))
        for gid, events in events_by_game.items()}
    matrix, report = dataset_mod.assemble(bundles, ratings, odds)
    out = _out_dir(args) / (args.out or "analysis.csv")
    dataset_mod.write_analysis_csv(matrix, out)
    summary = dataset_mod.summarize(matrix)
    for season, counts in summary["counts"].items():
        print(f"{season}: {counts['attempts']} attempts, "
              f"{counts['non_attempts']} non-attempts")
    print(f"dropped {report.total} rows "
          f"(rating {report.missing_rating}, odds {report.missing_odds}, "
          f"lineup {report.missing_lineup})")
    print(f"wrote {out}")
    return 0


def cmd_estimate(args) -> int:
    cfg = load_config(args)
    frame = dataset_mod.read_analysis_csv(args.analysis)
    pipe = _pipeline_config(cfg)
    pipe.method = args.method
    pipe.hajek = args.hajek
    data = _stratum_frame(frame, args.stratum)
    result = ate_mod.estimate_stratum(data, pipe, args.stratum)
    out = _out_dir(args) / (args.out or "ate.json")
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2)
    print(f"{args.stratum}: {result.method} estimate {result.estimate:.4f} "
          f"(se {result.se:.4f}, 95% CI {result.ci95[0]:.4f}..{result.ci95[1]:.4f}, "
          f"p {result.p_value:.4g})")
    print(f"wrote {out}")
    return 0


def cmd_diagnose(args) -> int:
    cfg = load_config(args)
    frame = dataset_mod.read_analysis_csv(args.analysis)
    data = _stratum_frame(frame, args.stratum)
    pipe = _pipeline_config(cfg)
    _, e_hat = ate_mod.fit_propensity(data, pipe, args.stratum == "pooled")
    weights = ate_mod.ate_weights(data["w"].to_numpy(), e_hat)
    balance = ate_mod.balance_report(data, weights)
    overlap = ate_mod.overlap_report(e_hat, data["w"].to_numpy())
    out_dir = _out_dir(args)
    balance.table.to_csv(out_dir / "balance.csv", index=False)
    overlap.to_frame().to_csv(out_dir / "overlap.csv", index=False)
    worst = balance.worst()
    print(f"worst weighted SMD {worst:.4f} (threshold {balance.threshold})")
    print(f"wrote {out_dir / 'balance.csv'} and {out_dir / 'overlap.csv'}")
    return 0


def _fit_filtered_forest(data, fcfg):
    """The heterogeneity flow: fit, rank variables, keep 95%, refit."""
    first = forest_mod.fit_causal_forest(data, fcfg)
    importance = forest_mod.variable_importance(first)
    kept = forest_mod.filter_variables(importance, keep_mass=0.95)
    refit = forest_mod.fit_causal_forest(data, fcfg, columns=kept)
    return first, importance, kept, refit


def cmd_forest(args) -> int:
    cfg = load_config(args)
    data = _stratum_frame(dataset_mod.read_analysis_csv(args.analysis), "pooled")
    fcfg = _forest_config(cfg)
    first, importance, kept, refit = _fit_filtered_forest(data, fcfg)
    result = forest_mod.forest_ate(refit)
    out_dir = _out_dir(args)
    payload = {
        "config": {"n_trees": fcfg.n_trees, "subsample_fraction": fcfg.subsample_fraction,
                   "honesty_fraction": fcfg.honesty_fraction,
                   "min_node_size": fcfg.min_node_size,
                   "mtry": fcfg.resolve_mtry(len(first.columns)), "seed": fcfg.seed},
        "importance": importance.to_dict(),
        "kept_variables": kept,
        "dropped_variables": [c for c in importance.index if c not in kept],
        "ate": result.to_dict(),
    }
    with open(out_dir / "forest.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
    pd.DataFrame({"row": np.arange(len(data)), "oob_cate": refit.oob_cate}).to_csv(
        out_dir / "cates.csv", index=False)
    print(f"forest ATE {result.estimate:.4f} (se {result.se:.4f}); "
          f"kept {len(kept)}/{len(importance)} variables")
    print(f"wrote {out_dir / 'forest.json'} and {out_dir / 'cates.csv'}")
    return 0


def cmd_calibration(args) -> int:
    cfg = load_config(args)
    data = _stratum_frame(dataset_mod.read_analysis_csv(args.analysis), "pooled")
    fcfg = _forest_config(cfg)
    *_, refit = _fit_filtered_forest(data, fcfg)
    result = forest_mod.test_calibration(refit)
    out = _out_dir(args) / "calibration.json"
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2)
    print(f"mean forest prediction {result.mean_coef:.4f} (p {result.mean_p:.4g}); "
          f"differential {result.diff_coef:.4f} (p {result.diff_p:.4g})")
    print(f"wrote {out}")
    return 0


def cmd_rate(args) -> int:
    cfg = load_config(args)
    if args.rule == "cate" and args.train_season is None:
        print("rate: --train-season is required for the cate rule", file=sys.stderr)
        raise _UsageError("missing --train-season")
    frame = dataset_mod.read_analysis_csv(args.analysis)
    evaluation = _stratum_frame(frame, args.eval_season)
    fcfg = _forest_config(cfg)
    if args.rule.startswith("covariate:"):
        column = args.rule.split(":", 1)[1]
        gamma, priority = rate_mod.crossfit_scores(None, evaluation, fcfg,
                                                   priority_column=column)
        rule_name = column
    else:
        train = _stratum_frame(frame, args.train_season)
        gamma, priority = rate_mod.crossfit_scores(train, evaluation, fcfg)
        rule_name = f"cate[{args.train_season}->{args.eval_season}]"
    result = rate_mod.rate(gamma, priority, n_bootstrap=cfg["bootstrap"]["rate"],
                           seed=cfg["seed"], rule=rule_name)
    out_dir = _out_dir(args)
    result.curve.to_frame().to_csv(out_dir / "toc.csv", index=False)
    with open(out_dir / "rate.json", "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2)
    print(f"RATE[{rule_name}] {result.estimate:.4f} (se {result.se:.4f})")
    print(f"wrote {out_dir / 'rate.json'} and {out_dir / 'toc.csv'}")
    return 0


def cmd_sensitivity(args) -> int:
    cfg = load_config(args)
    frame = dataset_mod.read_analysis_csv(args.analysis)
    data = _stratum_frame(frame, args.stratum)
    lambdas = ([float(v) for v in args.lambdas.split(",")]
               if args.lambdas else sens_mod.default_lambdas())
    results = sens_mod.lambda_sweep(
        data, lambdas=lambdas, n_bootstrap=cfg["bootstrap"]["lambda"],
        seed=cfg["seed"], config=_pipeline_config(cfg),
        pooled=args.stratum == "pooled")
    out = _out_dir(args) / "lambda_sweep.csv"
    sens_mod.lambda_sweep_frame(results).to_csv(out, index=False)
    breaking = [r.lam for r in results if not r.significant]
    if breaking:
        print(f"significance lost from lambda {min(breaking):g}")
    else:
        print("significant across the whole lambda grid")
    print(f"wrote {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args)
    events_by_game, lineups_by_game, ratings, odds = _load_raw(args)
    results = sens_mod.cutoff_sweep(
        events_by_game, lineups_by_game, ratings, odds,
        config=_pipeline_config(cfg), min_arm=args.min_arm, season=args.season)
    out = _out_dir(args) / "cutoff_sweep.csv"
    sens_mod.cutoff_sweep_frame(results).to_csv(out, index=False)
    done = [r for r in results if not r.skipped]
    print(f"{len(done)}/{len(results)} definitions estimated; wrote {out}")
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    spec = synth.DgpSpec.from_json(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    data, truth = synth.generate(spec)
    out_dir = _out_dir(args)
    dataset_mod.write_analysis_csv(data, out_dir / "analysis.csv")
    with open(out_dir / "truth.json", "w", encoding="utf-8") as fh:
        json.dump({"ate": truth["ate"], "cate": truth["cate"].tolist()}, fh)
    print(f"simulated n={len(data)} (true ATE {truth['ate']:.4f}); "
          f"wrote {out_dir / 'analysis.csv'} and {out_dir / 'truth.json'}")
    return 0


def cmd_report(args) -> int:
    in_dir = Path(args.in_dir)
    out_dir = _out_dir(args)
    written = []
    point = None
    if (in_dir / "ate.json").exists():
        with open(in_dir / "ate.json", encoding="utf-8") as fh:
            point = json.load(fh).get("estimate")
    renders = [
        ("balance.csv", "love.svg", lambda f: plots.love_plot(pd.read_csv(f))),
        ("overlap.csv", "overlap.svg", lambda f: plots.overlap_plot(pd.read_csv(f))),
        ("toc.csv", "toc.svg", lambda f: plots.toc_plot(pd.read_csv(f))),
        ("lambda_sweep.csv", "lambda.svg",
         lambda f: plots.lambda_plot(pd.read_csv(f), point_estimate=point)),
        ("cutoff_sweep.csv", "cutoff_sweep.svg", lambda f: plots.cutoff_plot(pd.read_csv(f))),
    ]
    for src, dst, render in renders:
        path = in_dir / src
        if path.exists():
            (out_dir / dst).write_text(render(path), encoding="utf-8")
            written.append(dst)
    if not written:
        raise DataError(f"no renderable artifacts found in {in_dir}")
    print(f"wrote {', '.join(written)} to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="tfo", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("--out-dir", default=".", help="directory for outputs")
    common.add_argument("--clip-eps", type=float, default=None,
                        help="propensity clipping bound (default 0.01)")
    common.add_argument("--cutoffs", default=None, metavar="U,L,A",
                        help="window upper, window lower, attempt cutoff seconds")
    common.add_argument("--trees", type=int, default=None, help="forest size")
    common.add_argument("--bootstrap", type=int, default=None,
                        help="bootstrap replicate count")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "parse pbp.csv into events.jsonl")
    p.add_argument("--pbp", required=True)
    p.add_argument("--out", default=None)

    p = add("label", cmd_label, "detect and classify two-for-one opportunities")
    p.add_argument("--pbp", required=True)
    p.add_argument("--starters", default=None)
    p.add_argument("--season", default=None)
    p.add_argument("--out", default=None)

    p = add("dataset", cmd_dataset, "assemble the analysis matrix")
    for flag in ("--pbp", "--starters", "--ratings", "--odds"):
        p.add_argument(flag, required=True)
    p.add_argument("--aliases", default=None)
    p.add_argument("--season", default=None)
    p.add_argument("--out", default=None)

    p = add("estimate", cmd_estimate, "ATE on the analysis matrix")
    p.add_argument("--analysis", required=True)
    p.add_argument("--stratum", default="pooled")
    p.add_argument("--method", choices=("aipw", "ipw"), default="aipw")
    p.add_argument("--hajek", action="store_true")
    p.add_argument("--out", default=None)

    p = add("diagnose", cmd_diagnose, "balance and overlap diagnostics")
    p.add_argument("--analysis", required=True)
    p.add_argument("--stratum", default="pooled")

    p = add("forest", cmd_forest, "causal forest, importance, forest ATE")
    p.add_argument("--analysis", required=True)

    p = add("calibration", cmd_calibration, "forest calibration test")
    p.add_argument("--analysis", required=True)

    p = add("rate", cmd_rate, "rank-weighted average treatment effect")
    p.add_argument("--analysis", required=True)
    p.add_argument("--train-season", default=None)
    p.add_argument("--eval-season", required=True)
    p.add_argument("--rule", default="cate",
                   help="'cate' or 'covariate:<column>'")

    p = add("sensitivity", cmd_sensitivity, "unmeasured-confounding lambda sweep")
    p.add_argument("--analysis", required=True)
    p.add_argument("--stratum", default="pooled")
    p.add_argument("--lambdas", default=None, help="comma-separated bounds")

    p = add("sweep", cmd_sweep, "treatment-definition cutoff sweep")
    for flag in ("--pbp", "--starters", "--ratings", "--odds"):
        p.add_argument(flag, required=True)
    p.add_argument("--aliases", default=None)
    p.add_argument("--season", default=None)
    p.add_argument("--min-arm", type=int, default=50)

    p = add("simulate", cmd_simulate, "generate synthetic data with truth")
    p.add_argument("--spec", required=True)

    p = add("report", cmd_report, "render SVG plots from artifacts")
    p.add_argument("--in-dir", default=".")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 1
    try:
        return args.func(args)
    except _UsageError:
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
