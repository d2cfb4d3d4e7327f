"""Batch pipeline: generate, simulate, detect, report, reproduce.

Stages communicate through files inside the output directory, so each
subcommand can also be run on its own. Outputs are deterministic for a
fixed (config, seed) pair.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import analytics, app, checks, detect, netgen
from .config import ExperimentConfig, anomaly_config, is_zero_delay
from .sim import RngStreams, from_iso

NETWORK_FILE = "network_profile.jsonl"
VALIDATION_FILE = "validation_report.json"
TWEETS_FILE = "tweets.jsonl"
RESPONSES_FILE = "responses.jsonl"
TRACE_FILE = "trace_stats.json"
CONFLICTS_FILE = "conflicts.jsonl"
DETECTION_TOTALS_FILE = "detection_totals.json"
CONFIG_ECHO_FILE = "config_used.json"
REPRO_SUMMARY_FILE = "repro_summary.txt"


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen(cfg: ExperimentConfig) -> int:
    out = _out_dir(cfg)
    rng = RngStreams(cfg.seed)
    try:
        network = netgen.build_network(cfg.n_producers, cfg.n_consumers, cfg.zipf,
                                       rng.stream("netgen.graph"))
        profile = netgen.build_profile(network, cfg.zipf, cfg.scale,
                                       rng.stream("netgen.rates"))
    except (netgen.InfeasibleParametersError, ValueError) as exc:
        print(f"gen: {exc}", file=sys.stderr)
        return 1
    report = netgen.validate_profile(network, profile, cfg.zipf)
    netgen.save_network_profile(out / NETWORK_FILE, network, profile)
    with open(out / VALIDATION_FILE, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    print(f"gen: {network.n_producers} producers, {network.n_consumers} consumers, "
          f"{network.edge_count} edges -> {out / NETWORK_FILE}")
    for check in report.checks:
        print(f"gen: {check.name}: mean {check.realized_mean:.3f} "
              f"(target {check.target_mean:.3f}) {'ok' if check.mean_ok else 'OFF'}")
    if not report.passed:
        print("gen: validation FAILED", file=sys.stderr)
        return 1
    print("gen: validation passed")
    return 0


def cmd_run(cfg: ExperimentConfig) -> int:
    out = _out_dir(cfg)
    network_path = out / NETWORK_FILE
    if not network_path.exists():
        print(f"run: missing {network_path}; run `gen` first", file=sys.stderr)
        return 1
    network, profile = netgen.load_network_profile(network_path)
    artifacts = app.run_experiment(network, profile, cfg.store, cfg.duration_hours,
                                   cfg.seed, fanout=cfg.fanout, n_timeline=cfg.n_timeline)
    app.save_tweet_log(out / TWEETS_FILE, artifacts.tweet_log)
    app.save_response_log(out / RESPONSES_FILE, artifacts.responses)
    with open(out / TRACE_FILE, "w", encoding="utf-8") as fh:
        json.dump(artifacts.trace.to_dict(), fh, indent=2)
        fh.write("\n")
    hours = cfg.duration_hours or 1e-9
    print(f"run: {artifacts.trace.tweets} tweets ({artifacts.trace.tweets / hours:.1f}/h), "
          f"{artifacts.trace.responses} responses ({artifacts.trace.responses / hours:.1f}/h)")
    print(f"run: {artifacts.trace.updates_committed} timeline writes, "
          f"{artifacts.trace.retries} retries, "
          f"{artifacts.trace.events_processed} events processed")
    return 0


def cmd_detect(cfg: ExperimentConfig) -> int:
    out = _out_dir(cfg)
    try:
        network, _ = netgen.load_network_profile(out / NETWORK_FILE)
        tweets = app.load_tweet_log(out / TWEETS_FILE)
        responses = app.load_response_log(out / RESPONSES_FILE)
        result = detect.detect_all(
            responses, tweets, network, n_timeline=cfg.n_timeline,
            analysis_window_fraction=cfg.analysis_window_fraction)
    except FileNotFoundError as exc:
        print(f"detect: missing input: {exc}", file=sys.stderr)
        return 1
    except (detect.IntegrityError, ValueError) as exc:
        print(f"detect: {exc}", file=sys.stderr)
        return 1
    detect.save_conflict_records(out / CONFLICTS_FILE, result)
    detect.save_detection_totals(out / DETECTION_TOTALS_FILE, result)
    print(f"detect: {result.conflicting_count} conflicting of {result.analyzed_count} "
          f"analyzed responses ({len(result.records)} records)")
    return 0


def cmd_report(cfg: ExperimentConfig) -> int:
    out = _out_dir(cfg)
    try:
        network, _ = netgen.load_network_profile(out / NETWORK_FILE)
        result = detect.load_detection(out / CONFLICTS_FILE, out / DETECTION_TOTALS_FILE)
    except FileNotFoundError as exc:
        print(f"report: missing input: {exc}", file=sys.stderr)
        return 1
    except detect.IntegrityError as exc:
        print(f"report: {exc}", file=sys.stderr)
        return 1
    report = analytics.build_report(result, network)
    for path in analytics.emit_report(report, out):
        print(f"report: wrote {path}")
    return 0


def cmd_repro(cfg: ExperimentConfig) -> int:
    """Chain gen -> run -> detect -> report, then evaluate acceptance checks."""
    out = _out_dir(cfg)
    cfg.save(out / CONFIG_ECHO_FILE)
    for stage_name, stage in (("gen", cmd_gen), ("run", cmd_run), ("detect", cmd_detect),
                              ("report", cmd_report)):
        code = stage(cfg)
        if code != 0:
            print(f"repro: stage {stage_name} failed", file=sys.stderr)
            return code

    network, _ = netgen.load_network_profile(out / NETWORK_FILE)
    with open(out / VALIDATION_FILE, encoding="utf-8") as fh:
        validation_dict = json.load(fh)
    validation = netgen.ValidationReport(
        checks=[netgen.DistributionCheck(**c) for c in validation_dict["checks"]],
        degree_rate_spearman=validation_dict["degree_rate_spearman"],
        independence_ok=validation_dict["independence_ok"],
        passed=validation_dict["passed"],
    )
    tweets = app.load_tweet_log(out / TWEETS_FILE)
    responses = app.load_response_log(out / RESPONSES_FILE)
    result = detect.detect_all(responses, tweets, network, n_timeline=cfg.n_timeline,
                               analysis_window_fraction=cfg.analysis_window_fraction)
    with open(out / TRACE_FILE, encoding="utf-8") as fh:
        trace_dict = json.load(fh)
    trace = app.TraceStats(
        duration_us=trace_dict["duration_us"],
        max_propagation_lag_us=trace_dict["max_propagation_lag_us"],
        fanout_completion_us={
            (int(c["producer_id"]), from_iso(c["t"])): c["completion_us"]
            for c in trace_dict["fanout_completions"]
        },
    )
    report = analytics.build_report(result, network)
    outcomes = checks.evaluate_run(result, trace, report, validation,
                                   zero_delay=is_zero_delay(cfg))
    lines = [outcome.line() for outcome in outcomes]
    with open(out / REPRO_SUMMARY_FILE, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    return 0 if all(outcome.passed for outcome in outcomes) else 1


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is not None:
        cfg = ExperimentConfig.load(args.config)
    elif args.command == "repro":
        cfg = anomaly_config()
    else:
        cfg = ExperimentConfig()
    out_override = args.out or os.environ.get("FEEDSIM_OUT")
    return cfg.with_overrides(seed=args.seed,
                              out_dir=str(out_override) if out_override else None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feedsim",
        description="Simulate a relaxed-consistency feed-following service and "
                    "measure observable inconsistency.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("gen", "generate the following network and workload profile"),
        ("run", "run the virtual-time experiment over generated inputs"),
        ("detect", "find observable conflicts in the logged responses"),
        ("report", "aggregate detection output into report files"),
        ("repro", "run the whole pipeline and evaluate acceptance checks"),
    ):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", type=Path, default=None,
                         help="experiment config JSON (defaults per subcommand)")
        cmd.add_argument("--seed", type=int, default=None, help="override config seed")
        cmd.add_argument("--out", type=Path, default=None,
                         help="override output directory (also via FEEDSIM_OUT)")
    return parser


_COMMANDS = {
    "gen": cmd_gen,
    "run": cmd_run,
    "detect": cmd_detect,
    "report": cmd_report,
    "repro": cmd_repro,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"{args.command}: bad config: {exc}", file=sys.stderr)
        return 2
    return _COMMANDS[args.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
