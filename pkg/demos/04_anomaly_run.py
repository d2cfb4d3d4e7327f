"""A lagged desk-scale run: slow serial fan-out makes conflicts observable.

With one update lane per tweet and a 7.5 s mean service time, a popular
producer's fan-out takes minutes; followers querying mid-fan-out see
timelines that other users can already contradict.
"""

from feedsim import (
    RngStreams,
    build_network,
    build_profile,
    build_report,
    detect_all,
    run_experiment,
)
from feedsim.config import anomaly_config

cfg = anomaly_config()
rng = RngStreams(cfg.seed)
network = build_network(cfg.n_producers, cfg.n_consumers, cfg.zipf, rng.stream("netgen.graph"))
profile = build_profile(network, cfg.zipf, cfg.scale, rng.stream("netgen.rates"))

print(f"running {cfg.duration_hours:.0f} virtual hours at desk scale ...")
artifacts = run_experiment(network, profile, cfg.store, cfg.duration_hours, cfg.seed,
                           fanout=cfg.fanout, n_timeline=cfg.n_timeline)
trace = artifacts.trace
print(f"{trace.tweets} tweets, {trace.responses} responses, "
      f"{trace.retries} conditional-write retries")
slowest = max(trace.fanout_completion_us.values())
print(f"slowest fan-out completion: {slowest / 1e6:.0f} s")

result = detect_all(artifacts.responses, artifacts.tweet_log, network,
                    n_timeline=cfg.n_timeline,
                    analysis_window_fraction=cfg.analysis_window_fraction)
report = build_report(result, network)
print(f"\nanalyzed {result.analyzed_count} responses (warm-up half excluded)")
print(f"inconsistency rate: {report.rate:.2%} "
      f"({result.conflicting_count} conflicting responses, {len(result.records)} records)")
print(f"gap summary: mean {report.gaps.mean_s:.0f} s, max {report.gaps.max_s:.0f} s, "
      f"{report.gaps.count_above_1s} above 1 s")

print("\nG histogram (100 s buckets):")
peak = max(count for _, count in report.histogram.nonempty_buckets())
for bucket, count in report.histogram.nonempty_buckets():
    bar = "#" * max(1, round(40 * count / peak))
    print(f"  {bucket * 100:>5}-{bucket * 100 + 99:<5} {count:>5} {bar}")
