"""Aggregate detection output into reportable statistics.

Everything here is a pure function of the detection result plus the
network, so reports are reproducible byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .detect import DetectionResult
from .netgen import FollowingNetwork
from .stats import rank_correlation

MICROS_PER_SECOND = 1_000_000


def inconsistency_rate(result: DetectionResult) -> float:
    """Fraction of analyzed responses with at least one observable conflict."""
    if result.analyzed_count == 0:
        raise ValueError("no responses analyzed")
    return result.conflicting_count / result.analyzed_count


@dataclass
class GapHistogram:
    bucket_width_s: int
    counts: dict[int, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def nonempty_buckets(self) -> list[tuple[int, int]]:
        return sorted(self.counts.items())


def gap_histogram(result: DetectionResult, bucket_width_s: int = 100) -> GapHistogram:
    """Bucket per-response G values into [k*w, (k+1)*w) second ranges."""
    if bucket_width_s <= 0:
        raise ValueError("bucket_width_s must be positive")
    width_us = bucket_width_s * MICROS_PER_SECOND
    counts: dict[int, int] = {}
    for g_us in result.per_response_G.values():
        bucket = g_us // width_us
        counts[bucket] = counts.get(bucket, 0) + 1
    return GapHistogram(bucket_width_s=bucket_width_s, counts=counts)


@dataclass
class GapSummary:
    mean_s: float | None
    count_above_1s: int
    max_s: float | None

    def to_dict(self) -> dict:
        return {"mean_s": self.mean_s, "count_above_1s": self.count_above_1s,
                "max_s": self.max_s}


def summarize_gaps(result: DetectionResult) -> GapSummary:
    gaps = list(result.per_response_G.values())
    if not gaps:
        return GapSummary(mean_s=None, count_above_1s=0, max_s=None)
    return GapSummary(
        mean_s=sum(gaps) / len(gaps) / MICROS_PER_SECOND,
        count_above_1s=sum(1 for g in gaps if g > MICROS_PER_SECOND),
        max_s=max(gaps) / MICROS_PER_SECOND,
    )


def attribute_to_producers(result: DetectionResult,
                           network: FollowingNetwork) -> dict[int, int]:
    """Conflict records per offending producer (producers with none omitted)."""
    counts: dict[int, int] = {}
    for record in result.records:
        if record.producer_id not in network.followers:
            raise ValueError(f"record references unknown producer {record.producer_id}")
        counts[record.producer_id] = counts.get(record.producer_id, 0) + 1
    return dict(sorted(counts.items()))


@dataclass
class CorrelationStudy:
    x_label: str
    y_label: str
    points: list[tuple[float, float]]
    spearman: float | None
    log_log: bool = True
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {"x_label": self.x_label, "y_label": self.y_label,
                "spearman": self.spearman, "log_log": self.log_log,
                "degenerate": self.degenerate, "n_points": len(self.points)}


def _make_study(x_label: str, y_label: str,
                points: list[tuple[float, float]]) -> CorrelationStudy:
    distinct_x = len({x for x, _ in points})
    rho = rank_correlation([x for x, _ in points], [y for _, y in points]) if points else None
    degenerate = distinct_x < 3 or rho is None
    return CorrelationStudy(x_label=x_label, y_label=y_label, points=points,
                            spearman=None if degenerate else rho, degenerate=degenerate)


def conflict_incidents(result: DetectionResult) -> set[tuple[int, int, int]]:
    """Distinct (consumer, producer, t) conflicts.

    A consumer re-observing the same hole across several responses is one
    inconsistency incident, not several.
    """
    return {(r.consumer_id, r.producer_id, r.t) for r in result.records}


def correlation_studies(result: DetectionResult,
                        network: FollowingNetwork) -> list[CorrelationStudy]:
    """The four scatter studies relating conflicts to entity properties.

    Conflicts are counted as distinct incidents, and points cover entities
    that participated in at least one, matching what a log-scale scatter
    of the results can show.
    """
    incidents = conflict_incidents(result)
    caused: dict[int, int] = {}
    encountered: dict[int, int] = {}
    for consumer, producer, _ in incidents:
        caused[producer] = caused.get(producer, 0) + 1
        encountered[consumer] = encountered.get(consumer, 0) + 1

    producer_points_followers = []
    producer_points_tweets = []
    for producer, conflicts in sorted(caused.items()):
        producer_points_followers.append(
            (float(len(network.followers[producer])), float(conflicts)))
        producer_points_tweets.append(
            (float(result.tweet_counts.get(producer, 0)), float(conflicts)))
    consumer_points_followed = []
    consumer_points_queries = []
    for consumer, conflicts in sorted(encountered.items()):
        consumer_points_followed.append(
            (float(len(network.follows[consumer])), float(conflicts)))
        consumer_points_queries.append(
            (float(result.query_counts.get(consumer, 0)), float(conflicts)))

    return [
        _make_study("producer_follower_count", "conflicts_caused", producer_points_followers),
        _make_study("producer_tweet_count", "conflicts_caused", producer_points_tweets),
        _make_study("consumer_followed_count", "conflicts_encountered", consumer_points_followed),
        _make_study("consumer_query_count", "conflicts_encountered", consumer_points_queries),
    ]


@dataclass
class AnalyticsReport:
    rate: float | None
    histogram: GapHistogram
    gaps: GapSummary
    attribution: dict[int, int]
    studies: list[CorrelationStudy]
    analyzed_count: int
    conflicting_count: int
    record_count: int


def build_report(result: DetectionResult, network: FollowingNetwork,
                 bucket_width_s: int = 100) -> AnalyticsReport:
    rate = inconsistency_rate(result) if result.analyzed_count else None
    return AnalyticsReport(
        rate=rate,
        histogram=gap_histogram(result, bucket_width_s),
        gaps=summarize_gaps(result),
        attribution=attribute_to_producers(result, network),
        studies=correlation_studies(result, network),
        analyzed_count=result.analyzed_count,
        conflicting_count=result.conflicting_count,
        record_count=len(result.records),
    )


_STUDY_FILES = {
    "producer_follower_count": "study_producer_followers.csv",
    "producer_tweet_count": "study_producer_tweets.csv",
    "consumer_followed_count": "study_consumer_followed.csv",
    "consumer_query_count": "study_consumer_queries.csv",
}


def emit_report(report: AnalyticsReport, out_dir: str | Path) -> list[Path]:
    """Write totals JSON, histogram CSV, scatter CSVs, and a text summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    totals_path = out / "totals.json"
    with open(totals_path, "w", encoding="utf-8") as fh:
        json.dump({
            "analyzed_responses": report.analyzed_count,
            "conflicting_responses": report.conflicting_count,
            "conflict_records": report.record_count,
            "inconsistency_rate": report.rate,
            "gap_summary": report.gaps.to_dict(),
            "studies": [study.to_dict() for study in report.studies],
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(totals_path)

    histogram_path = out / "gap_histogram.csv"
    with open(histogram_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("bucket_start_s,count\n")
        for bucket, count in report.histogram.nonempty_buckets():
            fh.write(f"{bucket * report.histogram.bucket_width_s},{count}\n")
    written.append(histogram_path)

    for study in report.studies:
        path = out / _STUDY_FILES[study.x_label]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("x,y\n")
            for x, y in study.points:
                fh.write(f"{x:g},{y:g}\n")
        written.append(path)

    summary_path = out / "summary.txt"
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(_render_summary(report))
    written.append(summary_path)
    return written


def _render_summary(report: AnalyticsReport) -> str:
    lines = ["feed-following inconsistency report", ""]
    lines.append(f"analyzed responses:    {report.analyzed_count}")
    lines.append(f"conflicting responses: {report.conflicting_count}")
    lines.append(f"conflict records:      {report.record_count}")
    if report.rate is None:
        lines.append("inconsistency rate:    n/a (nothing analyzed)")
    else:
        lines.append(f"inconsistency rate:    {report.rate:.4%}")
    gaps = report.gaps
    if gaps.mean_s is None:
        lines.append("gap summary:           no observable conflicts")
    else:
        lines.append(f"mean G:                {gaps.mean_s:.3f} s")
        lines.append(f"max G:                 {gaps.max_s:.3f} s")
        lines.append(f"G above 1 s:           {gaps.count_above_1s}")
    lines.append("")
    lines.append("G histogram (bucket start s -> count):")
    for bucket, count in report.histogram.nonempty_buckets():
        lines.append(f"  {bucket * report.histogram.bucket_width_s:>8} {count}")
    lines.append("")
    lines.append("correlation studies (spearman):")
    for study in report.studies:
        value = "degenerate" if study.degenerate else f"{study.spearman:+.3f}"
        lines.append(f"  {study.x_label} vs {study.y_label}: {value}")
    if report.attribution:
        lines.append("")
        lines.append("top offending producers:")
        top = sorted(report.attribution.items(), key=lambda kv: (-kv[1], kv[0]))[:10]
        for producer, count in top:
            lines.append(f"  producer {producer}: {count}")
    return "\n".join(lines) + "\n"
