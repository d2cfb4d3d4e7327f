"""Offline observable-inconsistency detection.

Reconstructs, for every served response, the timeline a single totally
ordered system would have returned, diffs it against what was actually
served, and keeps only the missing tweets that some other response can
witness: either the flagged response shows items both newer and older
than the hole, or an earlier-timestamped response already contained the
missing tweet. Staleness alone is never a conflict.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from heapq import nlargest
from itertools import chain
from pathlib import Path
from typing import Iterable, Sequence

from .app import TimelineResponse, TweetEvent
from .netgen import FollowingNetwork
from .sim import from_iso, to_iso


class IntegrityError(ValueError):
    """The logs violate an invariant the simulator guarantees."""


class ConflictType(Enum):
    GAP = "gap"
    NEWER_EARLIER = "newer_earlier"


class Position(Enum):
    """Where a missing tweet sits relative to the served entries."""

    INTERIOR = "interior"
    HEAD = "head"
    TAIL = "tail"


# Tweets are handled as (t, seq, producer_id) triples so lexicographic
# comparison is exactly the global order.
Triple = tuple[int, int, int]


@dataclass(frozen=True)
class ConsistentTimeline:
    consumer_id: int
    T: int
    entries: tuple[Triple, ...]


@dataclass(frozen=True, slots=True)
class ConflictRecord:
    response_id: int
    consumer_id: int
    producer_id: int
    t: int
    type: ConflictType
    witness_response_id: int
    gap_us: int


class TweetIndex:
    """Per-producer view of the global tweet log, validated on build."""

    def __init__(self, tweet_log: Sequence[TweetEvent]):
        self.times_by_producer: dict[int, list[int]] = {}
        self.triples_by_producer: dict[int, list[Triple]] = {}
        self.triple_by_key: dict[tuple[int, int], Triple] = {}
        last: Triple | None = None
        for tweet in tweet_log:
            triple = (tweet.t, tweet.seq, tweet.producer_id)
            if last is not None and triple <= last:
                raise IntegrityError(
                    f"tweet log not strictly ordered at seq {tweet.seq}"
                )
            last = triple
            key = (tweet.producer_id, tweet.t)
            if key in self.triple_by_key:
                raise IntegrityError(f"duplicate tweet identity {key}")
            self.triple_by_key[key] = triple
            self.times_by_producer.setdefault(tweet.producer_id, []).append(tweet.t)
            self.triples_by_producer.setdefault(tweet.producer_id, []).append(triple)

    def triple_for(self, producer_id: int, t: int) -> Triple:
        triple = self.triple_by_key.get((producer_id, t))
        if triple is None:
            raise IntegrityError(
                f"phantom tweet ({producer_id}, {t}) not in the global log"
            )
        return triple


def _coerce_index(tweets: Sequence[TweetEvent] | TweetIndex) -> TweetIndex:
    return tweets if isinstance(tweets, TweetIndex) else TweetIndex(tweets)


def consistent_timeline(consumer_id: int, T: int,
                        tweets: Sequence[TweetEvent] | TweetIndex,
                        network: FollowingNetwork, n_timeline: int) -> ConsistentTimeline:
    """The n_timeline newest tweets with t <= T among followed producers."""
    index = _coerce_index(tweets)
    producers = network.follows.get(consumer_id)
    if producers is None:
        raise ValueError(f"unknown consumer {consumer_id}")
    slices = []
    for pid in producers:
        times = index.times_by_producer.get(pid)
        if not times:
            continue
        hi = bisect_right(times, T)
        if hi:
            slices.append(index.triples_by_producer[pid][max(0, hi - n_timeline):hi])
    entries = nlargest(n_timeline, chain.from_iterable(slices))
    return ConsistentTimeline(consumer_id=consumer_id, T=T, entries=tuple(entries))


def _response_triples(response: TimelineResponse, index: TweetIndex) -> list[Triple]:
    """Validate a response's entries and return them as ordered triples."""
    triples = []
    prev: Triple | None = None
    for pid, t in response.entries:
        triple = index.triple_for(pid, t)
        if t > response.T:
            raise IntegrityError(
                f"response {response.response_id} contains a future tweet ({pid}, {t})"
            )
        if prev is not None and triple >= prev:
            raise IntegrityError(
                f"response {response.response_id} entries not strictly newest-first"
            )
        prev = triple
        triples.append(triple)
    return triples


def find_missing(response: TimelineResponse, oracle: ConsistentTimeline,
                 tweets: Sequence[TweetEvent] | TweetIndex) -> list[tuple[Triple, Position]]:
    """Oracle entries absent from the response, tagged by position.

    A missing tweet is INTERIOR when the response holds both newer and
    older entries, HEAD when nothing served is newer, TAIL when nothing
    served is older.
    """
    index = _coerce_index(tweets)
    served = _response_triples(response, index)
    served_set = set(served)
    newest = served[0] if served else None
    oldest = served[-1] if served else None
    missing = []
    for triple in oracle.entries:
        if triple in served_set:
            continue
        newer_exists = newest is not None and newest > triple
        older_exists = oldest is not None and oldest < triple
        if newer_exists and older_exists:
            position = Position.INTERIOR
        elif not newer_exists:
            position = Position.HEAD
        else:
            position = Position.TAIL
        missing.append((triple, position))
    return missing


@dataclass
class WitnessIndex:
    """For each tweet, every response that contained it, ordered by T."""

    containments: dict[tuple[int, int], list[tuple[int, int]]] = field(default_factory=dict)

    def witnesses(self, producer_id: int, t: int) -> list[tuple[int, int]]:
        return self.containments.get((producer_id, t), [])

    def earliest(self, producer_id: int, t: int) -> tuple[int, int] | None:
        entries = self.containments.get((producer_id, t))
        return entries[0] if entries else None


def build_witness_index(responses: Iterable[TimelineResponse]) -> WitnessIndex:
    index = WitnessIndex()
    containments = index.containments
    for resp in responses:
        for pair in resp.entries:
            containments.setdefault(pair, []).append((resp.T, resp.response_id))
    for entries in containments.values():
        entries.sort()
    return index


def classify(response: TimelineResponse, missing: Triple, position: Position,
             witness_index: WitnessIndex) -> ConflictRecord | None:
    """Decide whether one missing tweet is an observable conflict.

    An interior hole is a conflict as soon as any response contains the
    tweet; a head hole needs a witness timestamped strictly earlier than
    the flagged response. Tail holes are never observable.
    """
    t, _, producer_id = missing
    earliest = witness_index.earliest(producer_id, t)
    if earliest is None:
        return None
    if position is Position.INTERIOR:
        conflict_type = ConflictType.GAP
    elif position is Position.HEAD and earliest[0] < response.T:
        conflict_type = ConflictType.NEWER_EARLIER
    else:
        return None
    gap_us = response.T - t
    if gap_us <= 0:
        raise IntegrityError(
            f"non-positive gap for response {response.response_id}: tweet at {t} vs T={response.T}"
        )
    return ConflictRecord(
        response_id=response.response_id,
        consumer_id=response.consumer_id,
        producer_id=producer_id,
        t=t,
        type=conflict_type,
        witness_response_id=earliest[1],
        gap_us=gap_us,
    )


def inconsistency_time_gap(response: TimelineResponse,
                           observable_missing: Sequence[ConflictRecord]) -> int | None:
    """G = max(T - t) over the response's observable conflicts, microseconds."""
    if not observable_missing:
        return None
    return max(response.T - record.t for record in observable_missing)


@dataclass
class DetectionResult:
    records: list[ConflictRecord]
    per_response_G: dict[int, int]
    analyzed_count: int
    total_count: int
    analyzed_start_id: int
    n_timeline: int
    analysis_window_fraction: float
    tweet_counts: dict[int, int]
    query_counts: dict[int, int]

    @property
    def conflicting_count(self) -> int:
        return len(self.per_response_G)

    def type_counts(self) -> dict[str, int]:
        counts = {kind.value: 0 for kind in ConflictType}
        for record in self.records:
            counts[record.type.value] += 1
        return counts


def detect_all(responses: Sequence[TimelineResponse], tweet_log: Sequence[TweetEvent],
               network: FollowingNetwork, *, n_timeline: int = 20,
               analysis_window_fraction: float = 0.5) -> DetectionResult:
    """Run the full pipeline over the configured analysis window.

    The warm-up prefix is dropped: only the latter analysis_window_fraction
    of responses (by count) is analyzed, and witnesses are drawn from that
    same window.
    """
    if not 0 < analysis_window_fraction <= 1:
        raise ValueError("analysis_window_fraction must be in (0, 1]")
    index = _coerce_index(tweet_log)
    prev_T = None
    seen_ids: set[int] = set()
    for resp in responses:
        if resp.response_id in seen_ids:
            raise IntegrityError(f"duplicate response id {resp.response_id}")
        seen_ids.add(resp.response_id)
        if prev_T is not None and resp.T < prev_T:
            raise IntegrityError("response log not ordered by timestamp")
        prev_T = resp.T

    start = len(responses) - int(round(len(responses) * analysis_window_fraction))
    analyzed = responses[start:]
    witness_index = build_witness_index(analyzed)

    records: list[ConflictRecord] = []
    per_response_G: dict[int, int] = {}
    query_counts: dict[int, int] = {}
    for resp in analyzed:
        query_counts[resp.consumer_id] = query_counts.get(resp.consumer_id, 0) + 1
        oracle = consistent_timeline(resp.consumer_id, resp.T, index, network, n_timeline)
        missing = find_missing(resp, oracle, index)
        if not missing:
            continue
        own_records = []
        for triple, position in missing:
            record = classify(resp, triple, position, witness_index)
            if record is not None:
                own_records.append(record)
        if own_records:
            records.extend(own_records)
            per_response_G[resp.response_id] = inconsistency_time_gap(resp, own_records)

    tweet_counts: dict[int, int] = {}
    for tweet in tweet_log:
        tweet_counts[tweet.producer_id] = tweet_counts.get(tweet.producer_id, 0) + 1

    return DetectionResult(
        records=records,
        per_response_G=per_response_G,
        analyzed_count=len(analyzed),
        total_count=len(responses),
        analyzed_start_id=analyzed[0].response_id if analyzed else -1,
        n_timeline=n_timeline,
        analysis_window_fraction=analysis_window_fraction,
        tweet_counts=tweet_counts,
        query_counts=query_counts,
    )


# -- serialization -----------------------------------------------------------


def save_conflict_records(path: str | Path, result: DetectionResult) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in result.records:
            fh.write(json.dumps({
                "response_id": record.response_id,
                "consumer_id": str(record.consumer_id),
                "producer_id": str(record.producer_id),
                "t": to_iso(record.t),
                "type": record.type.value,
                "witness_response_id": record.witness_response_id,
                "G_seconds": record.gap_us / 1_000_000,
            }) + "\n")


def load_conflict_records(path: str | Path) -> list[ConflictRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
                records.append(ConflictRecord(
                    response_id=int(data["response_id"]),
                    consumer_id=int(data["consumer_id"]),
                    producer_id=int(data["producer_id"]),
                    t=from_iso(data["t"]),
                    type=ConflictType(data["type"]),
                    witness_response_id=int(data["witness_response_id"]),
                    gap_us=round(data["G_seconds"] * 1_000_000),
                ))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise IntegrityError(f"{path}:{line_no}: corrupt conflict record: {exc}") from exc
    return records


def save_detection_totals(path: str | Path, result: DetectionResult) -> None:
    totals = {
        "total_responses": result.total_count,
        "analyzed_responses": result.analyzed_count,
        "analyzed_start_id": result.analyzed_start_id,
        "conflicting_responses": result.conflicting_count,
        "conflict_records": len(result.records),
        "type_counts": result.type_counts(),
        "n_timeline": result.n_timeline,
        "analysis_window_fraction": result.analysis_window_fraction,
        "per_response_G_us": {str(k): v for k, v in sorted(result.per_response_G.items())},
        "tweet_counts": {str(k): v for k, v in sorted(result.tweet_counts.items())},
        "query_counts": {str(k): v for k, v in sorted(result.query_counts.items())},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(totals, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_detection(records_path: str | Path, totals_path: str | Path) -> DetectionResult:
    records = load_conflict_records(records_path)
    try:
        with open(totals_path, encoding="utf-8") as fh:
            totals = json.load(fh)
        return DetectionResult(
            records=records,
            per_response_G={int(k): int(v) for k, v in totals["per_response_G_us"].items()},
            analyzed_count=int(totals["analyzed_responses"]),
            total_count=int(totals["total_responses"]),
            analyzed_start_id=int(totals["analyzed_start_id"]),
            n_timeline=int(totals["n_timeline"]),
            analysis_window_fraction=float(totals["analysis_window_fraction"]),
            tweet_counts={int(k): int(v) for k, v in totals["tweet_counts"].items()},
            query_counts={int(k): int(v) for k, v in totals["query_counts"].items()},
        )
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise IntegrityError(f"{totals_path}: corrupt totals: {exc}") from exc
