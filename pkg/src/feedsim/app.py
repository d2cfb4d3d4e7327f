"""Feed-following application: global-order timestamping, asynchronous
per-follower fan-out into materialized timeline views, and query serving.

Each posted tweet receives a global (t, seq) timestamp from the single
frontend, then one timeline update per follower flows through the store's
conditional-write path. Query responses are whatever a random replica
holds at that instant.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .netgen import FollowingNetwork, WorkloadProfile
from .sim import (
    MICROS_PER_HOUR,
    MICROS_PER_MS,
    DistributionSpec,
    EventKind,
    EventLoop,
    RngStreams,
    SimEvent,
    from_iso,
    make_sampler,
    to_iso,
)
from .store import ReplicatedStore, StoreConfig


@dataclass(frozen=True, slots=True)
class TweetEvent:
    """One publish event in the global order; immutable once timestamped."""

    producer_id: int
    t: int
    seq: int


@dataclass(slots=True)
class TimelineResponse:
    """One served timeline query; entries are (producer_id, t) newest-first."""

    response_id: int
    consumer_id: int
    T: int
    entries: tuple[tuple[int, int], ...]
    replica_served: int = -1


@dataclass(frozen=True)
class FanoutSettings:
    """How follower timeline updates are executed after a post.

    "scheduled" runs each update as its own event after a sampled service
    delay, with at most concurrency_cap updates of one tweet in service at
    a time (None = unlimited). "synchronous" completes the whole fan-out
    inside the post itself, which is the consistency baseline.
    """

    mode: str = "scheduled"
    service: DistributionSpec = field(default_factory=lambda: DistributionSpec("exponential", 20.0))
    concurrency_cap: int | None = None
    retry_backoff_ms: float = 10.0

    def __post_init__(self):
        if self.mode not in ("scheduled", "synchronous"):
            raise ValueError(f"unknown fan-out mode: {self.mode!r}")
        if self.concurrency_cap is not None and self.concurrency_cap < 1:
            raise ValueError("concurrency_cap must be >= 1 or None")
        if self.retry_backoff_ms <= 0:
            raise ValueError("retry_backoff_ms must be positive")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "service": self.service.to_dict(),
            "concurrency_cap": self.concurrency_cap,
            "retry_backoff_ms": self.retry_backoff_ms,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FanoutSettings":
        return cls(
            mode=data["mode"],
            service=DistributionSpec.from_dict(data["service"]),
            concurrency_cap=data["concurrency_cap"],
            retry_backoff_ms=float(data.get("retry_backoff_ms", 10.0)),
        )


# Store timeline entries are (t, seq, producer_id, wire_pair) quadruples kept
# newest-first; wire_pair is the shared (producer_id, t) tuple responses expose.
def insert_entry(value: tuple | None, tweet: TweetEvent, pair: tuple[int, int],
                 n_timeline: int) -> tuple:
    """Insert a tweet into a timeline value, newest-first, truncated to n_timeline."""
    entry = (tweet.t, tweet.seq, tweet.producer_id, pair)
    if value is None or not value:
        return (entry,)
    if entry > value[0]:
        merged = (entry,) + value
    else:
        items = list(value)
        pos = len(items)
        while pos > 0 and items[pos - 1] < entry:
            pos -= 1
        items.insert(pos, entry)
        merged = tuple(items)
    return merged[:n_timeline]


@dataclass(slots=True)
class _Update:
    tweet: TweetEvent
    consumer_id: int
    expected: tuple | None


@dataclass(slots=True)
class _Fanout:
    tweet: TweetEvent
    queue: deque
    pending: int
    lanes: int = 0


@dataclass
class TraceStats:
    """Per-run bookkeeping needed to audit detector output against the run."""

    duration_us: int = 0
    max_propagation_lag_us: int = 0
    fanout_completion_us: dict[tuple[int, int], int] = field(default_factory=dict)
    tweets: int = 0
    responses: int = 0
    updates_committed: int = 0
    cas_failures: int = 0
    retries: int = 0
    events_processed: int = 0

    def to_dict(self) -> dict:
        completions = [
            {"producer_id": str(pid), "t": to_iso(t), "completion_us": delay}
            for (pid, t), delay in sorted(self.fanout_completion_us.items(),
                                          key=lambda item: (item[0][1], item[0][0]))
        ]
        return {
            "duration_us": self.duration_us,
            "max_propagation_lag_us": self.max_propagation_lag_us,
            "tweets": self.tweets,
            "responses": self.responses,
            "updates_committed": self.updates_committed,
            "cas_failures": self.cas_failures,
            "retries": self.retries,
            "events_processed": self.events_processed,
            "fanout_completions": completions,
        }


@dataclass
class RunArtifacts:
    tweet_log: list[TweetEvent]
    responses: list[TimelineResponse]
    trace: TraceStats


class FeedApp:
    """Application layer bound to one event loop and one store."""

    def __init__(self, network: FollowingNetwork, loop: EventLoop, store: ReplicatedStore,
                 rng: RngStreams, n_timeline: int = 20,
                 fanout: FanoutSettings | None = None):
        if n_timeline < 1:
            raise ValueError("n_timeline must be >= 1")
        self.network = network
        self.loop = loop
        self.store = store
        self.n_timeline = n_timeline
        self.fanout = fanout or FanoutSettings()
        self.tweet_log: list[TweetEvent] = []
        self.responses: list[TimelineResponse] = []
        self.fanout_completion_us: dict[tuple[int, int], int] = {}
        self.retry_count = 0
        self._service_sample = make_sampler(self.fanout.service, rng.stream("app.fanout_delay"))
        self._order_rng = rng.stream("app.fanout_order")
        self._backoff_us = round(self.fanout.retry_backoff_ms * MICROS_PER_MS)
        self._active_fanouts: dict[tuple[int, int], _Fanout] = {}
        loop.set_handler(EventKind.TWEET_ARRIVAL, self._on_tweet_arrival)
        loop.set_handler(EventKind.TIMELINE_QUERY, self._on_timeline_query)
        loop.set_handler(EventKind.FANOUT_STEP, self._on_fanout_step)
        loop.set_handler(EventKind.RETRY_WRITE, self._on_retry_write)

    # -- posting ---------------------------------------------------------

    def post_tweet(self, producer_id: int) -> TweetEvent:
        """Timestamp a new tweet and kick off its per-follower fan-out."""
        if producer_id not in self.network.followers:
            raise ValueError(f"unknown producer {producer_id}")
        tweet = TweetEvent(producer_id=producer_id, t=self.loop.now(), seq=len(self.tweet_log))
        key = (tweet.producer_id, tweet.t)
        if key in self.fanout_completion_us:
            raise ValueError(f"producer {producer_id} already posted at t={tweet.t}")
        self.tweet_log.append(tweet)
        followers = self.network.followers[producer_id]
        if not followers:
            self.fanout_completion_us[key] = 0
            return tweet
        if self.fanout.mode == "synchronous":
            for consumer_id in followers:
                self.apply_timeline_update(consumer_id, tweet)
            self.fanout_completion_us[key] = 0
            return tweet
        order = self._order_rng.permutation(len(followers))
        fanout = _Fanout(tweet=tweet, queue=deque(followers[i] for i in order),
                         pending=len(followers))
        self._active_fanouts[key] = fanout
        self.fanout_completion_us[key] = 0
        cap = self.fanout.concurrency_cap
        while fanout.queue and (cap is None or fanout.lanes < cap):
            self._start_update(fanout)
        return tweet

    def apply_timeline_update(self, consumer_id: int, tweet: TweetEvent) -> None:
        """Read-modify-write one follower timeline until the write lands."""
        pair = (tweet.producer_id, tweet.t)
        while True:
            expected = self.store.authoritative_read(consumer_id)
            new_value = insert_entry(expected, tweet, pair, self.n_timeline)
            if self.store.conditional_write(consumer_id, expected, new_value).ok:
                return

    def _start_update(self, fanout: _Fanout) -> None:
        consumer_id = fanout.queue.popleft()
        fanout.lanes += 1
        # The update task reads the timeline when it starts service; the
        # conditional write lands when service completes.
        expected = self.store.authoritative_read(consumer_id)
        delay = self._service_sample()
        self.loop.schedule_at(self.loop.now() + delay, EventKind.FANOUT_STEP,
                              _Update(fanout.tweet, consumer_id, expected))

    def _attempt_write(self, consumer_id: int, tweet: TweetEvent,
                       expected: tuple | None) -> bool:
        pair = (tweet.producer_id, tweet.t)
        new_value = insert_entry(expected, tweet, pair, self.n_timeline)
        result = self.store.conditional_write(consumer_id, expected, new_value)
        if result.ok:
            self._record_commit(tweet)
            return True
        self.retry_count += 1
        self.loop.schedule_at(self.loop.now() + self._backoff_us, EventKind.RETRY_WRITE,
                              _Update(tweet, consumer_id, result.current))
        return False

    def _record_commit(self, tweet: TweetEvent) -> None:
        key = (tweet.producer_id, tweet.t)
        delay = self.loop.now() - tweet.t
        if delay > self.fanout_completion_us[key]:
            self.fanout_completion_us[key] = delay
        fanout = self._active_fanouts.get(key)
        if fanout is not None:
            fanout.pending -= 1
            if fanout.pending == 0:
                del self._active_fanouts[key]

    def _on_tweet_arrival(self, event: SimEvent) -> None:
        self.post_tweet(event.payload)

    def _on_fanout_step(self, event: SimEvent) -> None:
        update: _Update = event.payload
        key = (update.tweet.producer_id, update.tweet.t)
        fanout = self._active_fanouts.get(key)
        self._attempt_write(update.consumer_id, update.tweet, update.expected)
        # The service lane frees when the first attempt completes; any
        # retries run off-lane.
        if fanout is not None:
            fanout.lanes -= 1
            cap = self.fanout.concurrency_cap
            while fanout.queue and (cap is None or fanout.lanes < cap):
                self._start_update(fanout)

    def _on_retry_write(self, event: SimEvent) -> None:
        update: _Update = event.payload
        self._attempt_write(update.consumer_id, update.tweet, update.expected)

    # -- querying --------------------------------------------------------

    def query_timeline(self, consumer_id: int) -> TimelineResponse:
        """Serve the materialized view from a random replica; no caching."""
        if consumer_id not in self.network.follows:
            raise ValueError(f"unknown consumer {consumer_id}")
        replica, value = self.store.read_with_source(consumer_id)
        entries = () if value is None else tuple(e[3] for e in value)
        response = TimelineResponse(
            response_id=len(self.responses),
            consumer_id=consumer_id,
            T=self.loop.now(),
            entries=entries,
            replica_served=replica,
        )
        self.responses.append(response)
        return response

    def _on_timeline_query(self, event: SimEvent) -> None:
        self.query_timeline(event.payload)

    def unfinished_fanouts(self) -> list[tuple[int, int]]:
        return sorted(self._active_fanouts, key=lambda key: (key[1], key[0]))


def _poisson_times_us(rate_per_hour: float, duration_us: int,
                      stream: np.random.Generator) -> np.ndarray:
    """Arrival times of a Poisson process over [0, duration_us), ascending."""
    if rate_per_hour <= 0 or duration_us <= 0:
        return np.empty(0, dtype=np.int64)
    mean_gap = MICROS_PER_HOUR / rate_per_hour
    expected = duration_us / mean_gap
    times: list[np.ndarray] = []
    total = 0.0
    while True:
        chunk = stream.exponential(mean_gap, size=max(16, int(expected * 1.5) + 8))
        cum = total + np.cumsum(chunk)
        times.append(cum)
        total = float(cum[-1])
        if total > duration_us:
            break
    all_times = np.concatenate(times)
    return all_times[all_times < duration_us].astype(np.int64)


def _strictly_increasing(times: np.ndarray) -> np.ndarray:
    # Same-microsecond collisions are nudged so (producer_id, t) stays unique.
    for i in range(1, len(times)):
        if times[i] <= times[i - 1]:
            times[i] = times[i - 1] + 1
    return times


def run_experiment(network: FollowingNetwork, profile: WorkloadProfile,
                   store_config: StoreConfig, duration_hours: float, seed: int, *,
                   fanout: FanoutSettings | None = None, n_timeline: int = 20,
                   record_trace: bool = False) -> RunArtifacts:
    """Run per-producer Poisson posts and per-consumer Poisson queries.

    Returns the immutable tweet log, the full response log, and trace
    statistics for auditing.
    """
    if duration_hours < 0:
        raise ValueError("duration_hours must be >= 0")
    duration_us = round(duration_hours * MICROS_PER_HOUR)
    rng = RngStreams(seed)
    loop = EventLoop(record_trace=record_trace)
    store = ReplicatedStore(store_config, loop, rng)
    app = FeedApp(network, loop, store, rng, n_timeline=n_timeline, fanout=fanout)

    tweet_stream = rng.stream("workload.tweet_times")
    for producer in range(network.n_producers):
        times = _poisson_times_us(float(profile.producer_rate[producer]), duration_us,
                                  tweet_stream)
        for t in _strictly_increasing(times):
            loop.schedule_at(int(t), EventKind.TWEET_ARRIVAL, producer)
    query_stream = rng.stream("workload.query_times")
    for consumer in range(network.n_consumers):
        times = _poisson_times_us(float(profile.consumer_rate[consumer]), duration_us,
                                  query_stream)
        for t in times:
            loop.schedule_at(int(t), EventKind.TIMELINE_QUERY, consumer)

    loop.run_until(duration_us)

    completions = dict(app.fanout_completion_us)
    for key in app.unfinished_fanouts():
        completions[key] = duration_us - key[1]
    trace = TraceStats(
        duration_us=duration_us,
        max_propagation_lag_us=store.max_lag_sample_us,
        fanout_completion_us=completions,
        tweets=len(app.tweet_log),
        responses=len(app.responses),
        updates_committed=store.write_count,
        cas_failures=store.cas_failure_count,
        retries=app.retry_count,
        events_processed=loop.processed_count,
    )
    return RunArtifacts(tweet_log=app.tweet_log, responses=app.responses, trace=trace)


# -- log files -------------------------------------------------------------


def save_tweet_log(path: str | Path, tweets: list[TweetEvent]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tw in tweets:
            fh.write(json.dumps({"producer_id": str(tw.producer_id), "t": to_iso(tw.t),
                                 "seq": tw.seq}) + "\n")


def load_tweet_log(path: str | Path) -> list[TweetEvent]:
    tweets = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                tweets.append(TweetEvent(producer_id=int(record["producer_id"]),
                                         t=from_iso(record["t"]), seq=int(record["seq"])))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: corrupt tweet record: {exc}") from exc
    return tweets


def save_response_log(path: str | Path, responses: list[TimelineResponse]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for resp in responses:
            entries = [{"producer_id": str(pid), "t": to_iso(t)} for pid, t in resp.entries]
            fh.write(json.dumps({"response_id": resp.response_id,
                                 "consumer_id": str(resp.consumer_id),
                                 "T": to_iso(resp.T), "entries": entries}) + "\n")


def load_response_log(path: str | Path) -> list[TimelineResponse]:
    responses = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                entries = tuple((int(e["producer_id"]), from_iso(e["t"]))
                                for e in record["entries"])
                responses.append(TimelineResponse(response_id=int(record["response_id"]),
                                                  consumer_id=int(record["consumer_id"]),
                                                  T=from_iso(record["T"]), entries=entries))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: corrupt response record: {exc}") from exc
    return responses
