"""Independent reference implementations used to cross-check the detector.

Everything here is deliberately written from the definitions (filter,
sort, truncate, all-pairs scans) without reusing feedsim.detect internals.
"""

from __future__ import annotations

import numpy as np

from feedsim.app import TimelineResponse, TweetEvent
from feedsim.netgen import FollowingNetwork


def brute_timeline(consumer_id, T, tweets, network, n_timeline):
    """Merge-sort-and-truncate over the full log."""
    followed = set(network.follows[consumer_id])
    eligible = [tw for tw in tweets if tw.producer_id in followed and tw.t <= T]
    eligible.sort(key=lambda tw: (tw.t, tw.seq), reverse=True)
    return eligible[:n_timeline]


def brute_force_conflicts(responses, tweets, network, n_timeline,
                          window_fraction=1.0):
    """All-pairs crosschecking: returns {(response_id, producer, t, type)}."""
    seq_of = {(tw.producer_id, tw.t): tw.seq for tw in tweets}
    start = len(responses) - int(round(len(responses) * window_fraction))
    analyzed = list(responses)[start:]
    found = set()
    for resp in analyzed:
        oracle = brute_timeline(resp.consumer_id, resp.T, tweets, network, n_timeline)
        served_pairs = set(resp.entries)
        served_keys = [(t, seq_of[(pid, t)]) for pid, t in resp.entries]
        for tw in oracle:
            if (tw.producer_id, tw.t) in served_pairs:
                continue
            key = (tw.t, tw.seq)
            newer = any(k > key for k in served_keys)
            older = any(k < key for k in served_keys)
            witnesses = [
                other for other in analyzed
                if other.response_id != resp.response_id
                and (tw.producer_id, tw.t) in set(other.entries)
            ]
            if newer and older:
                if witnesses:
                    found.add((resp.response_id, tw.producer_id, tw.t, "gap"))
            elif not newer:
                if any(other.T < resp.T for other in witnesses):
                    found.add((resp.response_id, tw.producer_id, tw.t, "newer_earlier"))
    return found


def detector_conflict_set(result):
    return {(r.response_id, r.producer_id, r.t, r.type.value) for r in result.records}


def make_network(follows: dict[int, tuple[int, ...]], n_producers: int) -> FollowingNetwork:
    """Hand-build a network from explicit follow lists."""
    followers: dict[int, list[int]] = {p: [] for p in range(n_producers)}
    norm = {c: tuple(sorted(set(ps))) for c, ps in follows.items()}
    for c, ps in norm.items():
        for p in ps:
            followers[p].append(c)
    net = FollowingNetwork(
        n_producers=n_producers,
        n_consumers=len(norm),
        follows=norm,
        followers={p: tuple(sorted(cs)) for p, cs in followers.items()},
    )
    net.validate()
    return net


def random_instance(rng: np.random.Generator):
    """A small random corpus: (responses, tweets, network, n_timeline).

    Times are drawn from a narrow range so cross-producer timestamp ties
    are common; response styles mix near-oracle views with entry drops,
    stale views, and arbitrary subsets (including entries older than the
    oracle window).
    """
    n_producers = int(rng.integers(1, 6))
    n_consumers = int(rng.integers(1, 11))
    n_timeline = int(rng.integers(2, 9))
    follows = {}
    for c in range(n_consumers):
        k = int(rng.integers(1, n_producers + 1))
        follows[c] = tuple(sorted(rng.choice(n_producers, size=k, replace=False).tolist()))
    network = make_network(follows, n_producers)

    tweets = []
    raw = []
    for p in range(n_producers):
        count = int(rng.integers(0, 11))
        times = rng.choice(80, size=min(count, 80), replace=False)
        raw.extend((int(t), p) for t in times)
    raw.sort()
    tweets = [TweetEvent(producer_id=p, t=t, seq=i) for i, (t, p) in enumerate(raw)]
    total = min(len(tweets), 50)
    tweets = tweets[:total]

    responses = []
    n_responses = int(rng.integers(0, 60))
    Ts = sorted(int(t) for t in rng.integers(0, 100, size=n_responses))
    for rid, T in enumerate(Ts):
        consumer = int(rng.integers(0, n_consumers))
        followed = set(follows[consumer])
        # strictly-past entries only: a served view can never contain a
        # same-instant tweet while missing another (store values grow as a
        # chain), so fabricated corpora must not either
        eligible = [tw for tw in tweets if tw.producer_id in followed and tw.t < T]
        eligible.sort(key=lambda tw: (tw.t, tw.seq), reverse=True)
        style = rng.random()
        if style < 0.4:
            # near-oracle view with random drops
            kept = [tw for tw in eligible if rng.random() > 0.3][:n_timeline]
        elif style < 0.7 and eligible:
            # stale view: what the oracle looked like a little earlier
            cutoff = int(rng.integers(0, T + 1))
            kept = [tw for tw in eligible if tw.t <= cutoff][:n_timeline]
        else:
            # arbitrary subset, possibly older than the oracle window
            size = int(rng.integers(0, min(n_timeline, len(eligible)) + 1)) if eligible else 0
            idx = sorted(rng.choice(len(eligible), size=size, replace=False).tolist())
            kept = [eligible[i] for i in idx]
        entries = tuple((tw.producer_id, tw.t) for tw in kept)
        responses.append(TimelineResponse(response_id=rid, consumer_id=consumer,
                                          T=T, entries=entries))
    return responses, tweets, network, n_timeline
