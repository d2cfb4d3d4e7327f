"""Synthetic following-network and workload-rate generation.

Degrees and rates are Zipf-shaped: values are iid rank draws from
P(r) ~ r**-s rescaled to a target mean, while producer popularity (which
shapes in-degree) follows fixed rank weights. Generation is a pure
function of the seeded streams, so the same seed reproduces the same
network bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .stats import rank_correlation, rank_size_slope, zipf_rank_mle

# Degree means may drift from their target by rounding and the min-degree
# floor; feasibility of the two degree means is checked to this slack.
FEASIBILITY_SLACK = 0.01


class InfeasibleParametersError(ValueError):
    """Requested population sizes and degree means cannot coexist."""


@dataclass(frozen=True)
class ZipfPair:
    mean: float
    s: float

    def to_dict(self) -> dict:
        return {"mean": self.mean, "s": self.s}

    @classmethod
    def from_dict(cls, data: dict) -> "ZipfPair":
        return cls(mean=float(data["mean"]), s=float(data["s"]))


@dataclass(frozen=True)
class ZipfParams:
    """Shape parameters of the four skewed workload distributions."""

    consumers_per_producer: ZipfPair = ZipfPair(13.38, 0.39)
    producers_per_consumer: ZipfPair = ZipfPair(4.63, 0.62)
    producer_rate_per_hour: ZipfPair = ZipfPair(1.0, 0.57)
    consumer_rate_per_hour: ZipfPair = ZipfPair(5.8, 0.62)

    def to_dict(self) -> dict:
        return {
            "consumers_per_producer": self.consumers_per_producer.to_dict(),
            "producers_per_consumer": self.producers_per_consumer.to_dict(),
            "producer_rate_per_hour": self.producer_rate_per_hour.to_dict(),
            "consumer_rate_per_hour": self.consumer_rate_per_hour.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ZipfParams":
        return cls(**{key: ZipfPair.from_dict(data[key]) for key in data})


class ZipfSampler:
    """Rank sampler with P(rank r) proportional to r**-s over 1..rank_count."""

    def __init__(self, rank_count: int, s: float):
        if rank_count < 1:
            raise ValueError("rank_count must be >= 1")
        if s < 0:
            raise ValueError("s must be >= 0")
        self.rank_count = rank_count
        self.s = s
        weights = np.arange(1, rank_count + 1, dtype=float) ** (-s)
        self.pmf = weights / weights.sum()
        self._cdf = np.cumsum(self.pmf)
        self._cdf[-1] = 1.0

    def sample(self, stream: np.random.Generator) -> int:
        return int(np.searchsorted(self._cdf, stream.random(), side="right")) + 1

    def sample_many(self, n: int, stream: np.random.Generator) -> np.ndarray:
        return np.searchsorted(self._cdf, stream.random(n), side="right").astype(np.int64) + 1

    @property
    def mean(self) -> float:
        return float(np.arange(1, self.rank_count + 1) @ self.pmf)


def zipf_sample(rank_count: int, s: float, stream: np.random.Generator) -> int:
    """Draw one rank in [1, rank_count] with probability proportional to r**-s."""
    return ZipfSampler(rank_count, s).sample(stream)


@dataclass
class FollowingNetwork:
    """Static bipartite consumer -> producer follow relation."""

    n_producers: int
    n_consumers: int
    follows: dict[int, tuple[int, ...]]
    followers: dict[int, tuple[int, ...]]
    # Raw rank draws behind the out-degrees; generation-time diagnostics only.
    out_degree_ranks: np.ndarray | None = None

    @property
    def edge_count(self) -> int:
        return sum(len(p) for p in self.follows.values())

    def out_degrees(self) -> np.ndarray:
        return np.array([len(self.follows[c]) for c in range(self.n_consumers)], dtype=np.int64)

    def in_degrees(self) -> np.ndarray:
        return np.array([len(self.followers[p]) for p in range(self.n_producers)], dtype=np.int64)

    def validate(self) -> None:
        """Check structural invariants; raises ValueError on violation."""
        inverse: dict[int, list[int]] = {p: [] for p in range(self.n_producers)}
        for consumer, producers in self.follows.items():
            if len(producers) == 0:
                raise ValueError(f"consumer {consumer} follows nobody")
            if len(set(producers)) != len(producers):
                raise ValueError(f"consumer {consumer} has duplicate follows")
            if tuple(sorted(producers)) != tuple(producers):
                raise ValueError(f"consumer {consumer} follow list not sorted")
            for p in producers:
                if not 0 <= p < self.n_producers:
                    raise ValueError(f"consumer {consumer} follows unknown producer {p}")
                inverse[p].append(consumer)
        for p in range(self.n_producers):
            if tuple(sorted(inverse[p])) != self.followers.get(p, ()):
                raise ValueError(f"followers map is not the inverse of follows at producer {p}")


@dataclass
class WorkloadProfile:
    """Per-producer tweet rates and per-consumer query rates (per hour)."""

    producer_rate: np.ndarray
    consumer_rate: np.ndarray
    zipf_params: ZipfParams | None = None
    scale: float = 1.0
    producer_rate_ranks: np.ndarray | None = None
    consumer_rate_ranks: np.ndarray | None = None


def _calibrate_degree_scale(sampler: ZipfSampler, target_mean: float, max_value: int) -> float:
    """Find f so that E[clip(round(f * rank), 1, max_value)] hits target_mean."""
    ranks = np.arange(1, sampler.rank_count + 1, dtype=float)
    pmf = sampler.pmf

    def realized(f: float) -> float:
        return float(np.clip(np.round(f * ranks), 1, max_value) @ pmf)

    if target_mean > max_value:
        raise InfeasibleParametersError(
            f"mean degree {target_mean} exceeds population size {max_value}"
        )
    lo, hi = 0.0, 2.0 * target_mean / sampler.mean + 1.0
    while realized(hi) < target_mean and hi < 1e12:
        hi *= 2
    for _ in range(80):
        mid = (lo + hi) / 2
        if realized(mid) < target_mean:
            lo = mid
        else:
            hi = mid
    return hi


def _choose_distinct(cdf: np.ndarray, pmf: np.ndarray, k: int,
                     stream: np.random.Generator) -> np.ndarray:
    """Draw k distinct indices with probability proportional to pmf."""
    n = len(cdf)
    if k >= n:
        return np.arange(n)
    if 3 * k >= n:
        return np.sort(stream.choice(n, size=k, replace=False, p=pmf))
    chosen: list[int] = []
    seen: set[int] = set()
    while len(chosen) < k:
        batch = np.searchsorted(cdf, stream.random(max(2 * (k - len(chosen)), 8)), side="right")
        for idx in batch:
            idx = int(idx)
            if idx not in seen:
                seen.add(idx)
                chosen.append(idx)
                if len(chosen) == k:
                    break
    return np.sort(np.array(chosen, dtype=np.int64))


def build_network(n_producers: int, n_consumers: int, zipf_params: ZipfParams,
                  stream: np.random.Generator) -> FollowingNetwork:
    """Generate the static follow relation.

    Each consumer's out-degree is an iid Zipf rank draw rescaled to the
    target mean; it then picks that many distinct producers with
    probability proportional to a Zipf popularity weight, which is what
    shapes the in-degree distribution.
    """
    if n_producers < 1 or n_consumers < 1:
        raise ValueError("need at least one producer and one consumer")
    mean_out = zipf_params.producers_per_consumer.mean
    mean_in = zipf_params.consumers_per_producer.mean
    if mean_out < 1:
        raise InfeasibleParametersError("mean out-degree below the minimum degree of 1")
    edges_out = mean_out * n_consumers
    edges_in = mean_in * n_producers
    if abs(edges_out - edges_in) > FEASIBILITY_SLACK * max(edges_out, edges_in):
        raise InfeasibleParametersError(
            f"mean out-degree x consumers ({edges_out:.1f}) and mean in-degree x producers "
            f"({edges_in:.1f}) disagree beyond rounding"
        )

    out_sampler = ZipfSampler(n_producers, zipf_params.producers_per_consumer.s)
    f = _calibrate_degree_scale(out_sampler, mean_out, n_producers)
    ranks = out_sampler.sample_many(n_consumers, stream)
    degrees = np.clip(np.round(f * ranks), 1, n_producers).astype(np.int64)

    popularity = ZipfSampler(n_producers, zipf_params.consumers_per_producer.s)
    pop_pmf, pop_cdf = popularity.pmf, popularity._cdf

    follows: dict[int, tuple[int, ...]] = {}
    follower_lists: list[list[int]] = [[] for _ in range(n_producers)]
    for consumer in range(n_consumers):
        picks = _choose_distinct(pop_cdf, pop_pmf, int(degrees[consumer]), stream)
        follows[consumer] = tuple(int(p) for p in picks)
        for p in picks:
            follower_lists[p].append(consumer)
    followers = {p: tuple(follower_lists[p]) for p in range(n_producers)}

    return FollowingNetwork(
        n_producers=n_producers,
        n_consumers=n_consumers,
        follows=follows,
        followers=followers,
        out_degree_ranks=ranks,
    )


def build_profile(network: FollowingNetwork, zipf_params: ZipfParams, scale: float,
                  stream: np.random.Generator) -> WorkloadProfile:
    """Assign Zipf-shaped tweet/query rates, rescaled to exact target means.

    Rates are drawn independently of the follow graph, so a producer's
    popularity says nothing about how often it posts.
    """
    if not 0 < scale <= 1:
        raise ValueError("scale must be in (0, 1]")

    def draw_rates(count: int, pair: ZipfPair) -> tuple[np.ndarray, np.ndarray]:
        sampler = ZipfSampler(count, pair.s)
        ranks = sampler.sample_many(count, stream)
        values = ranks.astype(float)
        rates = values * (pair.mean * scale / values.mean())
        return rates, ranks

    producer_rate, producer_ranks = draw_rates(network.n_producers,
                                               zipf_params.producer_rate_per_hour)
    consumer_rate, consumer_ranks = draw_rates(network.n_consumers,
                                               zipf_params.consumer_rate_per_hour)
    return WorkloadProfile(
        producer_rate=producer_rate,
        consumer_rate=consumer_rate,
        zipf_params=zipf_params,
        scale=scale,
        producer_rate_ranks=producer_ranks,
        consumer_rate_ranks=consumer_ranks,
    )


@dataclass
class DistributionCheck:
    name: str
    target_mean: float
    realized_mean: float
    mean_ok: bool
    target_s: float
    fitted_s: float | None
    s_ok: bool | None

    def to_dict(self) -> dict:
        return self.__dict__.copy()


@dataclass
class ValidationReport:
    checks: list[DistributionCheck]
    degree_rate_spearman: float | None
    independence_ok: bool
    passed: bool

    def to_dict(self) -> dict:
        return {
            "checks": [c.to_dict() for c in self.checks],
            "degree_rate_spearman": self.degree_rate_spearman,
            "independence_ok": self.independence_ok,
            "passed": self.passed,
        }


def validate_profile(network: FollowingNetwork, profile: WorkloadProfile,
                     targets: ZipfParams | None = None, *,
                     mean_tolerance: float = 0.10,
                     exponent_tolerance: float = 0.25,
                     independence_threshold: float = 0.10) -> ValidationReport:
    """Compare realized means and Zipf exponents against their targets.

    Exponent fits use the raw rank draws when the network/profile still
    carry them (generation time); for data loaded from disk the fit is
    skipped and only the means are checked.
    """
    targets = targets or profile.zipf_params or ZipfParams()
    scale = profile.scale

    def check(name: str, values: np.ndarray, pair: ZipfPair, target_mean: float,
              ranks: np.ndarray | None, rank_count: int,
              rank_size: bool = False) -> DistributionCheck:
        realized = float(np.mean(values))
        mean_ok = abs(realized - target_mean) <= mean_tolerance * target_mean
        fitted: float | None = None
        if rank_size:
            fitted = rank_size_slope(values)
        elif ranks is not None and rank_count >= 2:
            fitted = zipf_rank_mle(ranks, rank_count)
        s_ok = None if fitted is None else abs(fitted - pair.s) <= exponent_tolerance
        return DistributionCheck(name, target_mean, realized, mean_ok, pair.s, fitted, s_ok)

    in_degrees = network.in_degrees()
    out_degrees = network.out_degrees()
    checks = [
        check("consumers_per_producer", in_degrees, targets.consumers_per_producer,
              targets.consumers_per_producer.mean, None, network.n_producers, rank_size=True),
        check("producers_per_consumer", out_degrees, targets.producers_per_consumer,
              targets.producers_per_consumer.mean, network.out_degree_ranks,
              network.n_producers),
        check("producer_rate_per_hour", profile.producer_rate, targets.producer_rate_per_hour,
              targets.producer_rate_per_hour.mean * scale, profile.producer_rate_ranks,
              network.n_producers),
        check("consumer_rate_per_hour", profile.consumer_rate, targets.consumer_rate_per_hour,
              targets.consumer_rate_per_hour.mean * scale, profile.consumer_rate_ranks,
              network.n_consumers),
    ]

    rho = rank_correlation(in_degrees, profile.producer_rate)
    independence_ok = rho is None or abs(rho) < independence_threshold
    passed = (
        all(c.mean_ok for c in checks)
        and independence_ok
        and all(c.s_ok is not False for c in checks)
    )
    return ValidationReport(checks, rho, independence_ok, passed)


def save_network_profile(path: str | Path, network: FollowingNetwork,
                         profile: WorkloadProfile) -> None:
    """Write the follow lists and rates as line-delimited JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        for consumer in range(network.n_consumers):
            line = {"c": consumer, "p": list(network.follows[consumer])}
            fh.write(json.dumps(line) + "\n")
        for producer in range(network.n_producers):
            line = {"producer": producer, "rate_per_hour": float(profile.producer_rate[producer])}
            fh.write(json.dumps(line) + "\n")
        for consumer in range(network.n_consumers):
            line = {"consumer": consumer, "rate_per_hour": float(profile.consumer_rate[consumer])}
            fh.write(json.dumps(line) + "\n")


def load_network_profile(path: str | Path) -> tuple[FollowingNetwork, WorkloadProfile]:
    """Read a network/profile file; records self-identify by field name."""
    follows: dict[int, tuple[int, ...]] = {}
    producer_rates: dict[int, float] = {}
    consumer_rates: dict[int, float] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: bad JSON: {exc}") from exc
            if "c" in record:
                follows[int(record["c"])] = tuple(sorted(int(p) for p in record["p"]))
            elif "producer" in record:
                producer_rates[int(record["producer"])] = float(record["rate_per_hour"])
            elif "consumer" in record:
                consumer_rates[int(record["consumer"])] = float(record["rate_per_hour"])
            else:
                raise ValueError(f"{path}:{line_no}: unrecognized record {record!r}")

    n_consumers = len(follows)
    n_producers = len(producer_rates)
    if set(follows) != set(range(n_consumers)):
        raise ValueError("consumer ids are not a dense 0..N-1 range")
    if set(producer_rates) != set(range(n_producers)):
        raise ValueError("producer ids are not a dense 0..N-1 range")
    if set(consumer_rates) != set(range(n_consumers)):
        raise ValueError("consumer rate records do not match follow records")

    follower_lists: dict[int, list[int]] = {p: [] for p in range(n_producers)}
    for consumer in range(n_consumers):
        for p in follows[consumer]:
            follower_lists[p].append(consumer)
    followers = {p: tuple(sorted(follower_lists[p])) for p in range(n_producers)}
    network = FollowingNetwork(n_producers, n_consumers, follows, followers)
    network.validate()
    profile = WorkloadProfile(
        producer_rate=np.array([producer_rates[p] for p in range(n_producers)]),
        consumer_rate=np.array([consumer_rates[c] for c in range(n_consumers)]),
    )
    return network, profile
