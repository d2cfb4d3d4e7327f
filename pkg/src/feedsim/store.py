"""Simulated replicated key-value store with eventual consistency.

Writes commit at one home replica and propagate to the others after a
sampled lag; reads hit a uniformly random replica and may be stale.
Conditional writes validate against the authoritative (highest committed)
version, giving per-key strong write ordering on top of eventually
consistent reads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, NamedTuple

from .sim import DistributionSpec, EventKind, EventLoop, RngStreams, SimEvent, make_sampler


@dataclass(frozen=True)
class StoreConfig:
    n_replicas: int = 3
    lag: DistributionSpec = field(default_factory=lambda: DistributionSpec("exponential", 500.0))
    read_policy: str = "uniform_random_replica"
    write_home_policy: str = "uniform_random_replica"

    def __post_init__(self):
        if self.n_replicas < 1:
            raise ValueError("n_replicas must be >= 1")
        if self.read_policy != "uniform_random_replica":
            raise ValueError(f"unsupported read policy: {self.read_policy!r}")
        if self.write_home_policy != "uniform_random_replica":
            raise ValueError(f"unsupported write-home policy: {self.write_home_policy!r}")

    def to_dict(self) -> dict:
        return {
            "n_replicas": self.n_replicas,
            "lag": self.lag.to_dict(),
            "read_policy": self.read_policy,
            "write_home_policy": self.write_home_policy,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StoreConfig":
        return cls(
            n_replicas=int(data["n_replicas"]),
            lag=DistributionSpec.from_dict(data["lag"]),
            read_policy=data.get("read_policy", "uniform_random_replica"),
            write_home_policy=data.get("write_home_policy", "uniform_random_replica"),
        )


@dataclass(frozen=True)
class WriteAck:
    home_replica: int
    version: int
    commit_time: int


class CasResult(NamedTuple):
    ok: bool
    ack: WriteAck | None
    current: Any


class ReplicatedStore:
    """All mutation happens inside the owning event loop; never share across threads."""

    def __init__(self, config: StoreConfig, loop: EventLoop, rng: RngStreams,
                 record_applies: bool = False, record_lags: bool = False):
        self.config = config
        self._loop = loop
        self._replicas: list[dict[Any, tuple[int, Any]]] = [
            {} for _ in range(config.n_replicas)
        ]
        self._authoritative: dict[Any, tuple[int, Any]] = {}
        self._lag_sample = make_sampler(config.lag, rng.stream("store.lag"))
        self._read_rng = rng.stream("store.read")
        self._home_rng = rng.stream("store.home")
        self.max_lag_sample_us = 0
        self.write_count = 0
        self.cas_failure_count = 0
        self.applied_log: list[tuple[int, Any, int]] | None = [] if record_applies else None
        self.lag_samples: list[int] | None = [] if record_lags else None
        loop.set_handler(EventKind.PROPAGATION_ARRIVAL, self._on_propagation)

    def _commit(self, key: Any, value: Any) -> WriteAck:
        version = self._authoritative.get(key, (0, None))[0] + 1
        now = self._loop.now()
        home = int(self._home_rng.integers(self.config.n_replicas))
        self._authoritative[key] = (version, value)
        self._apply(home, key, version, value)
        for replica in range(self.config.n_replicas):
            if replica == home:
                continue
            lag = self._lag_sample()
            if lag > self.max_lag_sample_us:
                self.max_lag_sample_us = lag
            if self.lag_samples is not None:
                self.lag_samples.append(lag)
            self._loop.schedule_at(now + lag, EventKind.PROPAGATION_ARRIVAL,
                                   (replica, key, version, value))
        self.write_count += 1
        return WriteAck(home_replica=home, version=version, commit_time=now)

    def _apply(self, replica: int, key: Any, version: int, value: Any) -> None:
        # Last writer by version wins; late lower-version arrivals are dropped.
        current = self._replicas[replica].get(key)
        if current is None or version > current[0]:
            self._replicas[replica][key] = (version, value)
            if self.applied_log is not None:
                self.applied_log.append((replica, key, version))

    def _on_propagation(self, event: SimEvent) -> None:
        replica, key, version, value = event.payload
        self._apply(replica, key, version, value)

    def write(self, key: Any, value: Any) -> WriteAck:
        """Unconditional write; always succeeds."""
        return self._commit(key, value)

    def conditional_write(self, key: Any, expected: Any, new_value: Any) -> CasResult:
        """Commit new_value iff the authoritative value equals expected.

        On failure the current authoritative value is returned so the
        caller can recompute and retry.
        """
        current = self.authoritative_read(key)
        if current != expected:
            self.cas_failure_count += 1
            return CasResult(False, None, current)
        return CasResult(True, self._commit(key, new_value), None)

    def read(self, key: Any) -> Any:
        """Read from a uniformly random replica; may be stale or absent."""
        return self.read_with_source(key)[1]

    def read_with_source(self, key: Any) -> tuple[int, Any]:
        replica = int(self._read_rng.integers(self.config.n_replicas))
        entry = self._replicas[replica].get(key)
        return replica, None if entry is None else entry[1]

    def authoritative_read(self, key: Any) -> Any:
        """Highest-version committed value across replicas and in-flight updates."""
        entry = self._authoritative.get(key)
        return None if entry is None else entry[1]

    def replica_value(self, replica: int, key: Any) -> Any:
        entry = self._replicas[replica].get(key)
        return None if entry is None else entry[1]

    def is_converged(self) -> bool:
        """True when every replica holds the authoritative value for every key."""
        return all(
            self._replicas[r].get(key) == auth
            for key, auth in self._authoritative.items()
            for r in range(self.config.n_replicas)
        )

    def dump_state(self) -> dict:
        """JSON-friendly snapshot for debugging."""
        def encode(table: dict) -> dict:
            return {
                repr(key): {"version": version, "value": value}
                for key, (version, value) in sorted(table.items(), key=lambda kv: repr(kv[0]))
            }

        return {
            "authoritative": encode(self._authoritative),
            "replicas": [encode(replica) for replica in self._replicas],
        }
