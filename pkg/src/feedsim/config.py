"""Experiment configuration: one JSON-serializable record drives a run."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .app import FanoutSettings
from .netgen import ZipfParams
from .sim import DistributionSpec
from .store import StoreConfig

DESK_N_PRODUCERS = 679
DESK_N_CONSUMERS = 1963


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 1
    scale: float = 1.0
    n_producers: int = DESK_N_PRODUCERS
    n_consumers: int = DESK_N_CONSUMERS
    zipf: ZipfParams = field(default_factory=ZipfParams)
    store: StoreConfig = field(default_factory=StoreConfig)
    fanout: FanoutSettings = field(default_factory=FanoutSettings)
    n_timeline: int = 20
    duration_hours: float = 2.0
    analysis_window_fraction: float = 0.5
    out_dir: str = "out"

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if not 0 < self.scale <= 1:
            raise ValueError("scale must be in (0, 1]")
        if self.n_producers < 1 or self.n_consumers < 1:
            raise ValueError("need at least one producer and one consumer")
        if self.n_timeline < 1:
            raise ValueError("n_timeline must be >= 1")
        if self.duration_hours < 0:
            raise ValueError("duration_hours must be >= 0")
        if not 0 < self.analysis_window_fraction <= 1:
            raise ValueError("analysis_window_fraction must be in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "scale": self.scale,
            "n_producers": self.n_producers,
            "n_consumers": self.n_consumers,
            "zipf": self.zipf.to_dict(),
            "store": self.store.to_dict(),
            "fanout": self.fanout.to_dict(),
            "n_timeline": self.n_timeline,
            "duration_hours": self.duration_hours,
            "analysis_window_fraction": self.analysis_window_fraction,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {
            "seed", "scale", "n_producers", "n_consumers", "zipf", "store",
            "fanout", "n_timeline", "duration_hours", "analysis_window_fraction",
            "out_dir",
        }
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "zipf" in kwargs:
            kwargs["zipf"] = ZipfParams.from_dict(kwargs["zipf"])
        if "store" in kwargs:
            kwargs["store"] = StoreConfig.from_dict(kwargs["store"])
        if "fanout" in kwargs:
            kwargs["fanout"] = FanoutSettings.from_dict(kwargs["fanout"])
        return cls(**kwargs)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def with_overrides(self, seed: int | None = None,
                       out_dir: str | None = None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if out_dir is not None:
            cfg = replace(cfg, out_dir=out_dir)
        return cfg


def zero_delay_config(seed: int = 1, duration_hours: float = 9.0,
                      out_dir: str = "out") -> ExperimentConfig:
    """Consistency baseline: no replication lag, fan-out inside the post."""
    return ExperimentConfig(
        seed=seed,
        store=StoreConfig(n_replicas=3, lag=DistributionSpec("constant", 0.0)),
        fanout=FanoutSettings(mode="synchronous"),
        duration_hours=duration_hours,
        analysis_window_fraction=1.0,
        out_dir=out_dir,
    )


def anomaly_config(seed: int = 39, out_dir: str = "out") -> ExperimentConfig:
    """Desk-scale run with fan-out delays scaled into the multi-minute range.

    One update lane per tweet with a 7.5 s mean service time makes large
    fan-outs take minutes, which is what surfaces observable conflicts.
    """
    return ExperimentConfig(
        seed=seed,
        fanout=FanoutSettings(
            mode="scheduled",
            service=DistributionSpec("exponential", 7500.0),
            concurrency_cap=1,
        ),
        out_dir=out_dir,
    )


def lag_probe_config(seed: int, lag_mean_ms: float, out_dir: str = "out") -> ExperimentConfig:
    """Synchronous fan-out with a dominant replication lag, for lag sweeps."""
    return ExperimentConfig(
        seed=seed,
        store=StoreConfig(n_replicas=3, lag=DistributionSpec("exponential", lag_mean_ms)),
        fanout=FanoutSettings(mode="synchronous"),
        out_dir=out_dir,
    )


def is_zero_delay(config: ExperimentConfig) -> bool:
    """True when the configuration cannot produce any inconsistency."""
    lag = config.store.lag
    zero_lag = lag.mean_ms == 0 or (lag.kind == "constant" and lag.mean_ms == 0)
    return zero_lag and config.fanout.mode == "synchronous"
