"""feedsim: deterministic feed-following simulator with an
observable-inconsistency detector and analytics pipeline."""

from .analytics import (
    AnalyticsReport,
    CorrelationStudy,
    GapHistogram,
    GapSummary,
    attribute_to_producers,
    build_report,
    correlation_studies,
    emit_report,
    gap_histogram,
    inconsistency_rate,
    summarize_gaps,
)
from .app import (
    FanoutSettings,
    FeedApp,
    RunArtifacts,
    TimelineResponse,
    TraceStats,
    TweetEvent,
    run_experiment,
)
from .config import (
    ExperimentConfig,
    anomaly_config,
    lag_probe_config,
    zero_delay_config,
)
from .detect import (
    ConflictRecord,
    ConflictType,
    ConsistentTimeline,
    DetectionResult,
    IntegrityError,
    Position,
    TweetIndex,
    WitnessIndex,
    build_witness_index,
    classify,
    consistent_timeline,
    detect_all,
    find_missing,
    inconsistency_time_gap,
)
from .netgen import (
    FollowingNetwork,
    InfeasibleParametersError,
    ValidationReport,
    WorkloadProfile,
    ZipfPair,
    ZipfParams,
    ZipfSampler,
    build_network,
    build_profile,
    load_network_profile,
    save_network_profile,
    validate_profile,
    zipf_sample,
)
from .sim import (
    EPOCH,
    DistributionSpec,
    EventKind,
    EventLoop,
    RngStreams,
    SimEvent,
    from_iso,
    to_iso,
)
from .store import CasResult, ReplicatedStore, StoreConfig, WriteAck

__version__ = "0.1.0"
