"""dynpart: chunk-based dynamic graph partitioning and training simulation."""

from .graphstore import (
    DynamicGraph,
    GraphFormatError,
    InfeasibleSpecError,
    LengthDistribution,
    SyntheticSpec,
    UnknownVertexError,
    VertexInstance,
    generate,
    load_graph,
    save_graph,
)
from .costmodel import (
    ChunkStats,
    CostCoeffs,
    MessageSet,
    ModelProfile,
    Predictor,
    TemporalFanout,
    edge_traffic,
    mape,
    train_predictor,
    true_cost,
)
from .partition import (
    Chunk,
    ChunkGraph,
    default_size_cap,
    init_labels,
    partition_pss,
    partition_pss_ts,
    partition_pts,
    propagate,
)
from .assign import Assignment, assign, lambda_divergence
from .fusion import (
    GruCell,
    MemCoeffs,
    PackedBatch,
    gru_forward,
    gru_forward_masked,
    pack_sequences,
    padding_waste,
    plan_spatial_fusion,
)
from .stale import (
    DriftSpec,
    DriftStream,
    EmbeddingCache,
    EpochLossTrace,
    StaleConfig,
    StaleMode,
    filter_transmissions,
    max_cache_gap,
    threshold,
)
from .sim import (
    ClusterSpec,
    EpochReport,
    Plan,
    build_plan,
    compare_methods,
    run_epochs,
    simulate_epoch,
)

__version__ = "0.1.0"
