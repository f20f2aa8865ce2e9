"""Desk-scale workbench for data management in sample-based GNN training.

Small, seeded, NumPy-backed reimplementations of the moving parts that
matter when mini-batch GNN training meets a partitioned graph: graph
loading and generation, balance-constrained partitioners, neighborhood
samplers, feature caches, transfer and pipeline models, and a reference
two-layer GCN with a hand-written backward pass.
"""

from .experiment import (
    OUTPUT_ROOT_ENV,
    ConfigError,
    ExperimentConfig,
    parse_config,
    run_experiment,
)
from .batching import (
    AdaptiveBatchState,
    LayerBlock,
    SampledSubgraph,
    SamplerConfig,
    next_batch_size,
    sample_layer,
    sample_subgraph,
    select_batches,
)
from .graphs import (
    Graph,
    GraphFormatError,
    GraphGenSpec,
    VertexMasks,
    generate_graph,
    load_graph,
    load_masks,
    save_masks,
    split_masks,
)
from .metrics import (
    clustering_stats,
    comm_load,
    comp_load,
    edge_cut,
    summarize,
)
from .model import (
    GcnParams,
    TrainConfig,
    TrainLog,
    gcn_backward,
    gcn_backward_full,
    gcn_forward,
    gcn_forward_full,
    grad_check,
    train,
)
from .partition import (
    BalanceConstraints,
    InfeasibleConstraintError,
    PartitionPlan,
    StreamConfig,
    hash_partition,
    load_plan,
    multilevel_partition,
    save_plan,
    stream_block_partition,
    stream_vertex_partition,
)
from .transfer import (
    CachePolicyConfig,
    PipelineCostModel,
    block_activity,
    build_cache,
    estimate_stage_costs,
    simulate_pipeline,
    simulate_transfer,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveBatchState",
    "BalanceConstraints",
    "CachePolicyConfig",
    "ConfigError",
    "ExperimentConfig",
    "GcnParams",
    "Graph",
    "GraphFormatError",
    "GraphGenSpec",
    "InfeasibleConstraintError",
    "LayerBlock",
    "OUTPUT_ROOT_ENV",
    "PartitionPlan",
    "PipelineCostModel",
    "SampledSubgraph",
    "SamplerConfig",
    "StreamConfig",
    "TrainConfig",
    "TrainLog",
    "VertexMasks",
    "block_activity",
    "build_cache",
    "clustering_stats",
    "comm_load",
    "comp_load",
    "edge_cut",
    "estimate_stage_costs",
    "gcn_backward",
    "gcn_backward_full",
    "gcn_forward",
    "gcn_forward_full",
    "generate_graph",
    "grad_check",
    "hash_partition",
    "load_graph",
    "load_masks",
    "load_plan",
    "multilevel_partition",
    "next_batch_size",
    "parse_config",
    "run_experiment",
    "sample_layer",
    "sample_subgraph",
    "save_masks",
    "save_plan",
    "select_batches",
    "simulate_pipeline",
    "simulate_transfer",
    "split_masks",
    "stream_block_partition",
    "stream_vertex_partition",
    "summarize",
    "train",
]
