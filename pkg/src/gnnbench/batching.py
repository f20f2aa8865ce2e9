"""Batch schedules, neighbor samplers and the adaptive batch-size controller.

Sampling draws come from per-vertex RNG streams keyed by
``(seed, epoch, batch, layer, vertex)``, so the set a vertex samples does
not depend on what order destinations are visited in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graphs import Graph, VertexMasks, TRAIN

__all__ = [
    "SamplerConfig",
    "LayerBlock",
    "SampledSubgraph",
    "AdaptiveBatchState",
    "select_batches",
    "sample_layer",
    "sample_subgraph",
    "next_batch_size",
    "dump_subgraph",
    "load_subgraph",
]


@dataclass(frozen=True)
class SamplerConfig:
    """Neighbor sampler settings.

    method: "fanout" keeps at most ``fanouts[l]`` neighbors per vertex at
    expansion step l; "rate" keeps ``ceil(rates[l] * degree)`` (at least one
    for non-isolated vertices); "hybrid" uses the fanout rule for vertices
    with degree <= degree_threshold and the rate rule above it
    (threshold defaults to the graph's mean degree). Element 0 of
    fanouts/rates applies to the first expansion away from the batch.
    """

    method: str = "fanout"
    fanouts: tuple[int, ...] = (25, 10)
    rates: tuple[float, ...] = ()
    degree_threshold: float | None = None

    def __post_init__(self):
        if self.method not in ("fanout", "rate", "hybrid"):
            raise ValueError(f"unknown sampler method {self.method!r}")
        # empty fanouts/rates mean a zero-layer expansion (frontier == batch)
        if self.method in ("fanout", "hybrid"):
            if any(f < 1 for f in self.fanouts):
                raise ValueError("fanouts must be positive ints")
        if self.method in ("rate", "hybrid"):
            if any(not (0.0 < r <= 1.0) for r in self.rates):
                raise ValueError("rates must lie in (0, 1]")
        if self.method == "hybrid" and len(self.fanouts) != len(self.rates):
            raise ValueError("hybrid needs matching fanouts and rates lengths")

    @property
    def num_layers(self) -> int:
        return len(self.fanouts) if self.method in ("fanout", "hybrid") else len(self.rates)


@dataclass
class LayerBlock:
    """Sampled edges of one expansion step, CSR over the dst list."""

    dst_ids: np.ndarray
    src_offsets: np.ndarray
    src_ids: np.ndarray

    def srcs_of(self, i: int) -> np.ndarray:
        return self.src_ids[self.src_offsets[i] : self.src_offsets[i + 1]]

    @property
    def num_edges(self) -> int:
        return int(len(self.src_ids))


@dataclass
class SampledSubgraph:
    """L-step sampled neighborhood of a batch.

    blocks[0] expands the batch itself; blocks[l+1] expands everything
    reached so far (its dst list is the union of the previous dst list and
    the previous sources). input_frontier is the sorted, deduplicated set
    of every vertex involved; those are the feature rows a trainer has to
    materialize.
    """

    batch: np.ndarray
    blocks: list[LayerBlock]
    input_frontier: np.ndarray
    num_sampled_vertices: int
    num_sampled_edges: int
    owner: int = 0


def select_batches(
    masks: VertexMasks,
    batch_size: int,
    policy: str = "random",
    cluster_plan=None,
    seed: int = 0,
    epoch: int = 0,
    graph: Graph | None = None,
) -> list[np.ndarray]:
    """Partition the train set into mini-batches for one epoch.

    "random": seeded shuffle then chunk. "cluster": fill each batch from a
    single cluster of ``cluster_plan``, spilling into the next cluster only
    to complete a batch; clusters are visited in ascending id and need to
    be at least as many as the batches. Every train vertex appears exactly
    once either way.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    train = masks.train_ids
    if len(train) == 0:
        raise ValueError("no train vertices to batch")
    rng = np.random.default_rng((seed, epoch))

    if policy == "random":
        order = train[rng.permutation(len(train))]
    elif policy == "cluster":
        if cluster_plan is None:
            if graph is None:
                raise ValueError("cluster policy needs a cluster_plan (or a graph to build one)")
            from .partition import multilevel_partition

            want = max(1, math.ceil(len(train) / batch_size))
            cluster_plan = multilevel_partition(graph, masks, want, seed=seed)
        num_batches = math.ceil(len(train) / batch_size)
        if cluster_plan.k < num_batches:
            raise ValueError(
                f"cluster policy needs at least {num_batches} clusters, plan has {cluster_plan.k}"
            )
        chunks = []
        for c in range(cluster_plan.k):
            members = np.flatnonzero(
                (cluster_plan.assignment == c) & (masks.roles == TRAIN)
            )
            if len(members):
                chunks.append(members[rng.permutation(len(members))])
        order = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    else:
        raise ValueError(f"unknown batch policy {policy!r}")

    return [order[i : i + batch_size] for i in range(0, len(order), batch_size)]


def _vertex_rng(seed: int, epoch: int, batch_id: int, layer: int, vertex: int):
    return np.random.default_rng((seed, epoch, batch_id, layer, vertex))


def _sample_without_replacement(rng, pool: np.ndarray, count: int) -> np.ndarray:
    """Partial Fisher-Yates over a copy of the pool; result sorted."""
    deg = len(pool)
    if count >= deg:
        return np.sort(pool)
    work = pool.copy()
    for i in range(count):
        j = int(rng.integers(i, deg))
        work[i], work[j] = work[j], work[i]
    return np.sort(work[:count])


def _sample_size(config: SamplerConfig, layer: int, deg: int, threshold: float) -> int:
    if deg == 0:
        return 0
    if config.method == "fanout":
        return min(config.fanouts[layer], deg)
    if config.method == "rate":
        return max(1, math.ceil(config.rates[layer] * deg))
    # hybrid: small vertices take the fanout branch, large ones the rate branch
    if deg <= threshold:
        return min(config.fanouts[layer], deg)
    return max(1, math.ceil(config.rates[layer] * deg))


def sample_layer(
    graph: Graph,
    dst_ids: np.ndarray,
    layer_index: int,
    config: SamplerConfig,
    seed: int,
    epoch: int = 0,
    batch_id: int = 0,
) -> LayerBlock:
    """Sample neighbors for one expansion step.

    Per destination: uniform without replacement among its neighbor list,
    with the per-vertex count given by the configured rule. Draws depend
    only on (seed, epoch, batch_id, layer_index, vertex), never on the
    position of the vertex inside dst_ids.
    """
    if layer_index < 0 or layer_index >= config.num_layers:
        raise ValueError(f"layer_index {layer_index} out of range")
    dst_ids = np.asarray(dst_ids, dtype=np.int64)
    threshold = (
        config.degree_threshold
        if config.degree_threshold is not None
        else graph.mean_degree()
    )
    offsets = np.zeros(len(dst_ids) + 1, dtype=np.int64)
    srcs: list[np.ndarray] = []
    for i, v in enumerate(dst_ids):
        v = int(v)
        row = graph.neighbors(v)
        size = _sample_size(config, layer_index, len(row), threshold)
        if size:
            rng = _vertex_rng(seed, epoch, batch_id, layer_index, v)
            srcs.append(_sample_without_replacement(rng, row, size))
        offsets[i + 1] = offsets[i] + size
    src_ids = np.concatenate(srcs) if srcs else np.zeros(0, dtype=np.int64)
    return LayerBlock(dst_ids=dst_ids, src_offsets=offsets, src_ids=src_ids)


def sample_subgraph(
    graph: Graph,
    batch: np.ndarray,
    config: SamplerConfig,
    seed: int,
    epoch: int = 0,
    batch_id: int = 0,
    owner: int = 0,
) -> SampledSubgraph:
    """Expand a batch through all configured layers.

    The expansion is cumulative: step l samples for every vertex reached so
    far, so a trainer has every intermediate representation it needs. With
    zero layers the frontier is just the batch.
    """
    batch = np.asarray(batch, dtype=np.int64)
    if len(batch) == 0:
        raise ValueError("batch must not be empty")
    blocks: list[LayerBlock] = []
    dst = batch
    total_edges = 0
    for layer in range(config.num_layers):
        block = sample_layer(graph, dst, layer, config, seed, epoch, batch_id)
        blocks.append(block)
        total_edges += block.num_edges
        dst = np.union1d(dst, block.src_ids)
    frontier = np.unique(dst)
    return SampledSubgraph(
        batch=batch,
        blocks=blocks,
        input_frontier=frontier,
        num_sampled_vertices=int(len(frontier)),
        num_sampled_edges=total_edges,
        owner=owner,
    )


@dataclass
class AdaptiveBatchState:
    """Plateau-triggered batch-size growth; never shrinks, capped at max.

    After ``patience`` consecutive epochs without the validation accuracy
    improving by more than ``min_improvement``, the size multiplies by
    ``growth_factor``.
    """

    initial_size: int = 512
    max_size: int = 8192
    growth_factor: float = 2.0
    patience: int = 3
    min_improvement: float = 1e-4
    current_size: int = field(init=False)
    best_val_acc: float = field(default=-math.inf, init=False)
    stagnant_epochs: int = field(default=0, init=False)

    def __post_init__(self):
        if self.initial_size < 1 or self.max_size < self.initial_size:
            raise ValueError("need 1 <= initial_size <= max_size")
        if self.growth_factor <= 1:
            raise ValueError("growth_factor must exceed 1")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        self.current_size = self.initial_size


def next_batch_size(state: AdaptiveBatchState, epoch_val_acc: float) -> int:
    """Feed one epoch's validation accuracy; returns the size to use next."""
    if epoch_val_acc > state.best_val_acc + state.min_improvement:
        state.best_val_acc = epoch_val_acc
        state.stagnant_epochs = 0
    else:
        state.stagnant_epochs += 1
        if state.stagnant_epochs >= state.patience:
            grown = int(state.current_size * state.growth_factor)
            state.current_size = min(max(grown, state.current_size + 1), state.max_size)
            state.stagnant_epochs = 0
    return state.current_size


# ---------------------------------------------------------------------------
# Subgraph dump format
# ---------------------------------------------------------------------------


def dump_subgraph(sg: SampledSubgraph, path) -> None:
    """Line-oriented text dump: batch, sorted frontier, one 'dst: srcs' line
    per destination per layer."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# subgraph layers={len(sg.blocks)} owner={sg.owner}\n")
        fh.write("batch " + " ".join(str(int(v)) for v in sg.batch) + "\n")
        fh.write("frontier " + " ".join(str(int(v)) for v in sg.input_frontier) + "\n")
        for l, block in enumerate(sg.blocks):
            fh.write(f"layer {l}\n")
            for i, v in enumerate(block.dst_ids):
                srcs = " ".join(str(int(u)) for u in block.srcs_of(i))
                fh.write(f"{int(v)}: {srcs}\n")


def load_subgraph(path) -> SampledSubgraph:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    owner = 0
    batch = None
    frontier = None
    blocks: list[LayerBlock] = []
    cur_dst: list[int] = []
    cur_offsets: list[int] = [0]
    cur_srcs: list[int] = []

    def flush():
        blocks.append(
            LayerBlock(
                dst_ids=np.array(cur_dst, dtype=np.int64),
                src_offsets=np.array(cur_offsets, dtype=np.int64),
                src_ids=np.array(cur_srcs, dtype=np.int64),
            )
        )

    in_layer = False
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for token in line[1:].split():
                if token.startswith("owner="):
                    owner = int(token.split("=", 1)[1])
            continue
        if line.startswith("batch "):
            batch = np.array([int(t) for t in line.split()[1:]], dtype=np.int64)
            continue
        if line.startswith("frontier "):
            frontier = np.array([int(t) for t in line.split()[1:]], dtype=np.int64)
            continue
        if line.startswith("layer "):
            if in_layer:
                flush()
                cur_dst, cur_offsets, cur_srcs = [], [0], []
            in_layer = True
            continue
        head, _, tail = line.partition(":")
        cur_dst.append(int(head))
        row = [int(t) for t in tail.split()]
        cur_srcs.extend(row)
        cur_offsets.append(cur_offsets[-1] + len(row))
    if in_layer:
        flush()
    if batch is None or frontier is None:
        raise ValueError("subgraph dump missing batch or frontier line")
    total_edges = sum(b.num_edges for b in blocks)
    return SampledSubgraph(
        batch=batch,
        blocks=blocks,
        input_frontier=frontier,
        num_sampled_vertices=int(len(frontier)),
        num_sampled_edges=total_edges,
        owner=owner,
    )
