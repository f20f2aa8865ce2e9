"""Partition- and batch-level quality metrics.

Load accounting follows the request flow of distributed sampling: a
sampled edge (u -> v) is a request served by the machine owning u. Feature
communication is counted per batch on the deduplicated remote frontier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .batching import SampledSubgraph
from .graphs import Graph
from .partition import PartitionPlan

__all__ = [
    "SummaryStats",
    "LoadReport",
    "CommReport",
    "ClusteringStats",
    "summarize",
    "edge_cut",
    "comp_load",
    "comm_load",
    "clustering_stats",
]

FEATURE_BYTES = 4  # float32 feature elements


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    variance: float  # population variance
    imbalance: float  # max / mean; 1.0 by convention when mean == 0


def summarize(values) -> SummaryStats:
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0:
        raise ValueError("summarize needs at least one value")
    mean = float(vals.mean())
    var = float(vals.var())
    imb = 1.0 if mean == 0.0 else float(vals.max() / mean)
    return SummaryStats(mean=mean, variance=var, imbalance=imb)


def edge_cut(graph: Graph, plan: PartitionPlan | np.ndarray) -> int:
    """Edges whose endpoints land in different partitions.

    Undirected graphs count each edge once (both directed slots cross
    together); directed graphs count crossing slots.
    """
    part = plan.assignment if isinstance(plan, PartitionPlan) else np.asarray(plan)
    rows = np.repeat(np.arange(graph.num_vertices, dtype=np.int64), graph.degrees)
    crossing = int((part[rows] != part[graph.col_indices]).sum())
    return crossing // 2 if graph.undirected else crossing


@dataclass
class LoadReport:
    """Per-partition sampling/training work for one collection of batches.

    local_requests[p]: sampled edges served by p for its own batches;
    remote_requests[p]: sampled edges served by p for other owners;
    sampled_vertices/sampled_edges[p]: frontier sizes and aggregation counts
    of the batches p owns. imbalance is max/mean of the combined
    per-partition work (requests served plus owned aggregations).
    """

    k: int
    sampled_vertices: np.ndarray
    sampled_edges: np.ndarray
    local_requests: np.ndarray
    remote_requests: np.ndarray

    @property
    def total_local(self) -> int:
        return int(self.local_requests.sum())

    @property
    def total_remote(self) -> int:
        return int(self.remote_requests.sum())

    @property
    def imbalance(self) -> float:
        work = self.local_requests + self.remote_requests + self.sampled_edges
        return summarize(work).imbalance

    def rows(self) -> tuple[list[str], list[list]]:
        cols = [
            "partition_id",
            "sampled_vertices",
            "sampled_edges",
            "local_requests",
            "remote_requests",
        ]
        body = [
            [p, int(self.sampled_vertices[p]), int(self.sampled_edges[p]),
             int(self.local_requests[p]), int(self.remote_requests[p])]
            for p in range(self.k)
        ]
        body.append(
            ["all", int(self.sampled_vertices.sum()), int(self.sampled_edges.sum()),
             self.total_local, self.total_remote]
        )
        return cols, body


def comp_load(
    graph: Graph, plan: PartitionPlan, subgraphs: list[SampledSubgraph]
) -> LoadReport:
    """Route every sampled edge (u -> v) to partition(u) and tally."""
    k = plan.k
    part = plan.assignment
    local = np.zeros(k, dtype=np.int64)
    remote = np.zeros(k, dtype=np.int64)
    sverts = np.zeros(k, dtype=np.int64)
    sedges = np.zeros(k, dtype=np.int64)
    for sg in subgraphs:
        owner = sg.owner
        if owner < 0 or owner >= k:
            raise ValueError(f"subgraph owner {owner} outside [0, {k})")
        sverts[owner] += sg.num_sampled_vertices
        sedges[owner] += sg.num_sampled_edges
        for block in sg.blocks:
            src_parts = part[block.src_ids]
            is_local = src_parts == owner
            local += np.bincount(src_parts[is_local], minlength=k)
            remote += np.bincount(src_parts[~is_local], minlength=k)
    return LoadReport(
        k=k,
        sampled_vertices=sverts,
        sampled_edges=sedges,
        local_requests=local,
        remote_requests=remote,
    )


@dataclass
class CommReport:
    """Feature/topology traffic each partition has to send.

    sent_vertices[p]: deduplicated remote frontier vertices served by p
    across all batches; sent_feature_bytes assumes float32 features;
    sent_subgraph_edges[p]: sampled edges p ships to other owners.
    imbalance is max/mean over sent_feature_bytes.
    """

    k: int
    feature_dim: int
    sent_vertices: np.ndarray
    sent_feature_bytes: np.ndarray
    sent_subgraph_edges: np.ndarray

    @property
    def total_bytes(self) -> int:
        return int(self.sent_feature_bytes.sum())

    @property
    def imbalance(self) -> float:
        return summarize(self.sent_feature_bytes).imbalance

    def rows(self) -> tuple[list[str], list[list]]:
        cols = ["partition_id", "sent_vertices", "sent_feature_bytes", "sent_subgraph_edges"]
        body = [
            [p, int(self.sent_vertices[p]), int(self.sent_feature_bytes[p]),
             int(self.sent_subgraph_edges[p])]
            for p in range(self.k)
        ]
        body.append(
            ["all", int(self.sent_vertices.sum()), self.total_bytes,
             int(self.sent_subgraph_edges.sum())]
        )
        return cols, body


def comm_load(
    graph: Graph,
    plan: PartitionPlan,
    subgraphs: list[SampledSubgraph],
    feature_dim: int | None = None,
) -> CommReport:
    """Count per-batch deduplicated remote frontier transfers.

    When the plan carries cache sets (vertex-streaming scheme), vertices in
    the owner's cache set are served locally: no feature bytes and no
    subgraph edges move for them.
    """
    k = plan.k
    part = plan.assignment
    d = graph.feature_dim if feature_dim is None else feature_dim
    sent_v = np.zeros(k, dtype=np.int64)
    sent_e = np.zeros(k, dtype=np.int64)
    for sg in subgraphs:
        owner = sg.owner
        if owner < 0 or owner >= k:
            raise ValueError(f"subgraph owner {owner} outside [0, {k})")
        cache = plan.cache_sets[owner] if plan.cache_sets is not None else None
        frontier = sg.input_frontier
        remote = part[frontier] != owner
        if cache is not None and remote.any():
            remote &= ~np.isin(frontier, cache)
        sent_v += np.bincount(part[frontier[remote]], minlength=k)
        for block in sg.blocks:
            srcs = block.src_ids
            rmask = part[srcs] != owner
            if cache is not None and rmask.any():
                rmask &= ~np.isin(srcs, cache)
            sent_e += np.bincount(part[srcs[rmask]], minlength=k)
    return CommReport(
        k=k,
        feature_dim=d,
        sent_vertices=sent_v,
        sent_feature_bytes=sent_v * d * FEATURE_BYTES,
        sent_subgraph_edges=sent_e,
    )


@dataclass
class ClusteringStats:
    """Local clustering coefficients, per vertex set.

    For a single set, variance is over the per-vertex coefficients; for
    several sets it is the population variance of the per-set means.
    """

    set_values: list[np.ndarray]
    set_means: np.ndarray
    mean: float
    variance: float


def clustering_stats(graph: Graph, vertex_sets=None) -> ClusteringStats:
    """Local clustering coefficient within each induced subgraph.

    A vertex with fewer than two in-set neighbors scores 0. With
    vertex_sets=None the single set is the whole graph.
    """
    if vertex_sets is None:
        vertex_sets = [np.arange(graph.num_vertices, dtype=np.int64)]
    neighbor_sets: dict[int, set] = {}

    def nset(v: int) -> set:
        s = neighbor_sets.get(v)
        if s is None:
            s = set(graph.neighbors(v).tolist())
            neighbor_sets[v] = s
        return s

    set_values = []
    for vs in vertex_sets:
        vs = np.asarray(vs, dtype=np.int64)
        members = set(vs.tolist())
        vals = np.zeros(len(vs), dtype=np.float64)
        for i, v in enumerate(vs):
            v = int(v)
            inside = [u for u in graph.neighbors(v).tolist() if u in members]
            d = len(inside)
            if d < 2:
                continue
            links = 0
            for a_idx in range(d):
                sa = nset(inside[a_idx])
                for b_idx in range(a_idx + 1, d):
                    if inside[b_idx] in sa:
                        links += 1
            vals[i] = 2.0 * links / (d * (d - 1))
        set_values.append(vals)

    if any(len(v) == 0 for v in set_values):
        raise ValueError("clustering_stats got an empty vertex set")
    set_means = np.array([float(v.mean()) for v in set_values])
    if len(set_values) == 1:
        stats = summarize(set_values[0])
        return ClusteringStats(
            set_values=set_values,
            set_means=set_means,
            mean=stats.mean,
            variance=stats.variance,
        )
    stats = summarize(set_means)
    return ClusteringStats(
        set_values=set_values,
        set_means=set_means,
        mean=stats.mean,
        variance=stats.variance,
    )
