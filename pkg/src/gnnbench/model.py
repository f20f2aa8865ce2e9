"""Two-layer GCN with hand-written gradients, trained on sampled subgraphs.

Layer rule: aggregate = mean over sampled in-neighbors (empty
neighborhoods aggregate to a zero vector, no implicit self-loops),
combine = elementwise sum with the vertex's own representation, then a
linear map; ReLU after the first layer, identity before the softmax.
All math runs in float64 so finite-difference checks are meaningful.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .batching import (
    AdaptiveBatchState,
    LayerBlock,
    SamplerConfig,
    SampledSubgraph,
    next_batch_size,
    sample_subgraph,
    select_batches,
)
from .graphs import Graph, VertexMasks

__all__ = [
    "GcnParams",
    "TrainConfig",
    "TrainLog",
    "GradCheckResult",
    "gcn_forward",
    "gcn_forward_full",
    "gcn_backward",
    "grad_check",
    "relative_error",
    "train",
]


@dataclass
class GcnParams:
    """Weights of the two linear maps; float64 throughout."""

    w1: np.ndarray  # (feature_dim, hidden)
    w2: np.ndarray  # (hidden, num_classes)

    @classmethod
    def init(cls, feature_dim: int, hidden: int, num_classes: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        s1 = math.sqrt(2.0 / (feature_dim + hidden))
        s2 = math.sqrt(2.0 / (hidden + num_classes))
        return cls(
            w1=rng.normal(0.0, s1, size=(feature_dim, hidden)),
            w2=rng.normal(0.0, s2, size=(hidden, num_classes)),
        )

    def copy(self) -> "GcnParams":
        return GcnParams(w1=self.w1.copy(), w2=self.w2.copy())


def _full_blocks(graph: Graph) -> list[LayerBlock]:
    ids = np.arange(graph.num_vertices, dtype=np.int64)
    block = LayerBlock(
        dst_ids=ids, src_offsets=graph.row_offsets, src_ids=graph.col_indices
    )
    return [block, block]


def _mean_aggregate(block: LayerBlock, h: np.ndarray, local) -> tuple:
    """Mean of sampled-source rows per destination, zero when empty.

    Returns (agg over full frontier rows, per-edge dst positions, counts)
    so the backward pass can reuse the scatter pattern.
    """
    dst_local = local(block.dst_ids)
    counts = np.diff(block.src_offsets)
    src_local = local(block.src_ids)
    agg = np.zeros_like(h)
    edge_dst = np.repeat(dst_local, counts)
    np.add.at(agg, edge_dst, h[src_local])
    nonzero = counts > 0
    agg[dst_local[nonzero]] /= counts[nonzero][:, None]
    return agg, edge_dst, src_local, dst_local, counts


def _forward(
    x: np.ndarray, blocks: list[LayerBlock], params: GcnParams, local
) -> dict:
    """Shared forward over an arbitrary block pair; returns a cache.

    blocks[1] (the wider expansion) feeds the first GNN layer, blocks[0]
    (the batch expansion) feeds the second.
    """
    agg1, e_dst1, e_src1, dst1, cnt1 = _mean_aggregate(blocks[1], x, local)
    comb1 = x + agg1
    z1 = comb1 @ params.w1
    h1 = np.maximum(z1, 0.0)
    agg2, e_dst2, e_src2, dst2, cnt2 = _mean_aggregate(blocks[0], h1, local)
    comb2 = h1 + agg2
    logits = comb2 @ params.w2
    return {
        "x": x, "comb1": comb1, "z1": z1, "h1": h1, "comb2": comb2,
        "logits": logits,
        "e1": (e_dst1, e_src1, dst1, cnt1),
        "e2": (e_dst2, e_src2, dst2, cnt2),
    }


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    p = _softmax(logits)
    return float(-np.log(p[np.arange(len(labels)), labels] + 1e-300).mean())


def accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    if len(labels) == 0:
        return 0.0
    return float((logits.argmax(axis=1) == labels).mean())


def _local_mapper(frontier: np.ndarray):
    def local(ids: np.ndarray) -> np.ndarray:
        return np.searchsorted(frontier, ids)

    return local


def gcn_forward(
    graph: Graph, subgraph: SampledSubgraph, params: GcnParams
) -> tuple[np.ndarray, dict]:
    """Logits for the batch vertices of a two-layer sampled subgraph."""
    if len(subgraph.blocks) != 2:
        raise ValueError("gcn_forward expects a 2-layer subgraph")
    frontier = subgraph.input_frontier
    local = _local_mapper(frontier)
    x = graph.features[frontier].astype(np.float64)
    cache = _forward(x, subgraph.blocks, params, local)
    batch_local = local(subgraph.batch)
    cache["batch_local"] = batch_local
    cache["frontier"] = frontier
    return cache["logits"][batch_local], cache


def gcn_forward_full(graph: Graph, params: GcnParams) -> tuple[np.ndarray, dict]:
    """Deterministic full-neighborhood forward over every vertex."""
    blocks = _full_blocks(graph)
    local = lambda ids: ids  # noqa: E731 - identity map on global ids
    x = graph.features.astype(np.float64)
    cache = _forward(x, blocks, params, local)
    cache["batch_local"] = np.arange(graph.num_vertices, dtype=np.int64)
    return cache["logits"], cache


def _backward(cache: dict, params: GcnParams, labels: np.ndarray,
              batch_local: np.ndarray) -> tuple[float, GcnParams]:
    logits = cache["logits"][batch_local]
    b = len(batch_local)
    p = _softmax(logits)
    loss = float(-np.log(p[np.arange(b), labels] + 1e-300).mean())
    dlogits = p
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b

    comb2 = cache["comb2"]
    dcomb2_rows = dlogits @ params.w2.T
    gw2 = comb2[batch_local].T @ dlogits

    e_dst2, e_src2, dst2, cnt2 = cache["e2"]
    # scatter mean-aggregation gradients back to the sources; only the
    # destinations actually inside the batch carry gradient (np.add.at so
    # a vertex listed twice in the batch counts twice)
    dcomb2_full = np.zeros_like(cache["h1"])
    np.add.at(dcomb2_full, batch_local, dcomb2_rows)
    dh1 = dcomb2_full.copy()
    safe_cnt = np.maximum(cnt2, 1)
    dst_scale = np.zeros(cache["h1"].shape[0])
    dst_scale[dst2] = 1.0 / safe_cnt
    contrib = dcomb2_full[e_dst2] * dst_scale[e_dst2][:, None]
    np.add.at(dh1, e_src2, contrib)

    dz1 = dh1 * (cache["z1"] > 0)
    gw1 = cache["comb1"].T @ dz1
    return loss, GcnParams(w1=gw1, w2=gw2)


def gcn_backward(
    graph: Graph, subgraph: SampledSubgraph, params: GcnParams
) -> tuple[float, GcnParams]:
    """Loss and parameter gradients for one sampled batch."""
    _, cache = gcn_forward(graph, subgraph, params)
    labels = graph.labels[subgraph.batch]
    return _backward(cache, params, labels, cache["batch_local"])


def gcn_backward_full(
    graph: Graph, params: GcnParams, batch_ids: np.ndarray
) -> tuple[float, GcnParams]:
    """Full-neighborhood loss/gradients with the loss over batch_ids."""
    _, cache = gcn_forward_full(graph, params)
    labels = graph.labels[batch_ids]
    return _backward(cache, params, labels, np.asarray(batch_ids, dtype=np.int64))


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Max elementwise |a-b| / max(|a|, |b|, 1e-8)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float((np.abs(a - b) / denom).max())


@dataclass
class GradCheckResult:
    max_rel_error: float
    w1_error: float
    w2_error: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < 1e-4


def grad_check(
    graph: Graph,
    params: GcnParams | None = None,
    eps: float = 1e-4,
    entries_per_matrix: int = 12,
    seed: int = 0,
    batch_ids: np.ndarray | None = None,
) -> GradCheckResult:
    """Central finite differences on a seeded random subset of parameters.

    Probes of w1 whose +-eps step would move some pre-activation across
    the ReLU kink are skipped: there the loss is not differentiable in
    that entry and the central difference says nothing about the
    analytic gradient. Perturbing w1[i, j] shifts z1[:, j] by exactly
    eps * comb1[:, i], so the exclusion window is exact.
    """
    if params is None:
        params = GcnParams.init(graph.feature_dim, 8, graph.num_classes, seed=seed)
    if batch_ids is None:
        batch_ids = np.arange(graph.num_vertices, dtype=np.int64)
    rng = np.random.default_rng(seed)
    _, cache0 = gcn_forward_full(graph, params)
    _, analytic = gcn_backward_full(graph, params, batch_ids)

    def loss_at(p: GcnParams) -> float:
        logits, _ = gcn_forward_full(graph, p)
        return cross_entropy(logits[batch_ids], graph.labels[batch_ids])

    def kink_free(name: str, i: int, j: int) -> bool:
        if name != "w1":
            return True
        window = 4.0 * eps * np.abs(cache0["comb1"][:, i])
        return bool(np.all(np.abs(cache0["z1"][:, j]) > window))

    errors = {"w1": 0.0, "w2": 0.0}
    for name in ("w1", "w2"):
        mat = getattr(params, name)
        grad = getattr(analytic, name)
        k = min(entries_per_matrix, mat.size)
        picked = []
        for idx in rng.permutation(mat.size):
            i, j = np.unravel_index(idx, mat.shape)
            if kink_free(name, int(i), int(j)):
                picked.append(int(idx))
                if len(picked) == k:
                    break
        flat = picked if picked else rng.choice(mat.size, size=k, replace=False)
        for idx in flat:
            i, j = np.unravel_index(idx, mat.shape)
            probe = params.copy()
            getattr(probe, name)[i, j] += eps
            hi = loss_at(probe)
            getattr(probe, name)[i, j] -= 2 * eps
            lo = loss_at(probe)
            numeric = (hi - lo) / (2 * eps)
            err = relative_error(np.array([grad[i, j]]), np.array([numeric]))
            errors[name] = max(errors[name], err)
    return GradCheckResult(
        max_rel_error=max(errors.values()),
        w1_error=errors["w1"],
        w2_error=errors["w2"],
    )


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 20
    lr: float = 0.1
    optimizer: str = "sgd"  # or "adam"
    batch_size: int = 32
    batch_policy: str = "random"
    cluster_plan: object = None
    sampler: SamplerConfig = field(default_factory=lambda: SamplerConfig(fanouts=(25, 10)))
    adaptive: AdaptiveBatchState | None = None
    hidden: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.sampler.num_layers != 2:
            raise ValueError("the trainer is a 2-layer model; sampler must have 2 layers")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainLog:
    """Per-epoch training record."""

    epochs: list[int] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    batch_size: list[int] = field(default_factory=list)
    updates: list[int] = field(default_factory=list)
    sampled_vertices: list[int] = field(default_factory=list)
    sampled_edges: list[int] = field(default_factory=list)
    time_s: list[float] = field(default_factory=list)

    COLUMNS = (
        "epoch", "loss", "val_acc", "batch_size", "updates",
        "sampled_vertices", "sampled_edges", "time_s",
    )

    def rows(self) -> list[list]:
        return [
            [self.epochs[i], self.loss[i], self.val_acc[i], self.batch_size[i],
             self.updates[i], self.sampled_vertices[i], self.sampled_edges[i],
             self.time_s[i]]
            for i in range(len(self.epochs))
        ]

    @property
    def total_updates(self) -> int:
        return int(sum(self.updates))

    @property
    def total_sampled_edges(self) -> int:
        return int(sum(self.sampled_edges))

    def updates_to_reach(self, target_val_acc: float) -> int | None:
        """Cumulative updates when val accuracy first reaches the target."""
        done = 0
        for i in range(len(self.epochs)):
            done += self.updates[i]
            if self.val_acc[i] >= target_val_acc:
                return done
        return None


class _Adam:
    def __init__(self, params: GcnParams, lr: float,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = GcnParams(w1=np.zeros_like(params.w1), w2=np.zeros_like(params.w2))
        self.v = GcnParams(w1=np.zeros_like(params.w1), w2=np.zeros_like(params.w2))

    def step(self, params: GcnParams, grads: GcnParams) -> None:
        self.t += 1
        for name in ("w1", "w2"):
            g = getattr(grads, name)
            m = getattr(self.m, name)
            v = getattr(self.v, name)
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            mhat = m / (1 - self.b1 ** self.t)
            vhat = v / (1 - self.b2 ** self.t)
            getattr(params, name)[...] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def train(graph: Graph, masks: VertexMasks, config: TrainConfig) -> TrainLog:
    """Mini-batch training with per-epoch full-graph validation.

    Deterministic given (graph, masks, config): schedules reseed per epoch
    and sampling streams are per-vertex keyed, so the log is reproducible.
    """
    params = GcnParams.init(
        graph.feature_dim, config.hidden, graph.num_classes, seed=config.seed
    )
    adam = _Adam(params, config.lr) if config.optimizer == "adam" else None
    log = TrainLog()
    val_ids = masks.val_ids

    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        bs = (
            config.adaptive.current_size
            if config.adaptive is not None
            else config.batch_size
        )
        batches = select_batches(
            masks,
            bs,
            policy=config.batch_policy,
            cluster_plan=config.cluster_plan,
            seed=config.seed,
            epoch=epoch,
            graph=graph,
        )
        loss_sum = 0.0
        sv = se = 0
        for b, batch in enumerate(batches):
            sg = sample_subgraph(
                graph, batch, config.sampler, config.seed, epoch=epoch, batch_id=b
            )
            loss, grads = gcn_backward(graph, sg, params)
            if adam is not None:
                adam.step(params, grads)
            else:
                params.w1 -= config.lr * grads.w1
                params.w2 -= config.lr * grads.w2
            loss_sum += loss
            sv += sg.num_sampled_vertices
            se += sg.num_sampled_edges

        logits, _ = gcn_forward_full(graph, params)
        vacc = accuracy(logits[val_ids], graph.labels[val_ids])
        log.epochs.append(epoch)
        log.loss.append(loss_sum / len(batches))
        log.val_acc.append(vacc)
        log.batch_size.append(bs)
        log.updates.append(len(batches))
        log.sampled_vertices.append(sv)
        log.sampled_edges.append(se)
        log.time_s.append(time.perf_counter() - t0)
        if config.adaptive is not None:
            next_batch_size(config.adaptive, vacc)
    return log
