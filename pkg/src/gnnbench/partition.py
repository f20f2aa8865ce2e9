"""Graph partitioners: hash, multilevel, and the two streaming schemes.

The multilevel path (heavy-edge matching coarsening, greedy region growing,
boundary refinement with rollback) is written here rather than delegated to
an external partitioning library: the balance vectors are multi-dimensional
(vertex count plus optional train/degree/val/test dimensions) and the
refinement has to respect all of them at once.

The streaming partitioners are deliberately sequential: they assign one
train vertex (or one BFS block) at a time and score candidates with set
intersections, which is also why they are the slowest of the family on a
wall clock.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graphs import Graph, VertexMasks, TRAIN, VAL, TEST

__all__ = [
    "BalanceConstraints",
    "StreamConfig",
    "PartitionPlan",
    "InfeasibleConstraintError",
    "hash_partition",
    "multilevel_partition",
    "stream_vertex_partition",
    "stream_block_partition",
    "save_plan",
    "load_plan",
]


class InfeasibleConstraintError(ValueError):
    """Balance constraints cannot be satisfied for this input."""


@dataclass(frozen=True)
class BalanceConstraints:
    """Which balance dimensions the multilevel partitioner enforces.

    Vertex count is always balanced. The presets mirror the usual ladder:
    ``metis_v`` balances train vertices, ``metis_ve`` adds degree sums,
    ``metis_vet`` adds val/test vertices on top.
    """

    balance_train: bool = False
    balance_degree: bool = False
    balance_val_test: bool = False
    tolerance: float = 0.05

    @classmethod
    def metis_v(cls, tolerance: float = 0.05) -> "BalanceConstraints":
        return cls(balance_train=True, tolerance=tolerance)

    @classmethod
    def metis_ve(cls, tolerance: float = 0.05) -> "BalanceConstraints":
        return cls(balance_train=True, balance_degree=True, tolerance=tolerance)

    @classmethod
    def metis_vet(cls, tolerance: float = 0.05) -> "BalanceConstraints":
        return cls(
            balance_train=True,
            balance_degree=True,
            balance_val_test=True,
            tolerance=tolerance,
        )

    def dimension_names(self) -> list[str]:
        names = ["vertices"]
        if self.balance_train:
            names.append("train")
        if self.balance_degree:
            names.append("degree")
        if self.balance_val_test:
            names.append("val_test")
        return names


@dataclass(frozen=True)
class StreamConfig:
    """Knobs for the streaming partitioners.

    hop_cache_depth is the L of the vertex-streaming scheme's cache: each
    partition records the L-hop neighborhood of its train vertices.
    block_size bounds the BFS blocks of the block-streaming scheme.
    """

    hop_cache_depth: int = 1
    block_size: int = 64


@dataclass
class PartitionPlan:
    """A k-way vertex assignment plus per-partition bookkeeping.

    ``edge_counts[p]`` is the number of adjacency slots whose row vertex
    lives in partition p (the degree sum of p's vertices). ``cache_sets``
    is only populated by the vertex-streaming scheme.
    """

    assignment: np.ndarray
    k: int
    method: str
    seed: int | None
    vertex_counts: np.ndarray = field(default=None)
    edge_counts: np.ndarray = field(default=None)
    train_counts: np.ndarray = field(default=None)
    val_counts: np.ndarray = field(default=None)
    test_counts: np.ndarray = field(default=None)
    constraints: BalanceConstraints | None = None
    cache_sets: list[np.ndarray] | None = None

    @classmethod
    def from_assignment(
        cls,
        graph: Graph,
        masks: VertexMasks | None,
        assignment: np.ndarray,
        k: int,
        method: str,
        seed: int | None,
        constraints: BalanceConstraints | None = None,
        cache_sets: list[np.ndarray] | None = None,
    ) -> "PartitionPlan":
        assignment = np.asarray(assignment, dtype=np.int64)
        if assignment.shape != (graph.num_vertices,):
            raise ValueError("assignment must have one entry per vertex")
        if len(assignment) and (assignment.min() < 0 or assignment.max() >= k):
            raise ValueError("assignment ids must lie in [0, k)")
        degrees = graph.degrees
        vcounts = np.bincount(assignment, minlength=k)
        ecounts = np.bincount(assignment, weights=degrees, minlength=k).astype(np.int64)
        if masks is not None:
            roles = masks.roles
            tcounts = np.bincount(assignment[roles == TRAIN], minlength=k)
            vacounts = np.bincount(assignment[roles == VAL], minlength=k)
            tecounts = np.bincount(assignment[roles == TEST], minlength=k)
        else:
            tcounts = np.zeros(k, dtype=np.int64)
            vacounts = np.zeros(k, dtype=np.int64)
            tecounts = np.zeros(k, dtype=np.int64)
        return cls(
            assignment=assignment,
            k=k,
            method=method,
            seed=seed,
            vertex_counts=vcounts,
            edge_counts=ecounts,
            train_counts=tcounts,
            val_counts=vacounts,
            test_counts=tecounts,
            constraints=constraints,
            cache_sets=cache_sets,
        )

    def partition_vertices(self, p: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == p)


def _check_k(graph: Graph, k: int) -> None:
    if k < 1 or k > graph.num_vertices:
        raise ValueError(f"k must lie in [1, num_vertices], got k={k}")


# ---------------------------------------------------------------------------
# Hash partitioner
# ---------------------------------------------------------------------------


def hash_partition(
    graph: Graph, k: int, seed: int | None = 0, mode: str = "round_robin"
) -> PartitionPlan:
    """Topology-oblivious assignment.

    ``round_robin`` (default) shuffles vertex ids with the seed and deals
    them out cyclically, so per-partition counts differ by at most one;
    ``seed=None`` skips the shuffle and deals raw ids. ``random`` assigns
    each vertex independently uniformly and carries no balance guarantee.
    """
    _check_k(graph, k)
    n = graph.num_vertices
    if mode == "round_robin":
        order = np.arange(n) if seed is None else np.random.default_rng(seed).permutation(n)
        assignment = np.empty(n, dtype=np.int64)
        assignment[order] = np.arange(n, dtype=np.int64) % k
    elif mode == "random":
        rng = np.random.default_rng(0 if seed is None else seed)
        assignment = rng.integers(0, k, size=n, dtype=np.int64)
    else:
        raise ValueError(f"unknown hash mode {mode!r}")
    return PartitionPlan.from_assignment(
        graph, None, assignment, k, f"hash[{mode}]", seed
    )


# ---------------------------------------------------------------------------
# Multilevel partitioner
# ---------------------------------------------------------------------------


def _vertex_weights(
    graph: Graph, masks: VertexMasks | None, constraints: BalanceConstraints
) -> np.ndarray:
    n = graph.num_vertices
    cols = [np.ones(n, dtype=np.int64)]
    if constraints.balance_train or constraints.balance_val_test:
        if masks is None:
            raise ValueError("train/val/test balancing needs masks")
    if constraints.balance_train:
        cols.append((masks.roles == TRAIN).astype(np.int64))
    if constraints.balance_degree:
        cols.append(graph.degrees.astype(np.int64))
    if constraints.balance_val_test:
        # one combined dimension; the flag balances evaluation work overall
        cols.append(np.isin(masks.roles, (VAL, TEST)).astype(np.int64))
    return np.stack(cols, axis=1)


def _caps(totals: np.ndarray, k: int, tol: float) -> np.ndarray:
    ceil_share = -(-totals // k)
    relaxed = np.floor((1.0 + tol) * totals / k).astype(np.int64)
    return np.maximum(ceil_share, relaxed)


def _coarsen_once(indptr, indices, eweights, vweights, rng):
    """One heavy-edge matching + contraction step."""
    n = len(indptr) - 1
    match = np.full(n, -1, dtype=np.int64)
    order = rng.permutation(n)
    for v in order:
        if match[v] >= 0:
            continue
        lo, hi = indptr[v], indptr[v + 1]
        cand = indices[lo:hi]
        wts = eweights[lo:hi]
        free = match[cand] < 0
        cand, wts = cand[free], wts[free]
        if len(cand) == 0:
            match[v] = v
            continue
        # heaviest edge wins, ties to the lowest neighbor id
        best = cand[np.lexsort((cand, -wts))[0]]
        match[v] = best
        match[best] = v

    cid = np.full(n, -1, dtype=np.int64)
    nc = 0
    for v in range(n):
        if cid[v] < 0:
            cid[v] = nc
            u = match[v]
            if u != v:
                cid[u] = nc
            nc += 1

    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    cu, cv = cid[rows], cid[indices]
    keep = cu != cv
    key = cu[keep] * nc + cv[keep]
    uniq, inv = np.unique(key, return_inverse=True)
    cw = np.zeros(len(uniq), dtype=np.int64)
    np.add.at(cw, inv, eweights[keep])
    crows = uniq // nc
    ccols = uniq % nc
    cindptr = np.zeros(nc + 1, dtype=np.int64)
    np.cumsum(np.bincount(crows, minlength=nc), out=cindptr[1:])
    cvw = np.zeros((nc, vweights.shape[1]), dtype=np.int64)
    np.add.at(cvw, cid, vweights)
    return cindptr, ccols.astype(np.int64), cw, cvw, cid


def _cut_weight(indptr, indices, eweights, part) -> int:
    rows = np.repeat(np.arange(len(indptr) - 1, dtype=np.int64), np.diff(indptr))
    cross = part[rows] != part[indices]
    return int(eweights[cross].sum()) // 2


def _violation(loads, caps) -> float:
    denom = np.maximum(caps, 1)
    return float(np.maximum(0, loads - caps[None, :]).sum(axis=0).astype(float) @ (1.0 / denom))


def _conn_weights(indptr, indices, eweights, part, v, k) -> np.ndarray:
    lo, hi = indptr[v], indptr[v + 1]
    owner = part[indices[lo:hi]]
    placed = owner >= 0  # region growing leaves vertices unassigned (-1)
    return np.bincount(
        owner[placed], weights=eweights[lo:hi][placed], minlength=k
    )


def _region_grow(indptr, indices, eweights, vweights, k, caps, rng):
    """Greedy region growing from k random seeds, caps as soft limits."""
    n = len(indptr) - 1
    part = np.full(n, -1, dtype=np.int64)
    loads = np.zeros((k, vweights.shape[1]), dtype=np.int64)
    perm = rng.permutation(n)
    for p in range(k):
        v = int(perm[p])
        part[v] = p
        loads[p] += vweights[v]
    for v in perm[k:]:
        v = int(v)
        conn = _conn_weights(indptr, indices, eweights, part, v, k)
        fits = np.all(loads + vweights[v][None, :] <= caps[None, :], axis=1)
        if fits.any():
            # strongest connection among partitions with room, ties low index
            masked = np.where(fits, conn, -1.0)
            p = int(np.argmax(masked))
        else:
            # nothing fits: smallest relative unit load, repaired later
            p = int(np.argmin(loads[:, 0]))
        part[v] = p
        loads[p] += vweights[v]
    return part, loads


def _fm_refine(indptr, indices, eweights, vweights, part, loads, k, caps, max_passes=8):
    """FM-style refinement with tentative moves and best-prefix rollback.

    Each pass moves every vertex at most once, always taking the currently
    best-gain move (negative gains allowed), then rewinds to the prefix
    with the lexicographically best (violation, cut). Intended for small
    levels; cost is O(n^2 k) per pass.
    """
    n = len(indptr) - 1
    slack = vweights.max(axis=0)
    for _ in range(max_passes):
        start_cut = _cut_weight(indptr, indices, eweights, part)
        start_state = (_violation(loads, caps), start_cut)
        locked = np.zeros(n, dtype=bool)
        moves: list[tuple[int, int, int]] = []  # (vertex, from, to)
        cut = start_cut
        best_state = start_state
        best_prefix = 0
        for _step in range(n):
            best = None
            for v in range(n):
                if locked[v]:
                    continue
                conn = _conn_weights(indptr, indices, eweights, part, v, k)
                cur = part[v]
                for p in range(k):
                    if p == cur:
                        continue
                    if np.any(loads[p] + vweights[v] > caps + slack):
                        continue
                    gain = conn[p] - conn[cur]
                    key = (gain, -v, -p)
                    if best is None or key > best[0]:
                        best = (key, v, p, gain)
            if best is None:
                break
            _, v, p, gain = best
            src = int(part[v])
            part[v] = p
            loads[src] -= vweights[v]
            loads[p] += vweights[v]
            locked[v] = True
            cut -= int(gain)
            moves.append((v, src, p))
            state = (_violation(loads, caps), cut)
            if state < best_state:
                best_state = state
                best_prefix = len(moves)
        # rewind to the best prefix
        for v, src, dst in reversed(moves[best_prefix:]):
            part[v] = src
            loads[dst] -= vweights[v]
            loads[src] += vweights[v]
        if best_state >= start_state:
            break
    return part, loads


def _greedy_refine(indptr, indices, eweights, vweights, part, loads, k, caps, max_passes=6):
    """Positive-gain boundary moves only; cheap enough for the fine levels."""
    n = len(indptr) - 1
    for _ in range(max_passes):
        rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
        boundary = np.unique(rows[part[rows] != part[indices]])
        moved = 0
        for v in boundary:
            v = int(v)
            conn = _conn_weights(indptr, indices, eweights, part, v, k)
            cur = int(part[v])
            gains = conn - conn[cur]
            order = np.lexsort((np.arange(k), -gains))
            for p in order:
                p = int(p)
                if p == cur or gains[p] <= 0:
                    break
                if np.all(loads[p] + vweights[v] <= caps):
                    part[v] = p
                    loads[cur] -= vweights[v]
                    loads[p] += vweights[v]
                    moved += 1
                    break
        if moved == 0:
            break
    return part, loads


_SWAP_REPAIR_LIMIT = 2000  # pairwise swap search is O(n^2/k); small levels only


def _repair(indptr, indices, eweights, vweights, part, loads, k, caps):
    """Drive cap overloads to zero, cheapest cut damage first.

    Takes single moves out of overloaded partitions whenever they strictly
    decrease the total overload (the receiver may pick up a smaller
    violation, which lets multi-step chains unwind). When no single move
    helps, tries pairwise swaps, which resolve the case where every
    receiver with room in the violated dimension is full in another.
    """
    n = len(part)
    for _ in range(4 * n):
        overload = np.maximum(0, loads - caps[None, :])
        if overload.sum() == 0:
            return part, loads, True
        bad_parts = [int(p) for p in np.flatnonzero(overload.sum(axis=1) > 0)]

        best = None  # key (damage, v, p)
        for p_bad in bad_parts:
            base = overload[p_bad].sum()
            for v in np.flatnonzero(part == p_bad):
                v = int(v)
                conn = _conn_weights(indptr, indices, eweights, part, v, k)
                for p in range(k):
                    if p == p_bad:
                        continue
                    d_src = np.maximum(0, loads[p_bad] - vweights[v] - caps).sum()
                    d_dst = np.maximum(0, loads[p] + vweights[v] - caps).sum()
                    if d_src + d_dst < base + overload[p].sum():
                        damage = conn[p_bad] - conn[p]
                        key = (damage, v, p)
                        if best is None or key < best:
                            best = key
        if best is not None:
            _, v, p = best
            p_bad = int(part[v])
            part[v] = p
            loads[p_bad] -= vweights[v]
            loads[p] += vweights[v]
            continue

        if n > _SWAP_REPAIR_LIMIT:
            return part, loads, False
        best_swap = None  # key (damage, v, u)
        for p_bad in bad_parts:
            members = np.flatnonzero(part == p_bad)
            for v in members:
                v = int(v)
                conn_v = _conn_weights(indptr, indices, eweights, part, v, k)
                for q in range(k):
                    if q == p_bad:
                        continue
                    pair_base = overload[p_bad].sum() + overload[q].sum()
                    for u in np.flatnonzero(part == q):
                        u = int(u)
                        dw = vweights[u] - vweights[v]
                        d_src = np.maximum(0, loads[p_bad] + dw - caps).sum()
                        d_dst = np.maximum(0, loads[q] - dw - caps).sum()
                        if d_src + d_dst >= pair_base:
                            continue
                        conn_u = _conn_weights(
                            indptr, indices, eweights, part, u, k
                        )
                        damage = (conn_v[p_bad] - conn_v[q]) + (
                            conn_u[q] - conn_u[p_bad]
                        )
                        key = (damage, v, u)
                        if best_swap is None or key < best_swap:
                            best_swap = key
        if best_swap is None:
            return part, loads, False
        _, v, u = best_swap
        p_bad, q = int(part[v]), int(part[u])
        part[v], part[u] = q, p_bad
        loads[p_bad] += vweights[u] - vweights[v]
        loads[q] += vweights[v] - vweights[u]
    return part, loads, bool(np.all(loads <= caps[None, :]))


_FM_LIMIT = 256  # levels at or below this size get the rollback refinement


def multilevel_partition(
    graph: Graph,
    masks: VertexMasks | None,
    k: int,
    constraints: BalanceConstraints | None = None,
    seed: int = 0,
) -> PartitionPlan:
    """Multilevel k-way partitioning under multi-dimensional balance caps.

    Coarsens by heavy-edge matching until ``max(4k, 64)`` vertices remain,
    grows an initial k-way split greedily (several seeded restarts, best cut
    kept), then refines on every uncoarsening level. Every enabled balance
    dimension must end within ``(1 + tolerance)`` of its ideal share, else
    :class:`InfeasibleConstraintError` is raised.
    """
    _check_k(graph, k)
    constraints = constraints or BalanceConstraints()
    rng = np.random.default_rng(seed)
    n = graph.num_vertices

    vweights = _vertex_weights(graph, masks, constraints)
    totals = vweights.sum(axis=0)
    names = constraints.dimension_names()
    for d, name in enumerate(names):
        if name in ("train", "val_test") and totals[d] < k:
            raise InfeasibleConstraintError(
                f"cannot balance {name}: only {totals[d]} {name} vertices for k={k}"
            )
    caps = _caps(totals, k, constraints.tolerance)

    if k == 1:
        return PartitionPlan.from_assignment(
            graph, masks, np.zeros(n, dtype=np.int64), 1, "multilevel", seed, constraints
        )

    indptr = graph.row_offsets.copy()
    indices = graph.col_indices.copy()
    eweights = np.ones(len(indices), dtype=np.int64)
    levels = []  # (indptr, indices, eweights, vweights) coarse to fine later
    vw = vweights
    limit = max(4 * k, 64)
    while len(indptr) - 1 > limit:
        cindptr, ccols, cw, cvw, cid = _coarsen_once(indptr, indices, eweights, vw, rng)
        if len(cindptr) - 1 > 0.95 * (len(indptr) - 1):
            break  # matching stalled
        levels.append((indptr, indices, eweights, vw, cid))
        indptr, indices, eweights, vw = cindptr, ccols, cw, cvw

    # initial split at the coarsest level: seeded restarts, keep the best
    nc = len(indptr) - 1
    restarts = 8 if nc <= _FM_LIMIT else 3
    best = None
    for _ in range(restarts):
        part, loads = _region_grow(indptr, indices, eweights, vw, k, caps, rng)
        if nc <= _FM_LIMIT:
            part, loads = _fm_refine(indptr, indices, eweights, vw, part, loads, k, caps)
        else:
            part, loads = _greedy_refine(indptr, indices, eweights, vw, part, loads, k, caps)
        state = (_violation(loads, caps), _cut_weight(indptr, indices, eweights, part))
        if best is None or state < best[0]:
            best = (state, part.copy(), loads.copy())
    part, loads = best[1], best[2]

    # uncoarsen, refining at each level
    for findptr, findices, few, fvw, cid in reversed(levels):
        part = part[cid]
        loads = np.zeros((k, fvw.shape[1]), dtype=np.int64)
        np.add.at(loads, part, fvw)
        nf = len(findptr) - 1
        if nf <= _FM_LIMIT:
            part, loads = _fm_refine(findptr, findices, few, fvw, part, loads, k, caps)
        else:
            part, loads = _greedy_refine(findptr, findices, few, fvw, part, loads, k, caps)
        indptr, indices, eweights, vw = findptr, findices, few, fvw

    if np.any(loads > caps[None, :]):
        part, loads, ok = _repair(indptr, indices, eweights, vw, part, loads, k, caps)
        if not ok:
            bad = np.argwhere(loads > caps[None, :])
            p, d = int(bad[0][0]), int(bad[0][1])
            raise InfeasibleConstraintError(
                f"partition {p} exceeds the {names[d]} cap "
                f"({loads[p, d]} > {caps[d]}) and no repair move exists"
            )
        # repair can open up new positive-gain moves
        if len(part) <= _FM_LIMIT:
            part, loads = _fm_refine(indptr, indices, eweights, vw, part, loads, k, caps)
        else:
            part, loads = _greedy_refine(indptr, indices, eweights, vw, part, loads, k, caps)
        if np.any(loads > caps[None, :]):
            raise InfeasibleConstraintError("balance caps violated after repair")

    return PartitionPlan.from_assignment(
        graph, masks, part, k, "multilevel", seed, constraints
    )


# ---------------------------------------------------------------------------
# Streaming partitioners
# ---------------------------------------------------------------------------


def _role_factor(target: float, count: int) -> float:
    if target <= 0:
        return 1.0
    return max(0.0, (target - count) / target)


def stream_vertex_partition(
    graph: Graph,
    masks: VertexMasks,
    k: int,
    config: StreamConfig | None = None,
    seed: int = 0,
) -> PartitionPlan:
    """Streaming assignment of train vertices, one at a time.

    Each train vertex v goes to the partition maximizing
    ``|N(v) ∩ assigned(P_i)| * max(0, (TV/k - tv_i)/(TV/k))`` where
    ``assigned(P_i)`` holds the train vertices placed on P_i so far; ties
    break toward the higher balance factor, then the lower index. Non-train
    vertices are owned by the partition of their nearest assigned train
    vertex (BFS, ties to the lower index). Each partition also records the
    ``hop_cache_depth``-hop neighborhood of its train vertices as a cache
    set; cache sets may overlap.
    """
    _check_k(graph, k)
    config = config or StreamConfig()
    if config.hop_cache_depth < 0:
        raise ValueError("hop_cache_depth must be nonnegative")
    train = masks.train_ids
    if len(train) == 0:
        raise ValueError("stream_vertex needs at least one train vertex")
    rng = np.random.default_rng(seed)
    order = train[rng.permutation(len(train))]

    n = graph.num_vertices
    assignment = np.full(n, -1, dtype=np.int64)
    assigned_sets: list[set[int]] = [set() for _ in range(k)]
    train_counts = [0] * k
    target = len(train) / k

    for v in order:
        v = int(v)
        nv = set(graph.neighbors(v).tolist())
        best_key, best_p = None, 0
        for p in range(k):
            inter = len(nv & assigned_sets[p])
            factor = _role_factor(target, train_counts[p])
            key = (inter * factor, factor, -p)
            if best_key is None or key > best_key:
                best_key, best_p = key, p
        assignment[v] = best_p
        assigned_sets[best_p].add(v)
        train_counts[best_p] += 1

    # ownership of everything else: nearest assigned train vertex
    frontier = sorted(int(v) for v in train)
    while frontier:
        nxt: dict[int, int] = {}
        for v in frontier:
            pv = int(assignment[v])
            for u in graph.neighbors(v):
                u = int(u)
                if assignment[u] < 0:
                    if u not in nxt or pv < nxt[u]:
                        nxt[u] = pv
        for u, p in nxt.items():
            assignment[u] = p
        frontier = sorted(nxt)
    if np.any(assignment < 0):
        counts = np.bincount(assignment[assignment >= 0], minlength=k)
        for v in np.flatnonzero(assignment < 0):
            p = int(np.argmin(counts))
            assignment[int(v)] = p
            counts[p] += 1

    # per-partition cache: L-hop neighborhood of its train vertices
    cache_sets: list[np.ndarray] = []
    for p in range(k):
        seen = set(int(v) for v in train if assignment[v] == p)
        frontier_set = set(seen)
        for _ in range(config.hop_cache_depth):
            grown: set[int] = set()
            for v in frontier_set:
                for u in graph.neighbors(v):
                    u = int(u)
                    if u not in seen:
                        seen.add(u)
                        grown.add(u)
            frontier_set = grown
            if not frontier_set:
                break
        cache_sets.append(np.array(sorted(seen), dtype=np.int64))

    return PartitionPlan.from_assignment(
        graph, masks, assignment, k, "stream_vertex", seed, cache_sets=cache_sets
    )


def stream_block_partition(
    graph: Graph,
    masks: VertexMasks,
    k: int,
    config: StreamConfig | None = None,
    seed: int = 0,
) -> PartitionPlan:
    """Streaming assignment of BFS blocks.

    Blocks grow by BFS from each still-unvisited train vertex (seeded
    order) up to ``block_size`` vertices; leftover unvisited vertices seed
    further blocks the same way, so every vertex lands in exactly one
    block. Each block goes to the partition maximizing edges-connected
    times a multiplicative train/val/test balance factor, ties broken like
    the vertex scheme.
    """
    _check_k(graph, k)
    config = config or StreamConfig()
    if config.block_size < 1:
        raise ValueError("block_size must be at least 1")
    n = graph.num_vertices
    rng = np.random.default_rng(seed)
    train = masks.train_ids
    roots = list(train[rng.permutation(len(train))])
    rest = rng.permutation(n)
    roots.extend(int(v) for v in rest)

    roles = masks.roles
    role_totals = {
        TRAIN: int((roles == TRAIN).sum()),
        VAL: int((roles == VAL).sum()),
        TEST: int((roles == TEST).sum()),
    }
    role_counts = [{TRAIN: 0, VAL: 0, TEST: 0} for _ in range(k)]

    assignment = np.full(n, -1, dtype=np.int64)
    visited = np.zeros(n, dtype=bool)

    for root in roots:
        root = int(root)
        if visited[root]:
            continue
        block = [root]
        visited[root] = True
        queue = deque([root])
        while queue and len(block) < config.block_size:
            x = queue.popleft()
            for u in graph.neighbors(x):
                u = int(u)
                if not visited[u]:
                    visited[u] = True
                    block.append(u)
                    queue.append(u)
                    if len(block) >= config.block_size:
                        break

        conn = [0] * k
        for u in block:
            for w in graph.neighbors(u):
                p = int(assignment[w])
                if p >= 0:
                    conn[p] += 1
        best_key, best_p = None, 0
        for p in range(k):
            factor = 1.0
            for role in (TRAIN, VAL, TEST):
                total = role_totals[role]
                if total > 0:
                    factor *= _role_factor(total / k, role_counts[p][role])
            key = (conn[p] * factor, factor, -p)
            if best_key is None or key > best_key:
                best_key, best_p = key, p
        for u in block:
            assignment[u] = best_p
            r = int(roles[u])
            if r in (TRAIN, VAL, TEST):
                role_counts[best_p][r] += 1

    return PartitionPlan.from_assignment(
        graph, masks, assignment, k, "stream_block", seed
    )


# ---------------------------------------------------------------------------
# Plan file IO
# ---------------------------------------------------------------------------


def save_plan(path, plan: PartitionPlan) -> None:
    """Text format: header comment with method/k/seed/flags, then one
    partition id per vertex line."""
    c = plan.constraints or BalanceConstraints()
    header = (
        f"# plan method={plan.method} k={plan.k} seed={plan.seed} "
        f"balance_train={int(c.balance_train)} "
        f"balance_degree={int(c.balance_degree)} "
        f"balance_val_test={int(c.balance_val_test)}"
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for p in plan.assignment:
            fh.write(f"{int(p)}\n")


def load_plan(path, graph: Graph, masks: VertexMasks | None = None) -> PartitionPlan:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    meta: dict[str, str] = {}
    body: list[int] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for token in line[1:].split():
                if "=" in token:
                    key, val = token.split("=", 1)
                    meta[key] = val
            continue
        try:
            body.append(int(line))
        except ValueError:
            raise ValueError(f"plan line {lineno}: not a partition id") from None
    if "k" not in meta:
        raise ValueError("plan header missing k")
    k = int(meta["k"])
    if len(body) != graph.num_vertices:
        raise ValueError(
            f"plan has {len(body)} assignments for a graph of {graph.num_vertices} vertices"
        )
    assignment = np.array(body, dtype=np.int64)
    if len(body) and (assignment.min() < 0 or assignment.max() >= k):
        raise ValueError("plan contains partition ids outside [0, k)")
    seed = None if meta.get("seed") in (None, "None") else int(meta["seed"])
    constraints = BalanceConstraints(
        balance_train=meta.get("balance_train") == "1",
        balance_degree=meta.get("balance_degree") == "1",
        balance_val_test=meta.get("balance_val_test") == "1",
    )
    return PartitionPlan.from_assignment(
        graph,
        masks,
        assignment,
        k,
        meta.get("method", "unknown"),
        seed,
        constraints=constraints,
    )
