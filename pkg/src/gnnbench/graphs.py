"""Graph data structures, loaders and synthetic generators.

Everything downstream (partitioners, samplers, the toy trainer) consumes the
CSR ``Graph`` defined here. Neighbor lists are stored sorted and deduplicated;
undirected graphs keep both directed slots of every edge.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Graph",
    "VertexMasks",
    "GraphGenSpec",
    "GraphFormatError",
    "TRAIN",
    "VAL",
    "TEST",
    "NONE",
    "build_csr",
    "load_graph",
    "load_features",
    "load_labels",
    "load_masks",
    "save_masks",
    "generate_graph",
    "split_masks",
    "with_task",
]

# Mask role codes. File format uses one of T/V/E/N per line.
TRAIN, VAL, TEST, NONE = 0, 1, 2, 3

_ROLE_CHARS = {"T": TRAIN, "V": VAL, "E": TEST, "N": NONE}
_CHAR_OF_ROLE = {v: k for k, v in _ROLE_CHARS.items()}


class GraphFormatError(ValueError):
    """Raised when an on-disk graph artifact violates its format contract."""


@dataclass(frozen=True)
class Graph:
    """Immutable CSR adjacency plus per-vertex features and labels.

    Row ``v`` of the adjacency holds ``N(v)``, the neighbors aggregated by
    ``v`` (for a directed edge ``u -> v`` the source ``u`` appears in row
    ``v``). Undirected graphs store both directions, so ``num_edges`` counts
    directed slots: 7 undirected edges make ``num_edges == 14``.

    Attributes
    ----------
    num_vertices : int
    num_edges : int
        Number of directed adjacency slots (``len(col_indices)``).
    row_offsets : np.ndarray
        int64, shape ``(num_vertices + 1,)``, nondecreasing.
    col_indices : np.ndarray
        int64, shape ``(num_edges,)``; sorted and unique within each row.
    features : np.ndarray
        float32, shape ``(num_vertices, feature_dim)``.
    labels : np.ndarray
        int64, shape ``(num_vertices,)``, values in ``[0, num_classes)``.
    """

    num_vertices: int
    num_edges: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    undirected: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def degrees(self) -> np.ndarray:
        """Neighbor-list lengths (in-degree for directed graphs)."""
        return np.diff(self.row_offsets)

    @property
    def out_degrees(self) -> np.ndarray:
        """How often each vertex appears in someone else's neighbor list."""
        return np.bincount(self.col_indices, minlength=self.num_vertices)

    def neighbors(self, v: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[v] : self.row_offsets[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.row_offsets[v + 1] - self.row_offsets[v])

    def mean_degree(self) -> float:
        return self.num_edges / self.num_vertices if self.num_vertices else 0.0

    def validate(self) -> None:
        """Assert structural invariants; meant for tests and loaders."""
        n = self.num_vertices
        assert self.row_offsets.shape == (n + 1,)
        assert self.row_offsets[0] == 0 and self.row_offsets[-1] == self.num_edges
        assert np.all(np.diff(self.row_offsets) >= 0)
        if self.num_edges:
            assert self.col_indices.min() >= 0
            assert self.col_indices.max() < n
        for v in range(n):
            row = self.neighbors(v)
            assert np.all(np.diff(row) > 0), f"row {v} not sorted/unique"
            assert not np.any(row == v), f"self-loop at {v}"
        if self.undirected:
            # both directed slots of every undirected edge must be present
            fwd = set(zip(self._rows().tolist(), self.col_indices.tolist()))
            assert all((b, a) in fwd for a, b in fwd)
        assert self.features.shape == (n, self.feature_dim)
        assert self.labels.shape == (n,)
        if n:
            assert self.labels.min() >= 0 and self.labels.max() < self.num_classes

    def _rows(self) -> np.ndarray:
        """Row index of each adjacency slot (same length as col_indices)."""
        return np.repeat(np.arange(self.num_vertices, dtype=np.int64), self.degrees)


@dataclass(frozen=True)
class VertexMasks:
    """Train/val/test/none role per vertex."""

    roles: np.ndarray  # int8, values in {TRAIN, VAL, TEST, NONE}

    @property
    def num_vertices(self) -> int:
        return int(self.roles.shape[0])

    @property
    def train_ids(self) -> np.ndarray:
        return np.flatnonzero(self.roles == TRAIN)

    @property
    def val_ids(self) -> np.ndarray:
        return np.flatnonzero(self.roles == VAL)

    @property
    def test_ids(self) -> np.ndarray:
        return np.flatnonzero(self.roles == TEST)

    def counts(self) -> tuple[int, int, int]:
        return (len(self.train_ids), len(self.val_ids), len(self.test_ids))


@dataclass(frozen=True)
class GraphGenSpec:
    """Parameters for the synthetic generators.

    ``kind`` is ``"sbm"`` (contiguous equal blocks, Bernoulli intra/inter
    edges) or ``"powerlaw"`` (preferential attachment, ``attach_degree``
    edges per arriving vertex).
    """

    kind: str
    num_vertices: int
    block_count: int = 1
    intra_prob: float = 0.0
    inter_prob: float = 0.0
    attach_degree: int = 2
    feature_dim: int = 8
    num_classes: int = 4
    seed: int = 0


# ---------------------------------------------------------------------------
# CSR construction
# ---------------------------------------------------------------------------


def build_csr(
    edges: np.ndarray, num_vertices: int, undirected: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Build (row_offsets, col_indices) from an ``(E, 2)`` pair array.

    Row v lists the in-neighbors N(v), so a directed pair (src, dst) lands
    in row dst. Deduplicates, drops self-loops, sorts each row ascending.
    For undirected graphs each input pair contributes both directed slots.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if undirected and len(edges):
        edges = np.concatenate([edges, edges[:, ::-1]], axis=0)
    if len(edges):
        edges = edges[edges[:, 0] != edges[:, 1]]
    if len(edges) == 0:
        return np.zeros(num_vertices + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    keys = edges[:, 1] * num_vertices + edges[:, 0]
    keys = np.unique(keys)
    rows = keys // num_vertices
    cols = keys % num_vertices
    counts = np.bincount(rows, minlength=num_vertices)
    offsets = np.zeros(num_vertices + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets, cols.astype(np.int64)


def _attach_payload(
    num_vertices: int,
    features: np.ndarray | None,
    labels: np.ndarray | None,
    feature_dim: int,
    num_classes: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Fill in random features/labels where none were supplied."""
    rng = np.random.default_rng(seed)
    if features is None:
        features = rng.random((num_vertices, feature_dim), dtype=np.float32)
    else:
        features = np.asarray(features, dtype=np.float32)
        if features.shape[0] != num_vertices:
            raise GraphFormatError(
                f"feature rows ({features.shape[0]}) != num_vertices ({num_vertices})"
            )
    if labels is None:
        labels = rng.integers(0, num_classes, size=num_vertices, dtype=np.int64)
    else:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape[0] != num_vertices:
            raise GraphFormatError(
                f"label rows ({labels.shape[0]}) != num_vertices ({num_vertices})"
            )
        if num_vertices and labels.max() >= num_classes:
            num_classes = int(labels.max()) + 1
    return features, labels, num_classes


# ---------------------------------------------------------------------------
# Loaders
# ---------------------------------------------------------------------------


def _iter_lines(source) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from fh
    elif isinstance(source, io.IOBase):
        yield from source
    else:  # sequence of lines, handy in tests
        yield from source


def load_graph(
    edge_source,
    feature_source=None,
    label_source=None,
    *,
    num_vertices: int | None = None,
    undirected: bool = True,
    feature_dim: int = 8,
    num_classes: int = 4,
    seed: int = 0,
) -> Graph:
    """Load a graph from a ``src dst`` edge list.

    Parameters
    ----------
    edge_source : path, file-like or iterable of lines
        One ``src dst`` pair per line; ``#`` starts a comment. For
        ``undirected=True`` each pair is stored in both directions.
    feature_source, label_source : optional
        Paths to feature/label files (see :func:`load_features` and
        :func:`load_labels`). Absent inputs are replaced by seeded random
        features in ``[0, 1)`` and uniform random labels.
    num_vertices : optional int
        Declared vertex count; required when the edge list alone does not
        determine it (e.g. an empty list). Must cover every referenced id.
    """
    pairs: list[tuple[int, int]] = []
    max_id = -1
    for lineno, raw in enumerate(_iter_lines(edge_source), start=1):
        if isinstance(raw, str):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
        else:  # already a (u, v) pair, handy in tests
            tokens = list(raw)
        if len(tokens) != 2:
            raise GraphFormatError(
                f"edge list line {lineno}: expected 'src dst', got {raw!r}"
            )
        try:
            u, v = int(tokens[0]), int(tokens[1])
        except (TypeError, ValueError):
            raise GraphFormatError(
                f"edge list line {lineno}: non-integer vertex id in {raw!r}"
            ) from None
        if u < 0 or v < 0:
            raise GraphFormatError(f"edge list line {lineno}: negative vertex id")
        pairs.append((u, v))
        max_id = max(max_id, u, v)

    if num_vertices is None:
        if max_id < 0:
            raise GraphFormatError(
                "empty edge list needs an explicit num_vertices"
            )
        num_vertices = max_id + 1
    elif max_id >= num_vertices:
        raise GraphFormatError(
            f"vertex id {max_id} out of range for declared num_vertices={num_vertices}"
        )

    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    offsets, cols = build_csr(edges, num_vertices, undirected=undirected)

    features = load_features(feature_source) if feature_source is not None else None
    labels = load_labels(label_source) if label_source is not None else None
    features, labels, num_classes = _attach_payload(
        num_vertices, features, labels, feature_dim, num_classes, seed
    )
    return Graph(
        num_vertices=num_vertices,
        num_edges=int(len(cols)),
        row_offsets=offsets,
        col_indices=cols,
        features=features,
        labels=labels,
        num_classes=num_classes,
        undirected=undirected,
        meta={"source": "file", "seed": seed},
    )


def load_features(source) -> np.ndarray:
    """Load a feature matrix.

    Text format: header line ``n d`` followed by ``n`` rows of ``d`` reals.
    Binary format (``.bin`` suffix): 8-byte header of two little-endian
    uint32 ``(n, d)`` followed by ``n*d`` little-endian float32 values.
    """
    if isinstance(source, (str, Path)) and str(source).endswith(".bin"):
        raw = Path(source).read_bytes()
        if len(raw) < 8:
            raise GraphFormatError("binary feature file shorter than its header")
        n, d = np.frombuffer(raw[:8], dtype="<u4")
        body = np.frombuffer(raw[8:], dtype="<f4")
        if body.size != int(n) * int(d):
            raise GraphFormatError(
                f"binary feature file payload has {body.size} values, header says {n}x{d}"
            )
        return body.reshape(int(n), int(d)).astype(np.float32)

    lines = [
        ln.split("#", 1)[0].strip()
        for ln in _iter_lines(source)
    ]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise GraphFormatError("feature file is empty")
    header = lines[0].split()
    if len(header) != 2:
        raise GraphFormatError("feature file header must be 'n d'")
    try:
        n, d = int(header[0]), int(header[1])
    except ValueError:
        raise GraphFormatError("feature file header must be two integers") from None
    if len(lines) - 1 != n:
        raise GraphFormatError(
            f"feature file declares {n} rows but has {len(lines) - 1}"
        )
    out = np.empty((n, d), dtype=np.float32)
    for i, ln in enumerate(lines[1:]):
        vals = ln.split()
        if len(vals) != d:
            raise GraphFormatError(f"feature row {i} has {len(vals)} values, expected {d}")
        try:
            out[i] = [float(v) for v in vals]
        except ValueError:
            raise GraphFormatError(f"feature row {i}: non-numeric value") from None
    return out


def save_features(path, features: np.ndarray) -> None:
    """Write features in the format implied by the path suffix."""
    features = np.asarray(features, dtype=np.float32)
    n, d = features.shape
    if str(path).endswith(".bin"):
        header = np.array([n, d], dtype="<u4").tobytes()
        Path(path).write_bytes(header + features.astype("<f4").tobytes())
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{n} {d}\n")
        for row in features:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_labels(source) -> np.ndarray:
    """One integer label per line; ``#`` comments allowed."""
    vals = []
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            vals.append(int(line))
        except ValueError:
            raise GraphFormatError(f"label line {lineno}: not an integer") from None
    return np.array(vals, dtype=np.int64)


def load_masks(source) -> VertexMasks:
    """One of T/V/E/N per line, vertex id = line order."""
    roles = []
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line not in _ROLE_CHARS:
            raise GraphFormatError(
                f"mask line {lineno}: expected one of T/V/E/N, got {line!r}"
            )
        roles.append(_ROLE_CHARS[line])
    return VertexMasks(roles=np.array(roles, dtype=np.int8))


def save_masks(path, masks: VertexMasks) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in masks.roles:
            fh.write(_CHAR_OF_ROLE[int(r)] + "\n")


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def _sample_distinct(rng: np.random.Generator, space: int, count: int) -> np.ndarray:
    """Uniformly sample ``count`` distinct ints from ``range(space)``.

    Rejection-based: cheap when count << space, falls back to a permutation
    otherwise. Deterministic given the generator state.
    """
    if count < 0 or count > space:
        raise ValueError("count out of range")
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    if count * 2 >= space:
        return rng.permutation(space)[:count].astype(np.int64)
    picked = np.unique(rng.integers(0, space, size=int(count * 1.1) + 8))
    while len(picked) < count:
        extra = rng.integers(0, space, size=count)
        picked = np.unique(np.concatenate([picked, extra]))
    # trim uniformly: take a random subset of the collected distinct values
    if len(picked) > count:
        keep = rng.permutation(len(picked))[:count]
        picked = picked[np.sort(keep)]
    return picked.astype(np.int64)


def _decode_triangle(idx: np.ndarray, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Map linear indices over the strict upper triangle of an s*s grid to (i, j)."""
    idx = idx.astype(np.float64)
    b = 2 * s - 1
    i = np.floor((b - np.sqrt(b * b - 8 * idx)) / 2).astype(np.int64)
    # float sqrt can land one row off; nudge back into range
    row_start = i * (2 * s - i - 1) // 2
    too_big = idx.astype(np.int64) < row_start
    i = np.where(too_big, i - 1, i)
    row_start = i * (2 * s - i - 1) // 2
    row_end = (i + 1) * (2 * s - i - 2) // 2
    too_small = idx.astype(np.int64) >= row_end
    i = np.where(too_small, i + 1, i)
    row_start = i * (2 * s - i - 1) // 2
    j = idx.astype(np.int64) - row_start + i + 1
    return i, j


def _sbm_edges(spec: GraphGenSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    n, b = spec.num_vertices, spec.block_count
    base = n // b
    sizes = np.full(b, base, dtype=np.int64)
    sizes[: n - base * b] += 1
    starts = np.zeros(b, dtype=np.int64)
    np.cumsum(sizes[:-1], out=starts[1:])
    blocks = np.repeat(np.arange(b), sizes)

    chunks = []
    for bi in range(b):
        s = int(sizes[bi])
        pair_space = s * (s - 1) // 2
        if pair_space and spec.intra_prob > 0:
            cnt = int(rng.binomial(pair_space, min(spec.intra_prob, 1.0)))
            idx = _sample_distinct(rng, pair_space, cnt)
            i, j = _decode_triangle(idx, s)
            chunks.append(np.stack([i + starts[bi], j + starts[bi]], axis=1))
        for bj in range(bi + 1, b):
            t = int(sizes[bj])
            if spec.inter_prob <= 0 or s == 0 or t == 0:
                continue
            cnt = int(rng.binomial(s * t, min(spec.inter_prob, 1.0)))
            idx = _sample_distinct(rng, s * t, cnt)
            chunks.append(
                np.stack([idx // t + starts[bi], idx % t + starts[bj]], axis=1)
            )
    edges = (
        np.concatenate(chunks, axis=0) if chunks else np.zeros((0, 2), dtype=np.int64)
    )
    return edges, blocks


def _powerlaw_edges(spec: GraphGenSpec, rng: np.random.Generator) -> np.ndarray:
    """Preferential attachment: each arriving vertex attaches to
    ``attach_degree`` distinct existing vertices chosen degree-proportionally."""
    n, m = spec.num_vertices, spec.attach_degree
    targets = list(range(m))
    repeated: list[int] = []
    edges = []
    for v in range(m, n):
        for t in targets:
            edges.append((v, t))
        repeated.extend(targets)
        repeated.extend([v] * m)
        chosen: set[int] = set()
        while len(chosen) < m:
            chosen.add(repeated[int(rng.integers(0, len(repeated)))])
        targets = sorted(chosen)
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def generate_graph(spec: GraphGenSpec) -> Graph:
    """Generate a synthetic graph; byte-identical for equal (spec, seed)."""
    if spec.num_vertices <= 0:
        raise ValueError("num_vertices must be positive")
    rng = np.random.default_rng(spec.seed)
    meta: dict = {"gen": spec.kind, "seed": spec.seed}

    if spec.kind == "sbm":
        if spec.block_count < 1 or spec.num_vertices < spec.block_count:
            raise ValueError(
                f"sbm needs num_vertices >= block_count, got n={spec.num_vertices} "
                f"blocks={spec.block_count}"
            )
        if not (0.0 <= spec.intra_prob <= 1.0 and 0.0 <= spec.inter_prob <= 1.0):
            raise ValueError("edge probabilities must lie in [0, 1]")
        edges, blocks = _sbm_edges(spec, rng)
        meta["sbm_blocks"] = blocks
    elif spec.kind == "powerlaw":
        if spec.attach_degree < 1 or spec.num_vertices <= spec.attach_degree:
            raise ValueError(
                "powerlaw needs num_vertices > attach_degree >= 1"
            )
        edges = _powerlaw_edges(spec, rng)
    else:
        raise ValueError(f"unknown generator kind {spec.kind!r}")

    offsets, cols = build_csr(edges, spec.num_vertices, undirected=True)
    features, labels, num_classes = _attach_payload(
        spec.num_vertices, None, None, spec.feature_dim, spec.num_classes, spec.seed + 1
    )
    return Graph(
        num_vertices=spec.num_vertices,
        num_edges=int(len(cols)),
        row_offsets=offsets,
        col_indices=cols,
        features=features,
        labels=labels,
        num_classes=num_classes,
        undirected=True,
        meta=meta,
    )


def split_masks(
    graph: Graph,
    ratios: Sequence[float] = (0.65, 0.10, 0.25),
    seed: int = 0,
) -> VertexMasks:
    """Uniformly random disjoint train/val/test assignment.

    Counts are ``floor(ratio * n)`` per role; the vertices lost to flooring
    (up to ``floor(sum(ratios) * n)``) go to Train. Ratios summing below 1
    leave the remainder unassigned (role N).
    """
    if len(ratios) != 3:
        raise ValueError("ratios must be (train, val, test)")
    if any(r < 0 for r in ratios) or sum(ratios) > 1.0 + 1e-9:
        raise ValueError("ratios must be nonnegative and sum to at most 1")
    n = graph.num_vertices
    want = [int(np.floor(r * n)) for r in ratios]
    assigned_total = int(np.floor(min(sum(ratios), 1.0) * n + 1e-9))
    want[0] += max(0, assigned_total - sum(want))
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    roles = np.full(n, NONE, dtype=np.int8)
    pos = 0
    for role, cnt in zip((TRAIN, VAL, TEST), want):
        roles[order[pos : pos + cnt]] = role
        pos += cnt
    return VertexMasks(roles=roles)


def with_task(
    graph: Graph,
    labels: np.ndarray,
    features: np.ndarray | None = None,
    num_classes: int | None = None,
) -> Graph:
    """Return a copy of ``graph`` with a supervised task attached."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (graph.num_vertices,):
        raise ValueError("labels must have one entry per vertex")
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if len(labels) else 1
    kwargs = {"labels": labels, "num_classes": num_classes}
    if features is not None:
        features = np.asarray(features, dtype=np.float32)
        if features.shape[0] != graph.num_vertices:
            raise ValueError("features must have one row per vertex")
        kwargs["features"] = features
    return replace(graph, **kwargs)
