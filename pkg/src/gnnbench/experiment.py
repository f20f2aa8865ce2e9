"""Experiment configs, the grid runner, and the output manifest.

Config files are flat INI-style text (sections in brackets, ``key = value``
lines, ``#`` comments). Unknown sections or keys are hard errors that name
the offending line; resolved defaults are echoed into the manifest so a
run's inputs are never implicit.

Identical config + seeds produce byte-identical output trees. Wall-clock
columns are written as 0.0 unless ``timing = true``, because real times
would break that guarantee.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import batching, metrics, model, partition, transfer
from .graphs import (
    Graph,
    GraphGenSpec,
    VertexMasks,
    generate_graph,
    load_graph,
    load_masks,
    split_masks,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "run_experiment",
    "OUTPUT_ROOT_ENV",
]

OUTPUT_ROOT_ENV = "GNNBENCH_OUTPUT_ROOT"


class ConfigError(ValueError):
    """Malformed experiment config; message carries the line number."""


# ---------------------------------------------------------------------------
# Raw tokenizer: sections of key/value pairs with line numbers
# ---------------------------------------------------------------------------


def _tokenize(text: str) -> list[tuple[str, int, dict[str, tuple[str, int]]]]:
    sections: list[tuple[str, int, dict[str, tuple[str, int]]]] = []
    current: dict[str, tuple[str, int]] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: unterminated section header")
            name = line[1:-1].strip()
            if not name:
                raise ConfigError(f"line {lineno}: empty section name")
            current = {}
            sections.append((name, lineno, current))
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, val = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in current:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        current[key] = (val, lineno)
    return sections


def _want_int(val: str, lineno: int, key: str) -> int:
    try:
        return int(val)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} must be an integer, got {val!r}") from None


def _want_float(val: str, lineno: int, key: str) -> float:
    try:
        return float(val)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} must be a number, got {val!r}") from None


def _want_bool(val: str, lineno: int, key: str) -> bool:
    low = val.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"line {lineno}: {key} must be true/false, got {val!r}")


def _want_list(val: str, lineno: int, key: str, conv) -> tuple:
    items = [t.strip() for t in val.split(",") if t.strip()]
    if not items:
        raise ConfigError(f"line {lineno}: {key} must be a comma list")
    try:
        return tuple(conv(t) for t in items)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} has a malformed element in {val!r}") from None


class _Section:
    """Typed reader over one tokenized section; flags unknown keys."""

    def __init__(self, name: str, lineno: int, body: dict[str, tuple[str, int]]):
        self.name = name
        self.lineno = lineno
        self.body = dict(body)
        self.seen: set[str] = set()

    def get(self, key, conv=None, default=None, required=False, list_conv=None):
        self.seen.add(key)
        if key not in self.body:
            if required:
                raise ConfigError(
                    f"line {self.lineno}: section [{self.name}] is missing required key {key!r}"
                )
            return default
        val, lineno = self.body[key]
        if list_conv is not None:
            return _want_list(val, lineno, key, list_conv)
        if conv is int:
            return _want_int(val, lineno, key)
        if conv is float:
            return _want_float(val, lineno, key)
        if conv is bool:
            return _want_bool(val, lineno, key)
        return val

    def finish(self):
        unknown = set(self.body) - self.seen
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(
                f"line {self.body[key][1]}: unknown key {key!r} in section [{self.name}]"
            )


# ---------------------------------------------------------------------------
# Config dataclasses
# ---------------------------------------------------------------------------


@dataclass
class PartitionSpecConfig:
    name: str
    method: str
    k: int
    seed: int = 0
    mode: str = "round_robin"
    balance_train: bool = False
    balance_degree: bool = False
    balance_val_test: bool = False
    tolerance: float = 0.05
    hop_cache_depth: int = 1
    block_size: int = 64


@dataclass
class SamplerSpecConfig:
    name: str
    method: str = "fanout"
    fanouts: tuple[int, ...] = (25, 10)
    rates: tuple[float, ...] = ()
    degree_threshold: float | None = None

    def to_sampler(self) -> batching.SamplerConfig:
        return batching.SamplerConfig(
            method=self.method,
            fanouts=self.fanouts,
            rates=self.rates,
            degree_threshold=self.degree_threshold,
        )


@dataclass
class ExperimentConfig:
    graph_kind: str = "sbm"
    num_vertices: int = 200
    blocks: int = 4
    intra_prob: float = 0.05
    inter_prob: float = 0.005
    attach_degree: int = 2
    feature_dim: int = 16
    num_classes: int = 4
    graph_seed: int = 1
    edges_path: str | None = None
    features_path: str | None = None
    labels_path: str | None = None
    undirected: bool = True

    mask_ratios: tuple[float, float, float] = (0.65, 0.10, 0.25)
    mask_seed: int = 2
    masks_path: str | None = None

    partitions: list[PartitionSpecConfig] = field(default_factory=list)
    samplers: list[SamplerSpecConfig] = field(default_factory=list)

    batch_policy: str = "random"
    batch_size: int = 64
    batch_seed: int = 3
    sample_epochs: int = 1
    dump_subgraphs: bool = False

    cache_policies: tuple[str, ...] = ("degree", "presample")
    cache_ratios: tuple[float, ...] = (0.0, 0.1, 0.3)
    presample_epochs: int = 1
    presample_batch_size: int = 64
    cache_seed: int = 4

    bp_per_edge: float = 1.0
    dt_per_byte: float = 0.26
    nn_per_edge: float = 1.0
    block_bytes: int = transfer.DEFAULT_BLOCK_BYTES
    thresholds: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)

    train_enabled: bool = False
    train_epochs: int = 10
    train_lr: float = 0.1
    train_optimizer: str = "sgd"
    train_batch_size: int = 32
    train_adaptive: bool = False
    adaptive_initial: int = 32
    adaptive_max: int = 256
    train_hidden: int = 16
    train_seed: int = 5

    output_dir: str = "out"
    timing: bool = False

    def resolved(self) -> dict:
        """Plain-dict echo of every effective setting, for the manifest."""
        out = {
            "graph": {
                "kind": self.graph_kind,
                "num_vertices": self.num_vertices,
                "blocks": self.blocks,
                "intra_prob": self.intra_prob,
                "inter_prob": self.inter_prob,
                "attach_degree": self.attach_degree,
                "feature_dim": self.feature_dim,
                "num_classes": self.num_classes,
                "seed": self.graph_seed,
                "edges": self.edges_path,
                "features": self.features_path,
                "labels": self.labels_path,
                "undirected": self.undirected,
            },
            "masks": {
                "train": self.mask_ratios[0],
                "val": self.mask_ratios[1],
                "test": self.mask_ratios[2],
                "seed": self.mask_seed,
                "file": self.masks_path,
            },
            "partitions": [vars(p).copy() for p in self.partitions],
            "samplers": [
                {
                    "name": s.name,
                    "method": s.method,
                    "fanouts": list(s.fanouts),
                    "rates": list(s.rates),
                    "degree_threshold": s.degree_threshold,
                }
                for s in self.samplers
            ],
            "batch": {
                "policy": self.batch_policy,
                "batch_size": self.batch_size,
                "seed": self.batch_seed,
                "sample_epochs": self.sample_epochs,
                "dump_subgraphs": self.dump_subgraphs,
            },
            "cache": {
                "policies": list(self.cache_policies),
                "ratios": list(self.cache_ratios),
                "presample_epochs": self.presample_epochs,
                "presample_batch_size": self.presample_batch_size,
                "seed": self.cache_seed,
            },
            "pipeline": {
                "bp_per_edge": self.bp_per_edge,
                "dt_per_byte": self.dt_per_byte,
                "nn_per_edge": self.nn_per_edge,
                "block_bytes": self.block_bytes,
                "thresholds": list(self.thresholds),
            },
            "train": {
                "enabled": self.train_enabled,
                "epochs": self.train_epochs,
                "lr": self.train_lr,
                "optimizer": self.train_optimizer,
                "batch_size": self.train_batch_size,
                "adaptive": self.train_adaptive,
                "adaptive_initial": self.adaptive_initial,
                "adaptive_max": self.adaptive_max,
                "hidden": self.train_hidden,
                "seed": self.train_seed,
            },
            "output": {"dir": self.output_dir, "timing": self.timing},
        }
        return out


_PARTITION_METHODS = ("hash", "multilevel", "stream_vertex", "stream_block")


def parse_config(source) -> ExperimentConfig:
    """Parse and validate an experiment config file (path or text)."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text(encoding="utf-8")
    else:
        text = str(source)

    cfg = ExperimentConfig()
    seen_names: set[str] = set()
    have_graph = False

    for name, lineno, body in _tokenize(text):
        parts = name.split()
        kind = parts[0]
        sec = _Section(name, lineno, body)

        if kind == "graph":
            have_graph = True
            cfg.graph_kind = sec.get("kind", required=True)
            if cfg.graph_kind not in ("sbm", "powerlaw", "file"):
                raise ConfigError(
                    f"line {lineno}: graph kind must be sbm/powerlaw/file, got {cfg.graph_kind!r}"
                )
            if cfg.graph_kind == "file":
                cfg.edges_path = sec.get("edges", required=True)
                cfg.features_path = sec.get("features")
                cfg.labels_path = sec.get("labels")
                cfg.undirected = sec.get("undirected", conv=bool, default=True)
                cfg.num_vertices = sec.get("num_vertices", conv=int, default=0)
            else:
                cfg.num_vertices = sec.get("num_vertices", conv=int, required=True)
                cfg.blocks = sec.get("blocks", conv=int, default=cfg.blocks)
                cfg.intra_prob = sec.get("intra_prob", conv=float, default=cfg.intra_prob)
                cfg.inter_prob = sec.get("inter_prob", conv=float, default=cfg.inter_prob)
                cfg.attach_degree = sec.get(
                    "attach_degree", conv=int, default=cfg.attach_degree
                )
            cfg.feature_dim = sec.get("feature_dim", conv=int, default=cfg.feature_dim)
            cfg.num_classes = sec.get("num_classes", conv=int, default=cfg.num_classes)
            cfg.graph_seed = sec.get("seed", conv=int, default=cfg.graph_seed)
        elif kind == "masks":
            cfg.masks_path = sec.get("file")
            tr = sec.get("train", conv=float, default=cfg.mask_ratios[0])
            va = sec.get("val", conv=float, default=cfg.mask_ratios[1])
            te = sec.get("test", conv=float, default=cfg.mask_ratios[2])
            cfg.mask_ratios = (tr, va, te)
            cfg.mask_seed = sec.get("seed", conv=int, default=cfg.mask_seed)
        elif kind == "partition":
            if len(parts) != 2:
                raise ConfigError(
                    f"line {lineno}: partition sections need a name: [partition NAME]"
                )
            pname = parts[1]
            if pname in seen_names:
                raise ConfigError(f"line {lineno}: duplicate spec name {pname!r}")
            seen_names.add(pname)
            method = sec.get("method", required=True)
            if method not in _PARTITION_METHODS:
                raise ConfigError(
                    f"line {lineno}: partition method must be one of "
                    f"{'/'.join(_PARTITION_METHODS)}, got {method!r}"
                )
            spec = PartitionSpecConfig(
                name=pname,
                method=method,
                k=sec.get("k", conv=int, required=True),
                seed=sec.get("seed", conv=int, default=0),
            )
            if method == "hash":
                spec.mode = sec.get("mode", default="round_robin")
            if method == "multilevel":
                spec.balance_train = sec.get("balance_train", conv=bool, default=False)
                spec.balance_degree = sec.get("balance_degree", conv=bool, default=False)
                spec.balance_val_test = sec.get(
                    "balance_val_test", conv=bool, default=False
                )
                spec.tolerance = sec.get("tolerance", conv=float, default=0.05)
            if method == "stream_vertex":
                spec.hop_cache_depth = sec.get("hop_cache_depth", conv=int, default=1)
            if method == "stream_block":
                spec.block_size = sec.get("block_size", conv=int, default=64)
            cfg.partitions.append(spec)
        elif kind == "sampler":
            if len(parts) != 2:
                raise ConfigError(
                    f"line {lineno}: sampler sections need a name: [sampler NAME]"
                )
            sname = parts[1]
            if sname in seen_names:
                raise ConfigError(f"line {lineno}: duplicate spec name {sname!r}")
            seen_names.add(sname)
            method = sec.get("method", default="fanout")
            spec = SamplerSpecConfig(name=sname, method=method)
            if method in ("fanout", "hybrid"):
                spec.fanouts = sec.get(
                    "fanouts", list_conv=int, default=spec.fanouts
                )
            else:
                spec.fanouts = ()
            if method in ("rate", "hybrid"):
                spec.rates = sec.get("rates", list_conv=float, required=True)
            thr = sec.get("degree_threshold", conv=float, default=None)
            spec.degree_threshold = thr
            try:
                spec.to_sampler()
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {exc}") from None
            cfg.samplers.append(spec)
        elif kind == "batch":
            cfg.batch_policy = sec.get("policy", default=cfg.batch_policy)
            if cfg.batch_policy not in ("random", "cluster"):
                raise ConfigError(
                    f"line {lineno}: batch policy must be random or cluster"
                )
            cfg.batch_size = sec.get("batch_size", conv=int, default=cfg.batch_size)
            cfg.batch_seed = sec.get("seed", conv=int, default=cfg.batch_seed)
            cfg.sample_epochs = sec.get("epochs", conv=int, default=cfg.sample_epochs)
            cfg.dump_subgraphs = sec.get(
                "dump_subgraphs", conv=bool, default=cfg.dump_subgraphs
            )
        elif kind == "cache":
            pol = sec.get("policies", list_conv=str, default=cfg.cache_policies)
            for p in pol:
                if p not in ("degree", "presample"):
                    raise ConfigError(
                        f"line {lineno}: cache policies must be degree/presample"
                    )
            cfg.cache_policies = pol
            cfg.cache_ratios = sec.get("ratios", list_conv=float, default=cfg.cache_ratios)
            cfg.presample_epochs = sec.get(
                "presample_epochs", conv=int, default=cfg.presample_epochs
            )
            cfg.presample_batch_size = sec.get(
                "presample_batch_size", conv=int, default=cfg.presample_batch_size
            )
            cfg.cache_seed = sec.get("seed", conv=int, default=cfg.cache_seed)
        elif kind == "pipeline":
            cfg.bp_per_edge = sec.get("bp_per_edge", conv=float, default=cfg.bp_per_edge)
            cfg.dt_per_byte = sec.get("dt_per_byte", conv=float, default=cfg.dt_per_byte)
            cfg.nn_per_edge = sec.get("nn_per_edge", conv=float, default=cfg.nn_per_edge)
            cfg.block_bytes = sec.get("block_bytes", conv=int, default=cfg.block_bytes)
            cfg.thresholds = sec.get(
                "thresholds", list_conv=float, default=cfg.thresholds
            )
        elif kind == "train":
            cfg.train_enabled = sec.get("enabled", conv=bool, default=False)
            cfg.train_epochs = sec.get("epochs", conv=int, default=cfg.train_epochs)
            cfg.train_lr = sec.get("lr", conv=float, default=cfg.train_lr)
            cfg.train_optimizer = sec.get("optimizer", default=cfg.train_optimizer)
            cfg.train_batch_size = sec.get(
                "batch_size", conv=int, default=cfg.train_batch_size
            )
            cfg.train_adaptive = sec.get("adaptive", conv=bool, default=False)
            cfg.adaptive_initial = sec.get(
                "adaptive_initial", conv=int, default=cfg.adaptive_initial
            )
            cfg.adaptive_max = sec.get("adaptive_max", conv=int, default=cfg.adaptive_max)
            cfg.train_hidden = sec.get("hidden", conv=int, default=cfg.train_hidden)
            cfg.train_seed = sec.get("seed", conv=int, default=cfg.train_seed)
        elif kind == "output":
            cfg.output_dir = sec.get("dir", default=cfg.output_dir)
            cfg.timing = sec.get("timing", conv=bool, default=cfg.timing)
        else:
            raise ConfigError(f"line {lineno}: unknown section [{name}]")
        sec.finish()

    if not have_graph:
        raise ConfigError("config needs a [graph] section")
    if not cfg.partitions:
        raise ConfigError("config needs at least one [partition NAME] section")
    if not cfg.samplers:
        raise ConfigError("config needs at least one [sampler NAME] section")
    return cfg


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


def _build_graph(cfg: ExperimentConfig) -> Graph:
    if cfg.graph_kind == "file":
        return load_graph(
            cfg.edges_path,
            cfg.features_path,
            cfg.labels_path,
            num_vertices=cfg.num_vertices or None,
            undirected=cfg.undirected,
            feature_dim=cfg.feature_dim,
            num_classes=cfg.num_classes,
            seed=cfg.graph_seed,
        )
    spec = GraphGenSpec(
        kind=cfg.graph_kind,
        num_vertices=cfg.num_vertices,
        block_count=cfg.blocks,
        intra_prob=cfg.intra_prob,
        inter_prob=cfg.inter_prob,
        attach_degree=cfg.attach_degree,
        feature_dim=cfg.feature_dim,
        num_classes=cfg.num_classes,
        seed=cfg.graph_seed,
    )
    return generate_graph(spec)


def _build_masks(cfg: ExperimentConfig, graph: Graph) -> VertexMasks:
    if cfg.masks_path:
        masks = load_masks(cfg.masks_path)
        if masks.num_vertices != graph.num_vertices:
            raise ValueError("mask file length does not match the graph")
        return masks
    return split_masks(graph, cfg.mask_ratios, seed=cfg.mask_seed)


def _run_partition(graph, masks, spec: PartitionSpecConfig):
    if spec.method == "hash":
        return partition.hash_partition(graph, spec.k, seed=spec.seed, mode=spec.mode)
    if spec.method == "multilevel":
        cons = partition.BalanceConstraints(
            balance_train=spec.balance_train,
            balance_degree=spec.balance_degree,
            balance_val_test=spec.balance_val_test,
            tolerance=spec.tolerance,
        )
        return partition.multilevel_partition(
            graph, masks, spec.k, constraints=cons, seed=spec.seed
        )
    if spec.method == "stream_vertex":
        sc = partition.StreamConfig(hop_cache_depth=spec.hop_cache_depth)
        return partition.stream_vertex_partition(graph, masks, spec.k, sc, seed=spec.seed)
    sc = partition.StreamConfig(block_size=spec.block_size)
    return partition.stream_block_partition(graph, masks, spec.k, sc, seed=spec.seed)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _partition_schedule(graph, masks, plan, cfg: ExperimentConfig):
    """Per-partition batches: each partition batches its own train set."""
    sub_batches = []
    for p in range(plan.k):
        local_roles = np.where(
            plan.assignment == p, masks.roles, np.int8(3)
        )  # NONE outside p
        local = VertexMasks(roles=local_roles)
        if len(local.train_ids) == 0:
            continue
        if cfg.batch_policy == "cluster":
            batches = batching.select_batches(
                local,
                cfg.batch_size,
                policy="cluster",
                cluster_plan=None,
                seed=cfg.batch_seed,
                graph=graph,
            )
        else:
            batches = batching.select_batches(
                local, cfg.batch_size, policy="random", seed=cfg.batch_seed
            )
        sub_batches.extend((p, b) for b in batches)
    return sub_batches


def run_experiment(config: ExperimentConfig, config_path: str | None = None) -> dict:
    """Run the whole grid; returns the manifest dict (also written to disk).

    Each (partition, sampler, cache) grid point is isolated: an error there
    is recorded in the manifest and the run continues with the next point.
    """
    root = os.environ.get(OUTPUT_ROOT_ENV)
    out_dir = Path(config.output_dir)
    if root and not out_dir.is_absolute():
        out_dir = Path(root) / out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "plans").mkdir(exist_ok=True)

    graph = _build_graph(config)
    masks = _build_masks(config, graph)

    manifest: dict = {
        "config": config.resolved(),
        "config_path": str(config_path) if config_path else None,
        "outputs": [],
        "errors": [],
    }

    def emit(path: Path, kind: str, **coords) -> None:
        manifest["outputs"].append(
            {"path": str(path.relative_to(out_dir)), "kind": kind, **coords}
        )

    part_rows = []
    pmetric_rows = []
    comp_rows = []
    comm_rows = []
    transfer_rows = []
    block_rows = []
    pipe_rows = []

    cost_model = transfer.PipelineCostModel(
        bp_per_edge=config.bp_per_edge,
        dt_per_byte=config.dt_per_byte,
        nn_per_edge=config.nn_per_edge,
    )

    for pspec in config.partitions:
        try:
            t0 = time.perf_counter()
            plan = _run_partition(graph, masks, pspec)
            wall = time.perf_counter() - t0 if config.timing else 0.0
        except Exception as exc:  # keep the rest of the grid alive
            manifest["errors"].append(
                {"partition": pspec.name, "stage": "partition", "message": str(exc)}
            )
            continue

        plan_path = out_dir / "plans" / f"{pspec.name}.plan"
        partition.save_plan(plan_path, plan)
        emit(plan_path, "plan", partition=pspec.name)

        cut = metrics.edge_cut(graph, plan)
        sets = [plan.partition_vertices(p) for p in range(plan.k)]
        cstats = metrics.clustering_stats(graph, [s for s in sets if len(s)])
        pmetric_rows.append([pspec.name, pspec.method, plan.k, cut,
                             cstats.variance, wall])
        for p in range(plan.k):
            part_rows.append(
                [pspec.name, p, int(plan.vertex_counts[p]), int(plan.edge_counts[p]),
                 int(plan.train_counts[p]), int(plan.val_counts[p]),
                 int(plan.test_counts[p])]
            )

        for sspec in config.samplers:
            coords = {"partition": pspec.name, "sampler": sspec.name}
            try:
                sampler = sspec.to_sampler()
                owned = _partition_schedule(graph, masks, plan, config)
                subgraphs = []
                bid = 0
                for epoch in range(config.sample_epochs):
                    for owner, batch in owned:
                        sg = batching.sample_subgraph(
                            graph, batch, sampler, config.batch_seed,
                            epoch=epoch, batch_id=bid, owner=owner,
                        )
                        subgraphs.append(sg)
                        bid += 1
                if config.dump_subgraphs:
                    sg_dir = out_dir / "subgraphs" / f"{pspec.name}__{sspec.name}"
                    sg_dir.mkdir(parents=True, exist_ok=True)
                    for i, sg in enumerate(subgraphs):
                        sg_path = sg_dir / f"batch_{i:05d}.txt"
                        batching.dump_subgraph(sg, sg_path)
                        emit(sg_path, "subgraph", batch=i, **coords)

                load = metrics.comp_load(graph, plan, subgraphs)
                cols, body = load.rows()
                for row in body:
                    comp_rows.append([pspec.name, sspec.name, *row])
                comm = metrics.comm_load(graph, plan, subgraphs)
                cols, body = comm.rows()
                for row in body:
                    comm_rows.append([pspec.name, sspec.name, *row])

                frontiers = [sg.input_frontier for sg in subgraphs]
                for policy in config.cache_policies:
                    for ratio in config.cache_ratios:
                        cache_cfg = transfer.CachePolicyConfig(
                            policy=policy,
                            capacity_ratio=ratio,
                            presample_epochs=config.presample_epochs,
                            presample_batch_size=config.presample_batch_size,
                            seed=config.cache_seed,
                        )
                        cache = transfer.build_cache(graph, cache_cfg, sampler, masks)
                        rep = transfer.simulate_transfer(
                            frontiers, cache, graph.feature_dim
                        )
                        transfer_rows.append(
                            [pspec.name, sspec.name, policy, ratio,
                             rep.total_requested, rep.total_hits,
                             rep.total_transferred, rep.hit_rate,
                             rep.transferred_bytes_zero_copy,
                             rep.transferred_bytes_explicit]
                        )
                        act = transfer.block_activity(
                            frontiers, graph.num_vertices, graph.feature_dim,
                            cache=cache, block_bytes=config.block_bytes,
                            thresholds=config.thresholds,
                        )
                        for i, t in enumerate(act.thresholds):
                            block_rows.append(
                                [pspec.name, sspec.name, policy, ratio, t,
                                 float(act.eligible_before[i]),
                                 float(act.eligible_after[i])]
                            )
                        costs = np.array(
                            [
                                transfer.estimate_stage_costs(
                                    sg, cost_model, graph.feature_dim, cache=cache
                                )
                                for sg in subgraphs
                            ]
                        )
                        seq = transfer.simulate_pipeline(costs, mode="sequential")
                        pipe = transfer.simulate_pipeline(costs, mode="pipelined")
                        speedup = (
                            seq.makespan / pipe.makespan if pipe.makespan > 0 else 1.0
                        )
                        for tl in (seq, pipe):
                            pipe_rows.append(
                                [pspec.name, sspec.name, policy, ratio, tl.mode,
                                 tl.makespan, *map(float, tl.busy_fraction), speedup]
                            )
            except Exception as exc:
                manifest["errors"].append(
                    {**coords, "stage": "sampling", "message": str(exc)}
                )
                continue

    # training arms are partition independent
    if config.train_enabled:
        for sspec in config.samplers:
            try:
                adaptive = None
                if config.train_adaptive:
                    adaptive = batching.AdaptiveBatchState(
                        initial_size=config.adaptive_initial,
                        max_size=config.adaptive_max,
                    )
                tconf = model.TrainConfig(
                    epochs=config.train_epochs,
                    lr=config.train_lr,
                    optimizer=config.train_optimizer,
                    batch_size=config.train_batch_size,
                    sampler=sspec.to_sampler(),
                    adaptive=adaptive,
                    hidden=config.train_hidden,
                    seed=config.train_seed,
                )
                log = model.train(graph, masks, tconf)
                rows = log.rows()
                if not config.timing:
                    rows = [r[:-1] + [0.0] for r in rows]
                tpath = out_dir / f"trainlog_{sspec.name}.csv"
                write_csv(tpath, list(log.COLUMNS), rows)
                emit(tpath, "trainlog", sampler=sspec.name)
            except Exception as exc:
                manifest["errors"].append(
                    {"sampler": sspec.name, "stage": "train", "message": str(exc)}
                )

    tables = [
        ("partition_summary.csv", "partition_summary",
         ["partition_spec", "partition_id", "vertices", "edges", "train", "val", "test"],
         part_rows),
        ("partition_metrics.csv", "partition_metrics",
         ["partition_spec", "method", "k", "edge_cut", "clustering_variance", "wall_time_s"],
         pmetric_rows),
        ("comp_load.csv", "comp_load",
         ["partition_spec", "sampler_spec", "partition_id", "sampled_vertices",
          "sampled_edges", "local_requests", "remote_requests"],
         comp_rows),
        ("comm_load.csv", "comm_load",
         ["partition_spec", "sampler_spec", "partition_id", "sent_vertices",
          "sent_feature_bytes", "sent_subgraph_edges"],
         comm_rows),
        ("transfer.csv", "transfer",
         ["partition_spec", "sampler_spec", "cache_policy", "cache_ratio",
          "requested", "hits", "transferred", "hit_rate",
          "bytes_zero_copy", "bytes_explicit"],
         transfer_rows),
        ("block_activity.csv", "block_activity",
         ["partition_spec", "sampler_spec", "cache_policy", "cache_ratio",
          "threshold", "eligible_before", "eligible_after"],
         block_rows),
        ("pipeline.csv", "pipeline",
         ["partition_spec", "sampler_spec", "cache_policy", "cache_ratio",
          "mode", "makespan", "busy_bp", "busy_dt", "busy_nn", "speedup"],
         pipe_rows),
    ]
    for fname, kind, cols, rows in tables:
        path = out_dir / fname
        write_csv(path, cols, rows)
        emit(path, kind)

    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest["manifest_path"] = str(manifest_path)
    return manifest
