"""Metrics against hand counts and brute-force oracles."""

import numpy as np
import pytest

from gnnbench import (
    SamplerConfig,
    clustering_stats,
    comm_load,
    comp_load,
    edge_cut,
    hash_partition,
    sample_subgraph,
    summarize,
)
from gnnbench.metrics import FEATURE_BYTES
from gnnbench.partition import PartitionPlan
from gnnbench.graphs import VertexMasks

from conftest import random_graph, roles_of


def plan_from(graph, assignment, cache_sets=None):
    masks = VertexMasks(roles=np.full(graph.num_vertices, 3, dtype=np.int8))
    return PartitionPlan.from_assignment(
        graph, masks, np.asarray(assignment, dtype=np.int64),
        int(max(assignment)) + 1, "manual", 0, None, cache_sets,
    )


# edge cut -------------------------------------------------------------------


def test_edge_cut_g6_cases(g6):
    assert edge_cut(g6, plan_from(g6, [0, 0, 0, 1, 1, 1])) == 1
    assert edge_cut(g6, plan_from(g6, [0, 1, 0, 1, 0, 1])) == 5
    assert edge_cut(g6, plan_from(g6, [0, 0, 0, 0, 0, 0])) == 0


def test_edge_cut_identity():
    g = random_graph(60, 0.1, seed=2)
    plan = hash_partition(g, 4, seed=1)
    intra = 0
    for v in range(60):
        for u in g.neighbors(v):
            if v < int(u) and plan.assignment[v] == plan.assignment[int(u)]:
                intra += 1
    assert edge_cut(g, plan) == g.num_edges // 2 - intra


def test_edge_cut_accepts_raw_assignment(g6):
    assert edge_cut(g6, np.array([0, 0, 0, 1, 1, 1])) == 1


# clustering -----------------------------------------------------------------


def brute_cc(graph, members):
    members = set(int(v) for v in members)
    vals = {}
    for v in members:
        nbrs = [int(u) for u in graph.neighbors(v) if int(u) in members]
        d = len(nbrs)
        if d < 2:
            vals[v] = 0.0
            continue
        tri = 0
        for i in range(d):
            for j in range(i + 1, d):
                if nbrs[j] in set(graph.neighbors(nbrs[i]).tolist()):
                    tri += 1
        vals[v] = tri / (d * (d - 1) / 2)
    return vals


def test_cc_g6_hand_values(g6):
    stats = clustering_stats(g6)
    assert stats.set_values[0].tolist() == pytest.approx(
        [1, 1, 1 / 3, 1 / 3, 1, 1]
    )
    assert stats.mean == pytest.approx(7 / 9)


def test_cc_star_center():
    g = random_graph(1, 0, seed=0)
    from gnnbench import load_graph

    g = load_graph([(0, i) for i in range(1, 6)], num_vertices=6)
    stats = clustering_stats(g, [np.arange(6)])
    assert stats.set_values[0][0] == 0.0


def test_cc_identical_sets_zero_variance(g6):
    sets = [np.arange(6), np.arange(6)]
    stats = clustering_stats(g6, sets)
    assert stats.variance == 0.0


def test_cc_brute_force_oracle():
    g = random_graph(40, 0.15, seed=6)
    rng = np.random.default_rng(1)
    sets = [np.sort(rng.choice(40, size=15, replace=False)) for _ in range(3)]
    stats = clustering_stats(g, sets)
    for idx, s in enumerate(sets):
        oracle = brute_cc(g, s)
        got = stats.set_values[idx]
        for pos, v in enumerate(s.tolist()):
            assert got[pos] == pytest.approx(oracle[v])
        assert stats.set_means[idx] == pytest.approx(np.mean(list(oracle.values())))


def test_cc_induced_subgraph_only(g6):
    # inside {1,2,3} the only edges are 1-2 and 2-3: no triangles
    stats = clustering_stats(g6, [np.array([1, 2, 3])])
    assert stats.set_values[0].tolist() == [0.0, 0.0, 0.0]


def test_cc_empty_set_error(g6):
    with pytest.raises(ValueError):
        clustering_stats(g6, [np.array([], dtype=np.int64)])


# summarize ------------------------------------------------------------------


def test_summarize_cases():
    s = summarize([1, 1, 1, 1])
    assert (s.mean, s.variance, s.imbalance) == (1.0, 0.0, 1.0)
    s = summarize([2, 4])
    assert (s.mean, s.variance, s.imbalance) == (3.0, 1.0, 4 / 3)
    s = summarize([0, 0])
    assert s.imbalance == 1.0
    with pytest.raises(ValueError):
        summarize([])


# comp_load ------------------------------------------------------------------


def full_1hop(graph, batch, owner, seed=0):
    cfg = SamplerConfig(method="fanout", fanouts=(10,))
    return sample_subgraph(graph, np.asarray(batch), cfg, seed, owner=owner)


def test_comp_load_single_partition(g6):
    plan = plan_from(g6, [0] * 6)
    sg = full_1hop(g6, [0, 3], owner=0)
    rep = comp_load(g6, plan, [sg])
    assert rep.total_remote == 0
    assert rep.total_local == 5  # deg(0) + deg(3)


def test_comp_load_g6_batch0(g6):
    plan = plan_from(g6, [0, 0, 0, 1, 1, 1])
    rep = comp_load(g6, plan, [full_1hop(g6, [0], owner=0)])
    assert rep.local_requests.tolist() == [2, 0]
    assert rep.remote_requests.tolist() == [0, 0]


def test_comp_load_g6_batch3(g6):
    plan = plan_from(g6, [0, 0, 0, 1, 1, 1])
    rep = comp_load(g6, plan, [full_1hop(g6, [3], owner=1)])
    # sampled srcs {2,4,5}: vertex 2 lives on P0 -> remote request to P0
    assert rep.local_requests.tolist() == [0, 2]
    assert rep.remote_requests.tolist() == [1, 0]


def test_comp_load_sampled_edges_per_owner(g6):
    plan = plan_from(g6, [0, 0, 0, 1, 1, 1])
    sgs = [full_1hop(g6, [0], owner=0), full_1hop(g6, [3], owner=1)]
    rep = comp_load(g6, plan, sgs)
    assert rep.sampled_edges.tolist() == [2, 3]
    assert rep.imbalance >= 1.0


def test_comp_load_batch_order_invariant(g6):
    plan = plan_from(g6, [0, 0, 0, 1, 1, 1])
    sgs = [full_1hop(g6, [0], owner=0), full_1hop(g6, [3], owner=1)]
    a = comp_load(g6, plan, sgs)
    b = comp_load(g6, plan, sgs[::-1])
    assert a.local_requests.tolist() == b.local_requests.tolist()
    assert a.remote_requests.tolist() == b.remote_requests.tolist()


# comm_load ------------------------------------------------------------------


def test_comm_load_single_partition(g6):
    plan = plan_from(g6, [0] * 6)
    rep = comm_load(g6, plan, [full_1hop(g6, [0, 3], owner=0)])
    assert rep.total_bytes == 0


def test_comm_load_one_remote_vertex(g6):
    plan = plan_from(g6, [0, 0, 0, 1, 1, 1])
    cfg = SamplerConfig(method="fanout", fanouts=())
    sg = sample_subgraph(g6, np.array([0, 1, 2, 4]), cfg, seed=0, owner=0)
    rep = comm_load(g6, plan, [sg], feature_dim=8)
    assert rep.sent_vertices.tolist() == [0, 1]
    assert rep.sent_feature_bytes.tolist() == [0, 32]


def test_comm_load_dedup_within_batch(g6):
    plan = plan_from(g6, [0, 0, 0, 1, 1, 1])
    # both 4 and 5 pull vertex 3's feature; it crosses once for the batch
    sg = full_1hop(g6, [4, 5], owner=0)
    assert sg.owner == 0
    rep = comm_load(g6, plan, [sg])
    remote_frontier = [v for v in sg.input_frontier if plan.assignment[v] == 1]
    assert rep.sent_vertices.sum() == len(remote_frontier)


def test_comm_load_counts_per_batch(g6):
    plan = plan_from(g6, [0, 0, 0, 1, 1, 1])
    sg = full_1hop(g6, [3], owner=1)
    rep1 = comm_load(g6, plan, [sg])
    rep2 = comm_load(g6, plan, [sg, sg])
    assert rep2.sent_vertices.sum() == 2 * rep1.sent_vertices.sum()


def test_comm_load_cache_sets_zero_bytes(g6):
    # owner 0 caches {0,1,2,3}: the remote vertex 3 is already local
    cache_sets = [np.array([0, 1, 2, 3]), np.array([2, 3, 4, 5])]
    plan = plan_from(g6, [0, 0, 0, 1, 1, 1], cache_sets=cache_sets)
    sg = full_1hop(g6, [2], owner=0)  # frontier includes 3
    rep = comm_load(g6, plan, [sg])
    assert rep.total_bytes == 0


def test_comm_load_brute_force_oracle():
    g = random_graph(50, 0.1, seed=9)
    plan = hash_partition(g, 3, seed=2)
    cfg = SamplerConfig(method="fanout", fanouts=(3, 2))
    rng = np.random.default_rng(0)
    sgs = []
    for b in range(6):
        batch = np.sort(rng.choice(50, size=5, replace=False))
        owner = b % 3
        sgs.append(sample_subgraph(g, batch, cfg, seed=b, owner=owner))
    rep = comm_load(g, plan, sgs)
    expect = np.zeros(3, dtype=np.int64)
    for sg in sgs:
        for v in sg.input_frontier.tolist():
            p = int(plan.assignment[v])
            if p != sg.owner:
                expect[p] += 1
    assert rep.sent_vertices.tolist() == expect.tolist()
    assert rep.sent_feature_bytes.tolist() == (
        expect * g.feature_dim * FEATURE_BYTES
    ).tolist()


def test_load_report_rows_shape(g6):
    plan = plan_from(g6, [0, 0, 0, 1, 1, 1])
    rep = comp_load(g6, plan, [full_1hop(g6, [0], owner=0)])
    cols, body = rep.rows()
    assert body[-1][0] == "all"
    assert len(body) == 3
    assert len(cols) == len(body[0])
