import numpy as np
import pytest
from scipy import stats

from graphquant.graph import from_edges
from graphquant.kernels import shortest_path_lengths
from graphquant.samplers import (SamplePlan, TestSample, bfs_sample, draw_samples, largest_remainder,
                                 load_samples, random_walk_sample, realized_prevalence, sample_bfs,
                                 sample_pps, sample_rw, save_samples, zipf_prevalence, zipf_weights)
from graphquant.synthetic import cluster_graph

from conftest import path_graph


def test_zipf_hand_value():
    np.testing.assert_allclose(zipf_weights(3, 1.0), [6 / 11, 3 / 11, 2 / 11], atol=1e-12)


def test_zipf_small_s_is_uniform():
    np.testing.assert_allclose(zipf_weights(4, 1e-12), 0.25, atol=1e-9)


def test_zipf_prevalence_is_permuted_weights(rng):
    for _ in range(20):
        q = zipf_prevalence(5, 1.3, rng)
        assert abs(q.sum() - 1) < 1e-12
        np.testing.assert_allclose(np.sort(q), np.sort(zipf_weights(5, 1.3)))
    with pytest.raises(ValueError):
        zipf_prevalence(3, 0.0, rng)


def test_largest_remainder_hand_values():
    np.testing.assert_array_equal(largest_remainder(100, [0.5, 0.5]), [50, 50])
    np.testing.assert_array_equal(largest_remainder(100, [1 / 3] * 3), [34, 33, 33])
    np.testing.assert_array_equal(largest_remainder(11, [6 / 11, 3 / 11, 2 / 11]), [6, 3, 2])


def test_largest_remainder_capacity_redistributes():
    counts = largest_remainder(10, [0.8, 0.1, 0.1], capacity=[3, 10, 10])
    np.testing.assert_array_equal(counts, [3, 4, 3])
    with pytest.raises(ValueError):
        largest_remainder(10, [0.5, 0.5], capacity=[3, 3])


def test_pps_counts_and_bookkeeping(clusters):
    pool = np.arange(clusters.num_nodes)
    samples = sample_pps(clusters, pool, SamplePlan("pps", n=60, seed=4))
    assert len(samples) == 10 * clusters.num_classes
    for s in samples:
        assert np.unique(s.nodes).size == s.nodes.size == 60
        np.testing.assert_array_equal(s.true_prevalence, realized_prevalence(clusters.labels[s.nodes], 3))


def test_pps_rejects_bad_pools(clusters):
    with pytest.raises(ValueError, match="empty"):
        sample_pps(clusters, [], SamplePlan())
    with pytest.raises(ValueError, match="exceeds"):
        sample_pps(clusters, np.arange(50), SamplePlan(n=100))


def test_pps_realized_tracks_target_on_average(clusters):
    pool = np.arange(clusters.num_nodes)
    samples = sample_pps(clusters, pool, SamplePlan("pps", n=100, samples_per_class=334, seed=1))
    target = np.mean([s.extra["target_prevalence"] for s in samples], axis=0)
    realized = np.mean([s.true_prevalence for s in samples], axis=0)
    assert len(samples) >= 1000
    np.testing.assert_allclose(realized, target, atol=1e-2)


def star(n_leaves, labels=None):
    return from_edges([(0, i) for i in range(1, n_leaves + 1)], n_leaves + 1, labels=labels)


def test_rw_star_reachability(rng):
    g = star(6)
    mask = np.ones(7, dtype=bool)
    nodes = random_walk_sample(g, 0, 3, mask, rng)
    assert len(nodes) == 3 and nodes[0] == 0
    assert set(nodes) <= set(range(7))


def test_rw_isolated_start_is_short():
    g = from_edges([(1, 2)], 3, labels=[0, 1, 1])
    out = sample_rw(g, np.arange(3), SamplePlan("rw", n=2, per_label_starts=1))
    iso = [s for s in out if s.start == 0][0]
    np.testing.assert_array_equal(iso.nodes, [0])
    assert iso.short


def test_rw_collects_only_pool_nodes(clusters):
    pool = np.arange(0, 300, 2)
    for s in sample_rw(clusters, pool, SamplePlan("rw", n=40, per_label_starts=3, seed=2)):
        assert set(s.nodes.tolist()) <= set(pool.tolist())
        assert np.unique(s.nodes).size == s.nodes.size


@pytest.mark.parametrize("protocol", ["pps", "rw", "bfs"])
def test_same_seed_same_samples(clusters, protocol):
    plan = SamplePlan(protocol, n=30, per_label_starts=2, samples_per_class=2, seed=9)
    pool = np.arange(40, 300)
    a = draw_samples(clusters, pool, plan)
    b = draw_samples(clusters, pool, plan)
    assert [s.to_json() for s in a] == [s.to_json() for s in b]


def test_bfs_path_order(rng):
    g = path_graph(4)
    assert bfs_sample(g, 0, 3, np.ones(4, dtype=bool), rng) == [0, 1, 2]


def test_bfs_whole_component_flagged():
    g = from_edges([(0, 1), (2, 3)], 4, labels=[0, 0, 1, 1])
    out = sample_bfs(g, np.arange(4), SamplePlan("bfs", n=3, per_label_starts=1))
    for s in out:
        assert s.short and s.nodes.size == 2


def test_bfs_complete_layers_independent_of_seed():
    g = star(5)
    mask = np.ones(6, dtype=bool)
    sets = {frozenset(bfs_sample(g, 0, 6, mask, np.random.default_rng(s))) for s in range(5)}
    assert sets == {frozenset(range(6))}
    orders = {tuple(bfs_sample(g, 0, 6, mask, np.random.default_rng(s))) for s in range(5)}
    assert len(orders) > 1


def test_structural_samples_are_local():
    g = cluster_graph(n_nodes=200, n_clusters=2, p_in=0.08, p_out=0.004, seed=3)
    dist = shortest_path_lengths(g, np.arange(g.num_nodes))
    pool = np.arange(g.num_nodes)
    rng = np.random.default_rng(0)

    def spread(nodes):
        d = dist[np.ix_(nodes, nodes)]
        return d[np.isfinite(d)].mean()

    for protocol in ("rw", "bfs"):
        samples = draw_samples(g, pool, SamplePlan(protocol, n=30, per_label_starts=25, seed=5))
        local = [spread(s.nodes) for s in samples]
        uniform = [spread(rng.choice(pool, 30, replace=False)) for _ in samples]
        assert len(local) == 50
        assert stats.ttest_ind(local, uniform, alternative="less").pvalue < 0.01


def test_sample_json_roundtrip(tmp_path, clusters):
    samples = draw_samples(clusters, np.arange(300), SamplePlan("rw", n=20, per_label_starts=1))
    save_samples(tmp_path / "s.json", samples)
    back = load_samples(tmp_path / "s.json")
    assert [s.to_json() for s in back] == [s.to_json() for s in samples]
    assert isinstance(back[0], TestSample)


def test_plan_validation():
    with pytest.raises(ValueError):
        SamplePlan("snowball")
    with pytest.raises(ValueError):
        SamplePlan(n=0)
    with pytest.raises(ValueError, match="unknown"):
        SamplePlan.from_config({"protocol": "rw", "length": 3})
