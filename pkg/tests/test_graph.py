import json

import numpy as np
import pytest

from graphquant.graph import (Graph, Split, from_edges, load_graph, make_split, normalized_adjacency,
                              save_graph, split_sizes)

from conftest import path_graph


def _write(path, lines):
    path.write_text("\n".join(lines) + "\n")
    return path


def test_load_two_edges(tmp_path):
    g = load_graph(_write(tmp_path / "e.txt", ["0 1", "1 2"]))
    assert g.num_nodes == 3
    assert g.num_edges == 2


def test_load_dedups_reverse_edge(tmp_path):
    g = load_graph(_write(tmp_path / "e.txt", ["0 1", "1 0"]))
    assert g.num_edges == 1
    assert (g.adjacency != g.adjacency.T).nnz == 0


def test_load_infers_k_from_max_label(tmp_path):
    e = _write(tmp_path / "e.txt", ["0 1", "1 2"])
    lab = _write(tmp_path / "l.txt", ["0", "2", "1"])
    g = load_graph(e, labels_path=lab)
    assert g.num_classes == 3
    np.testing.assert_array_equal(g.labels, [0, 2, 1])


def test_load_drops_self_loops(tmp_path):
    g = load_graph(_write(tmp_path / "e.txt", ["0 0", "0 1"]))
    assert g.num_edges == 1
    assert g.adjacency.diagonal().sum() == 0


def test_load_errors(tmp_path):
    e = _write(tmp_path / "e.txt", ["0 5"])
    lab = _write(tmp_path / "l.txt", ["0", "1"])
    with pytest.raises(ValueError, match="out of range"):
        load_graph(e, labels_path=lab)
    feats = _write(tmp_path / "f.csv", ["1.0,2.0"] * 3)
    with pytest.raises(ValueError, match="mismatch"):
        load_graph(_write(tmp_path / "e2.txt", ["0 1"]), feats, lab)
    with pytest.raises(ValueError):
        load_graph(_write(tmp_path / "f2.txt", ["0 x"]))
    with pytest.raises(ValueError):
        load_graph(_write(tmp_path / "e3.txt", ["0 1"]), _write(tmp_path / "f3.csv", ["1,a", "2,3"]))


def test_every_class_must_occur():
    with pytest.raises(ValueError):
        from_edges([(0, 1)], 2, labels=[0, 0], num_classes=2)


def test_save_load_roundtrip(tmp_path, rng):
    g = from_edges([(0, 1), (1, 2), (3, 1)], 4, features=rng.normal(size=(4, 3)), labels=[0, 1, 1, 0])
    save_graph(g, tmp_path / "e", tmp_path / "f", tmp_path / "l")
    h = load_graph(tmp_path / "e", tmp_path / "f", tmp_path / "l")
    np.testing.assert_array_equal(h.edge_list(), g.edge_list())
    np.testing.assert_array_equal(h.features, g.features)
    np.testing.assert_array_equal(h.labels, g.labels)


def test_normalized_adjacency_path():
    np.testing.assert_array_equal(normalized_adjacency(path_graph(2)).toarray(), [[0, 1], [1, 0]])


def test_normalized_adjacency_triangle():
    a = normalized_adjacency(from_edges([(0, 1), (1, 2), (0, 2)], 3)).toarray()
    np.testing.assert_allclose(a, (np.ones((3, 3)) - np.eye(3)) / 2)


def test_normalized_adjacency_isolated_column_is_basis():
    a = normalized_adjacency(from_edges([(0, 1)], 3)).toarray()
    np.testing.assert_array_equal(a[:, 2], [0, 0, 1])
    np.testing.assert_allclose(a.sum(axis=0), 1.0)


@pytest.mark.parametrize("n,expected", [(1000, [50, 150, 800]), (20, [1, 3, 16])])
def test_split_sizes(n, expected):
    np.testing.assert_array_equal(split_sizes(n, (0.05, 0.15, 0.80)), expected)


def test_split_sizes_within_one_of_ideal():
    for n in range(1, 200):
        sizes = split_sizes(n, (0.05, 0.15, 0.80))
        assert sizes.sum() == n
        assert np.all(np.abs(sizes - n * np.array([0.05, 0.15, 0.80])) < 1)


def test_split_ratio_validation():
    with pytest.raises(ValueError, match="sum"):
        split_sizes(10, (0.5, 0.4, 0.2))


def test_make_split_partitions_and_is_deterministic():
    g = path_graph(20)
    s1, s2 = make_split(g, seed=3), make_split(g, seed=3)
    parts = [s1.classifier_train, s1.quantifier_train, s1.quantifier_test_pool]
    np.testing.assert_array_equal(np.sort(np.concatenate(parts)), np.arange(20))
    assert [p.size for p in parts] == [1, 3, 16]
    for a, b in zip(parts, [s2.classifier_train, s2.quantifier_train, s2.quantifier_test_pool]):
        np.testing.assert_array_equal(a, b)
    assert not np.array_equal(make_split(g, seed=4).quantifier_test_pool, s1.quantifier_test_pool)


def test_split_json_roundtrip(tmp_path):
    s = make_split(path_graph(20), seed=7)
    s.save(tmp_path / "s.json")
    t = Split.load(tmp_path / "s.json")
    assert json.dumps(t.to_json()) == json.dumps(s.to_json())


def test_split_rejects_overlap():
    with pytest.raises(ValueError, match="overlap"):
        Split([0, 1], [1], [2])


def test_graph_rejects_asymmetric():
    import scipy.sparse as sp
    with pytest.raises(ValueError):
        Graph(sp.csr_matrix(np.array([[0, 1], [0, 0]])))
