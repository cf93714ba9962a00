import numpy as np
import pytest

from graphquant.graph import from_edges
from graphquant.kernels import VertexKernel
from graphquant.quantifiers import make_quantifier
from graphquant.sis import SisWeights, class_weights, density_ratio, kde_density

from conftest import path_graph

CONST = VertexKernel("constant")
PPR_HALF = VertexKernel("ppr", alpha=0.5, steps=1)


def labelled_path(n, labels):
    return path_graph(n, labels=labels)


def test_kde_constant_kernel_is_one():
    g = path_graph(5)
    np.testing.assert_array_equal(kde_density(g, [0, 1, 2], [3, 4], CONST), 1.0)


def test_kde_two_node_path():
    assert kde_density(path_graph(2), [0], [0, 1], PPR_HALF)[0] == pytest.approx(0.5)


def test_kde_isolated_self_column():
    g = from_edges([(0, 1)], 3)
    assert kde_density(g, [2], [2], VertexKernel("ppr", alpha=0.3, steps=4))[0] == pytest.approx(1.0)


def test_kde_empty_reference():
    with pytest.raises(ValueError, match="empty"):
        kde_density(path_graph(3), [0], [], CONST)


def test_density_ratio_constant_kernels():
    g = labelled_path(4, [0, 1, 0, 1])
    w = density_ratio(g, [0, 1], [2, 3], CONST, CONST)
    np.testing.assert_array_equal(w.rho, 1.0)


def test_density_ratio_is_q_hat_with_constant_p():
    g = labelled_path(6, [0, 1, 0, 1, 0, 1])
    k = VertexKernel("ppr", alpha=0.2, steps=3)
    w = density_ratio(g, [0, 1, 2], [3, 4, 5], k)
    np.testing.assert_array_equal(w.rho, kde_density(g, [0, 1, 2], [3, 4, 5], k))


def test_density_ratio_three_node_path():
    g = labelled_path(3, [0, 1, 0])
    w = density_ratio(g, [1, 2], [0], PPR_HALF)
    np.testing.assert_allclose(w.rho, [0.5, 0.0], atol=1e-15)


def test_density_ratio_with_p_kernel_and_floor():
    g = labelled_path(3, [0, 1, 0])
    w = density_ratio(g, [1, 2], [0], PPR_HALF, PPR_HALF, floor=1e-12)
    # p_hat(1) = mean(Pi[1,1], Pi[1,2]) = (0.5 + 0.5) / 2, p_hat(2) = mean(0.25, 0.5)
    np.testing.assert_allclose(w.rho, [0.5 / 0.5, 0.0])
    assert np.all(np.isfinite(w.rho))


def test_class_weights_constant_rho_is_uniform():
    w = SisWeights(np.arange(5), np.array([0, 0, 1, 1, 1]), np.full(5, 3.7), 2)
    cw = class_weights(w)
    np.testing.assert_allclose(cw.weights, [0.5, 0.5, 1 / 3, 1 / 3, 1 / 3])
    assert cw.fallback == ()


def test_class_weights_normalizes_within_class():
    w = SisWeights(np.arange(4), np.array([0, 0, 1, 1]), np.array([2.0, 0.0, 1.0, 3.0]), 2)
    np.testing.assert_allclose(class_weights(w).weights, [1.0, 0.0, 0.25, 0.75])


def test_class_weights_zero_class_falls_back():
    w = SisWeights(np.arange(4), np.array([0, 0, 1, 1]), np.array([0.0, 0.0, 1.0, 3.0]), 2)
    cw = class_weights(w)
    np.testing.assert_allclose(cw.weights[:2], [0.5, 0.5])
    assert cw.fallback == (0,)
    assert w.zero_mass_classes == (0,)


def test_class_weights_missing_class():
    w = SisWeights(np.arange(2), np.array([0, 0]), np.ones(2), 2)
    with pytest.raises(ValueError):
        class_weights(w)


@pytest.mark.parametrize("c", [1e-6, 1.0, 1e6, 3.3, 2.0**-40])
def test_class_weights_scale_invariance_is_bitwise(c, rng):
    labels = rng.integers(0, 3, size=40)
    labels[:3] = [0, 1, 2]
    w = SisWeights(np.arange(40), labels, rng.random(40), 3)
    a = class_weights(w).weights
    b = class_weights(w.scaled(c)).weights
    assert a.tobytes() == b.tobytes()


def test_constant_kernel_sis_reduces_to_plain(clusters, rng):
    train = np.arange(0, 300, 3)
    test = np.arange(1, 300, 3)
    w = density_ratio(clusters, train, test, CONST, CONST)
    p = rng.dirichlet(np.ones(3), size=train.size)
    pt = rng.dirichlet(np.ones(3), size=50)
    y = clusters.labels[train]
    for kind in ("pacc", "kdey"):
        plain = make_quantifier(kind, p, y).quantify(pt)
        sis = make_quantifier(kind, p, y, sis=w).quantify(pt)
        np.testing.assert_allclose(sis, plain, atol=1e-9)


def test_sis_rejected_by_unweighted_kinds(rng):
    w = SisWeights(np.arange(4), np.array([0, 1, 0, 1]), np.ones(4), 2)
    p = rng.dirichlet(np.ones(2), size=4)
    for kind in ("cc", "pcc", "hdy", "acc", "dm"):
        with pytest.raises(ValueError, match="SIS"):
            make_quantifier(kind, p, [0, 1, 0, 1], sis=w)
