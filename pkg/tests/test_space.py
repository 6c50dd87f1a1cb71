import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zerofree import DomainError, EuclideanBox, Hypergraph, HypergraphIntervals, QuadratureSpec, ResourceError
from zerofree.space import OpenBall, Region, iter_quadrature, quadrature_nodes


@pytest.fixture
def line():
    return EuclideanBox((0.0,), (1.0,))


@pytest.fixture
def edge_space():
    return HypergraphIntervals(Hypergraph(2, ((1, 2),), 2), 10.0)


def test_euclidean_distance(line):
    assert line.distance(0.2, 0.5) == pytest.approx(0.3, abs=1e-15)


def test_distance_outside_carrier(line):
    with pytest.raises(DomainError):
        line.distance(0.2, 1.5)


def test_interval_distance_same_interval(edge_space):
    assert edge_space.distance(2.25, 2.75) == pytest.approx(0.5, abs=1e-14)


def test_interval_distance_adjacent(edge_space):
    # (R/10) * (8 * 1 + 0.5/10 + 0.5/10)
    assert edge_space.distance(2.5, 4.5) == pytest.approx(8.1, abs=1e-12)


def test_interval_gap_is_outside(edge_space):
    with pytest.raises(DomainError):
        edge_space.distance(3.5, 4.5)


def test_right_endpoint_belongs_to_its_vertex(edge_space):
    assert edge_space.vertex_of(np.array(3.0)) == 1
    assert edge_space.distance(2.0, 3.0) == pytest.approx(1.0)


def test_ball_volume_euclidean():
    assert EuclideanBox((0.0,), (1.0,)).ball_volume(0.5) == 1.0
    assert EuclideanBox((0.0, 0.0), (1.0, 1.0)).ball_volume(1.0) == pytest.approx(math.pi, rel=1e-15)
    assert EuclideanBox((0.0,) * 3, (1.0,) * 3).ball_volume(1.0) == pytest.approx(4 * math.pi / 3)


def test_ball_volume_graph_is_degree_plus_one():
    star = Hypergraph(4, ((1, 2), (1, 3), (1, 4)), 2)
    assert star.max_degree() == 3
    assert HypergraphIntervals(star, 10.0).ball_volume(10.0) == 4.0
    assert HypergraphIntervals(Hypergraph(2, ((1, 2),), 2), 10.0).ball_volume(10.0) == 2.0


def test_ball_volume_three_uniform_counts_neighbours():
    # one edge of size 3: every vertex has two neighbours within range
    space = HypergraphIntervals(Hypergraph(3, ((1, 2, 3),), 3), 10.0)
    assert space.ball_volume(10.0) == 3.0


def test_ball_volume_matches_sampled_supremum():
    G = Hypergraph(4, ((1, 2), (2, 3), (3, 4)), 2)
    space = HypergraphIntervals(G, 10.0)
    grid = np.concatenate([2 * j + np.linspace(0, 1, 201) for j in range(1, 5)])
    for r in (0.3, 1.0, 8.5, 10.0, 17.0):
        d = space._dist(grid[:, None, None], grid[None, :, None])
        sampled = ((d <= r).sum(axis=1) / 200.0).max()
        assert space.ball_volume(r) == pytest.approx(sampled, abs=0.02)


def test_ordering_examples():
    space = EuclideanBox((0.0,), (1.0,))
    assert space.ordering_D([0.2, 0.5]) == pytest.approx(0.7)
    assert space.ordering_D([0.4]) == pytest.approx(space.distance(0.0, 0.4))
    assert space.ordering_D(np.zeros((0, 1))) == 0.0
    d1, d2, d12 = space.ordering_D([0.2]), space.ordering_D([0.5]), space.ordering_D([0.2, 0.5])
    assert d1 < d2 < d12


def test_default_base_hypergraph_is_first_interval(edge_space):
    assert edge_space.ordering_base.tolist() == [2.0]


def test_disconnected_graph_rejected():
    with pytest.raises(DomainError):
        HypergraphIntervals(Hypergraph(3, ((1, 2),), 2), 10.0)


def test_metric_axioms_random_triples():
    rng = np.random.default_rng(0)
    box = EuclideanBox((0.0, 0.0), (1.0, 2.0))
    p, q, r = (rng.uniform([0, 0], [1, 2], (10**4, 2)) for _ in range(3))
    G = Hypergraph(5, ((1, 2), (2, 3), (3, 4), (4, 5), (1, 5)), 2)
    hyp = HypergraphIntervals(G, 3.0)

    def sample():
        v = rng.integers(1, 6, 10**4)
        return (2 * v + rng.uniform(0, 1, 10**4))[:, None]

    for space, (a, b, c) in ((box, (p, q, r)), (hyp, (sample(), sample(), sample()))):
        dab, dba, dbc, dac = space._dist(a, b), space._dist(b, a), space._dist(b, c), space._dist(a, c)
        assert np.all(dab >= 0)
        assert np.array_equal(dab, dba)
        assert np.all(dac <= dab + dbc + 1e-12)
        assert np.all(space._dist(a, a) == 0)


def test_ordering_strict_total_order_on_subsets():
    rng = np.random.default_rng(1)
    space = EuclideanBox((0.0, 0.0), (1.0, 1.0))
    for _ in range(2000):
        k = rng.integers(1, 5)
        x = rng.uniform(0, 1, (k, 2))
        values = sorted(
            space.ordering(x[list(s)]) for r in range(1, k + 1) for s in itertools.combinations(range(k), r)
        )
        assert np.all(np.diff(values) > 1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=6), st.randoms())
def test_ordering_permutation_invariant(values, rnd):
    space = EuclideanBox((0.0,), (1.0,))
    x = np.array(values)[:, None]
    perm = list(range(len(values)))
    rnd.shuffle(perm)
    assert math.isclose(space.ordering(x), space.ordering(x[perm]), rel_tol=1e-15, abs_tol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=4), st.lists(st.floats(0, 1), min_size=1, max_size=4))
def test_ordering_additive(a, b):
    space = EuclideanBox((0.0,), (1.0,))
    xa, xb = np.array(a)[:, None], np.array(b)[:, None]
    joined = np.concatenate([xa, xb])
    assert space.ordering(joined) == pytest.approx(space.ordering(xa) + space.ordering(xb), abs=1e-12)


def test_region_volume_exact():
    space = EuclideanBox((0.0, 0.0), (2.0, 3.0))
    assert space.box((0.5, 1.0), (1.5, 3.0)).volume == 2.0
    G = Hypergraph(3, ((1, 2), (2, 3)), 2)
    hyp = HypergraphIntervals(G, 1.0)
    assert hyp.carrier().volume == 3.0
    assert hyp.vertices([1, 3]).volume == 2.0


def test_region_outside_space_rejected():
    with pytest.raises(DomainError):
        EuclideanBox((0.0,), (1.0,)).box((0.5,), (1.5,))


def test_midpoint_nodes_small():
    space = EuclideanBox((0.0,), (1.0,))
    pts, w = quadrature_nodes(space.carrier(), QuadratureSpec(resolution=2), 1)
    assert pts[:, 0, 0].tolist() == [0.25, 0.75]
    assert w.tolist() == [0.5, 0.5]
    pts, w = quadrature_nodes(space.carrier(), QuadratureSpec(resolution=2), 2)
    assert pts.shape == (4, 2, 1)
    assert np.all(w == 0.25)


@pytest.mark.parametrize("scheme,res", [("tensor_midpoint", 7), ("quasi_random", 1024)])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_weights_sum_to_volume_power(scheme, res, k):
    space = EuclideanBox((0.0, -1.0), (2.0, 0.5))
    region = space.box((0.5, -1.0), (2.0, 0.0))
    spec = QuadratureSpec(scheme, res if scheme == "quasi_random" else 3, seed=5)
    pts, w = quadrature_nodes(region, spec, k)
    assert abs(w.sum() - region.volume**k) <= 1e-12 * region.volume**k
    assert np.all(region.contains(pts))


def test_quadrature_reproducible():
    space = HypergraphIntervals(Hypergraph(3, ((1, 2), (2, 3)), 2), 1.0)
    spec = QuadratureSpec("quasi_random", 256, seed=3)
    a = quadrature_nodes(space.carrier(), spec, 2)
    b = quadrature_nodes(space.carrier(), spec, 2)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    c = quadrature_nodes(space.carrier(), QuadratureSpec("quasi_random", 256, seed=4), 2)
    assert not np.array_equal(a[0], c[0])


def test_chunking_does_not_change_nodes():
    space = EuclideanBox((0.0,), (1.0,))
    full = quadrature_nodes(space.carrier(), QuadratureSpec(resolution=5), 3)
    parts = list(iter_quadrature(space.carrier(), QuadratureSpec(resolution=5, chunk_size=7), 3))
    assert np.array_equal(np.concatenate([p for p, _ in parts]), full[0])


def test_budget_exceeded_reports_requirement():
    space = EuclideanBox((0.0,), (1.0,))
    with pytest.raises(ResourceError) as info:
        quadrature_nodes(space.carrier(), QuadratureSpec(resolution=100, max_nodes=1000), 2)
    assert info.value.required == 10**4 and info.value.limit == 1000


def test_open_ball_is_open():
    space = EuclideanBox((0.0,), (1.0,))
    ball = OpenBall(space, np.array([0.0]), 0.5)
    assert ball.contains(np.array([[0.49], [0.5], [0.51]])).tolist() == [True, False, False]


def test_region_union_and_contains():
    space = EuclideanBox((0.0,), (1.0,))
    u = space.box(0.0, 0.2).union(space.box(0.6, 1.0))
    assert isinstance(u, Region)
    assert u.volume == pytest.approx(0.6)
    assert u.contains(np.array([[0.1], [0.4], [0.7]])).tolist() == [True, False, True]
