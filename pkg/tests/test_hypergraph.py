import cmath
import math

import networkx as nx
import numpy as np
import pytest
from networkx.generators.atlas import graph_atlas_g

from oracles import brute_independent_counts, hop_oracle, stirling_explicit
from zerofree import (
    ConvergenceError,
    DomainError,
    Hypergraph,
    Polynomial,
    QuadratureSpec,
    ResourceError,
    activity_zero_report,
    build_embedding,
    closed_form_Z,
    embedding_integrals,
    independence_polynomial,
    independent_set_counts,
    partition_function,
    polynomial_roots,
    stirling2,
    stirling_sum_check,
)
from zerofree.series import configuration_integrals

SINGLE_EDGE = Hypergraph(2, ((1, 2),), 2)
TRIANGLE = Hypergraph(3, ((1, 2), (1, 3), (2, 3)), 2)
EDGE3 = Hypergraph(3, ((1, 2, 3),), 3)


def connected_graphs(max_nodes=6):
    for g in graph_atlas_g():
        n = g.number_of_nodes()
        if 1 <= n <= max_nodes and nx.is_connected(g):
            yield Hypergraph(n, tuple((u + 1, v + 1) for u, v in g.edges()), 2)


THREE_UNIFORM = [
    EDGE3,
    Hypergraph(4, ((1, 2, 3), (2, 3, 4)), 3),
    Hypergraph(5, ((1, 2, 3), (1, 2, 4), (3, 4, 5)), 3),
]


def test_degree_and_hops():
    assert SINGLE_EDGE.max_degree() == 1 and SINGLE_EDGE.hop_distance(1, 2) == 1
    assert TRIANGLE.max_degree() == 2
    assert EDGE3.hop_distance(1, 3) == 1


def test_hops_match_floyd_warshall():
    rng = np.random.default_rng(0)
    for _ in range(30):
        n = int(rng.integers(2, 8))
        pairs = [(u, v) for u in range(1, n + 1) for v in range(u + 1, n + 1)]
        chosen = [pairs[i] for i in np.flatnonzero(rng.random(len(pairs)) < 0.4)]
        G = Hypergraph(n, tuple(chosen), 2)
        hops = G.hop_matrix()
        for u in range(1, n + 1):
            for v in range(1, n + 1):
                ref = hop_oracle(n, chosen, u, v)
                assert hops[u - 1, v - 1] == (-1 if ref == math.inf else ref)


def test_hop_distance_disconnected():
    with pytest.raises(DomainError):
        Hypergraph(3, ((1, 2),), 2).hop_distance(1, 3)


@pytest.mark.parametrize(
    "text",
    ["", "2", "2 2\n1 3", "2 2\n1 1", "2 2\n1 2\n2 1", "3 3\n1 2", "2 x\n1 2", "0 2"],
)
def test_parse_errors(text):
    with pytest.raises(DomainError):
        Hypergraph.parse(text)


def test_parse_roundtrip_with_comments():
    G = Hypergraph.parse("# a path\n4 2\n\n1 2\n2 3  # middle\n3 4\n")
    assert G.edges == ((1, 2), (2, 3), (3, 4))
    assert Hypergraph.parse(G.format()) == G


def test_counts_examples():
    assert independent_set_counts(SINGLE_EDGE) == [1, 2]
    assert independent_set_counts(TRIANGLE) == [1, 3]
    assert independent_set_counts(EDGE3) == [1, 3, 3]
    assert independence_polynomial(EDGE3)(0) == 1


def test_counts_match_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(60):
        k = int(rng.integers(2, 4))
        n = int(rng.integers(k, 11))
        pool = [tuple(sorted(rng.choice(np.arange(1, n + 1), k, replace=False).tolist())) for _ in range(12)]
        edges = tuple(sorted(set(pool))[: int(rng.integers(0, 10))])
        G = Hypergraph(n, edges, k)
        assert independent_set_counts(G) == brute_independent_counts(n, edges)


def test_enumeration_cap():
    big = Hypergraph(26, tuple((i, i + 1) for i in range(1, 26)), 2)
    with pytest.raises(ResourceError):
        independent_set_counts(big)
    path25 = Hypergraph(25, tuple((i, i + 1) for i in range(1, 25)), 2)
    # path independent sets are Fibonacci numbers
    assert sum(independent_set_counts(path25)) == 196418


def test_stirling_examples():
    assert stirling2(3, 2) == 3
    for m in range(1, 20):
        assert stirling2(m, m) == 1 and stirling2(m, 1) == 1
    assert stirling2(0, 0) == 1 and stirling2(2, 5) == 0


def test_stirling_matches_explicit_formula():
    for m in range(0, 41):
        for l in range(0, m + 1):
            assert stirling2(m, l) == stirling_explicit(m, l)
    assert stirling2(64, 30) == stirling_explicit(64, 30)


def test_stirling_limits():
    with pytest.raises(DomainError):
        stirling2(65, 2)


@pytest.mark.parametrize("x", [0.1, 0.5, 1.0])
@pytest.mark.parametrize("l", range(1, 7))
def test_stirling_sum(x, l):
    assert stirling_sum_check(x, l, 40) <= 1e-12


def test_closed_form_examples():
    assert closed_form_Z(SINGLE_EDGE, math.log(2)) == pytest.approx(3, abs=1e-14)
    assert closed_form_Z(SINGLE_EDGE, 0) == 1
    assert closed_form_Z(EDGE3, math.log(2)) == pytest.approx(7, abs=1e-13)


def test_closed_form_is_polynomial_composition():
    lams = [0.1, 0.1 + 0.1j, -0.4 + 0.3j, 1.2j]
    graphs = list(connected_graphs()) + THREE_UNIFORM
    assert len(graphs) == 146
    for G in graphs:
        poly = independence_polynomial(G)
        for lam in lams:
            direct = poly(cmath.exp(lam) - 1)
            assert abs(closed_form_Z(G, lam) - direct) <= 1e-12 * max(1.0, abs(direct))


def test_roots_examples():
    assert np.allclose(polynomial_roots(Polynomial((1, 2))), [-0.5], atol=1e-15)
    r = polynomial_roots(Polynomial((1, 3, 3)))
    assert np.allclose(np.abs(r), 1 / math.sqrt(3), atol=1e-14)
    assert np.allclose(sorted(r, key=lambda z: z.imag), [(-3 - 1j * math.sqrt(3)) / 6, (-3 + 1j * math.sqrt(3)) / 6])
    assert np.allclose(polynomial_roots(Polynomial((2, -3, 1))), [1, 2], atol=1e-14)


def test_roots_complete_with_multiplicity():
    p = Polynomial((1, 4, 6, 4, 1))  # (1 + z)^4
    assert polynomial_roots(p).tolist() == [-1, -1, -1, -1]
    q = Polynomial((0, 0, 1, 1))  # z^2 (1 + z)
    assert sorted(polynomial_roots(q).real.tolist()) == [-1, 0, 0]


def test_roots_residuals_on_corpus():
    for G in connected_graphs():
        p = independence_polynomial(G)
        if p.degree == 0:
            continue
        roots = polynomial_roots(p)
        assert len(roots) == p.degree
        assert np.all(np.abs(p(roots)) <= 1e-8 * max(p.coeffs))


def test_roots_errors():
    with pytest.raises(DomainError):
        polynomial_roots(Polynomial((3,)))
    with pytest.raises(DomainError):
        polynomial_roots(Polynomial(tuple([1] * 70)))
    assert issubclass(ConvergenceError, ArithmeticError)


def test_embedding_single_edge():
    space, pot, region = build_embedding(SINGLE_EDGE, 10.0)
    assert region.volume == 2.0
    assert space.ball_volume(10.0) == 2.0
    assert pot.hamiltonian([2.2, 2.7]) == 0.0
    assert pot.hamiltonian([2.2, 4.7]) == math.inf


def test_embedding_ball_volume_is_degree_plus_one():
    for G in connected_graphs(5):
        space, _, _ = build_embedding(G, 10.0)
        assert space.ball_volume(10.0) == G.max_degree() + 1


def test_embedding_range_claim():
    rng = np.random.default_rng(2)
    for G in THREE_UNIFORM + [TRIANGLE, Hypergraph(4, ((1, 2), (2, 3), (3, 4)), 2)]:
        space, pot, _ = build_embedding(G, 10.0)
        v = rng.integers(1, G.n_vertices + 1, (20000, G.k))
        x = (2 * v + rng.uniform(0, 1, v.shape))[..., None]
        hit = np.isinf(pot.evaluate(x))
        assert np.all(space.diameter(x)[hit] <= pot.range)
        assert hit.any()


def test_embedding_disconnected_rejected():
    with pytest.raises(DomainError):
        build_embedding(Hypergraph(3, ((1, 2),), 2), 10.0)


@pytest.mark.parametrize("resolution", [1, 3])
def test_embedding_integrals_exact(resolution):
    G = Hypergraph(4, ((1, 2), (2, 3), (3, 4)), 2)
    space, pot, region = build_embedding(G, 10.0)
    ints = configuration_integrals(region, pot, 5, QuadratureSpec(resolution=resolution), 1)
    assert np.allclose(ints, embedding_integrals(independent_set_counts(G), 5), rtol=1e-13, atol=0)


def test_embedding_partition_matches_closed_form():
    for G, K in ((SINGLE_EDGE, 12), (TRIANGLE, 8), (EDGE3, 8)):
        space, pot, region = build_embedding(G, 10.0)
        for lam in (0.1, 0.1 + 0.1j):
            res = partition_function(space, region, pot, lam, K=K, quad=QuadratureSpec(resolution=1))
            assert abs(res.value - closed_form_Z(G, lam)) <= res.tail_bound + 1e-2


def test_zero_report_single_edge():
    rep = activity_zero_report(SINGLE_EDGE)
    assert rep.lambda_min_modulus == pytest.approx(math.log(2), abs=1e-12)
    assert rep.bound == pytest.approx(1 / (2 * math.e))
    assert rep.passed and rep.branches_considered == 3
    assert rep.real_lambda_zeros == pytest.approx((-math.log(2),))


def test_zero_report_edgeless_is_vacuous():
    rep = activity_zero_report(Hypergraph(3, (), 2))
    assert rep.lambda_min_modulus == math.inf and rep.passed
    assert np.all(rep.z_roots == -1)


def test_zero_report_three_uniform_bound_choice():
    rep = activity_zero_report(EDGE3)
    assert rep.max_degree == 1
    assert rep.bound == pytest.approx(1 / (2 * math.e))
    assert rep.ball_bound == pytest.approx(1 / (3 * math.e))
    assert rep.passed


def test_zero_reports_pass_on_corpus():
    for G in list(connected_graphs()) + THREE_UNIFORM:
        rep = activity_zero_report(G)
        assert rep.lambda_min_modulus >= 0
        assert rep.passed, G
