from __future__ import annotations

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldp_triangles.graph import (
    Graph,
    GraphFormatError,
    count_4cycles,
    count_kstars,
    count_triangles,
    disjoint_union,
    exact_counts,
    generate_ba,
    load_edge_list,
    sample_induced,
    write_edge_list,
)

import oracles


def parse(text: str) -> Graph:
    return load_edge_list(io.StringIO(text))


def cycle4() -> Graph:
    return Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])


@st.composite
def small_graphs(draw, max_n=12):
    n = draw(st.integers(min_value=0, max_value=max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Graph.from_edges(n, [p for p, keep in zip(pairs, mask) if keep])


class TestLoader:
    def test_triangle_file(self):
        g = parse("0 1\n1 2\n2 0\n")
        assert g.n == 3 and g.num_edges == 3
        assert count_triangles(g) == 1

    def test_duplicates_and_reversed_lines_collapse(self):
        g = parse("0 1\n0 1\n1 0\n")
        assert g.num_edges == 1

    def test_self_loops_dropped(self):
        g = parse("0 0\n0 1\n")
        assert g.num_edges == 1 and list(g.neighbors(0)) == [1]

    def test_header_sets_n(self):
        g = parse("# n=10\n0 1\n")
        assert g.n == 10

    def test_comments_and_blank_lines(self):
        g = parse("# a comment\n\n2 3\n")
        assert g.n == 4 and g.num_edges == 1

    def test_id_beyond_header_is_rejected(self):
        with pytest.raises(GraphFormatError, match="line 2"):
            parse("# n=3\n0 5\n")

    @pytest.mark.parametrize("bad", ["0\n", "a b\n", "0 -1\n"])
    def test_malformed_line_reports_line_number(self, bad):
        with pytest.raises(GraphFormatError, match="line 2"):
            parse("0 1\n" + bad)

    def test_empty_input(self):
        g = parse("")
        assert g.n == 0 and g.num_edges == 0

    def test_round_trip(self):
        g = generate_ba(50, 3, 1)
        buf = io.StringIO()
        write_edge_list(g, buf)
        text = buf.getvalue()
        assert text.startswith("# n=50\n")
        back = parse(text)
        assert np.array_equal(back.indptr, g.indptr) and np.array_equal(back.indices, g.indices)
        # each edge once, smaller id first
        body = [tuple(map(int, line.split())) for line in text.splitlines()[1:]]
        assert all(u < v for u, v in body) and body == sorted(body)


class TestValidator:
    def test_rejects_asymmetric(self):
        g = Graph(np.array([0, 1, 1]), np.array([1]))
        with pytest.raises(ValueError, match="symmetric"):
            g.validate()

    def test_rejects_unsorted(self):
        g = Graph(np.array([0, 2, 3, 4]), np.array([2, 1, 0, 0]))
        with pytest.raises(ValueError, match="ascending"):
            g.validate()

    def test_rejects_loop(self):
        g = Graph(np.array([0, 1]), np.array([0]))
        with pytest.raises(ValueError, match="loop"):
            g.validate()

    @settings(max_examples=50, deadline=None)
    @given(small_graphs())
    def test_constructed_graphs_are_valid(self, g):
        g.validate()


class TestCounters:
    def test_small_fixtures(self):
        assert count_triangles(Graph.complete(3)) == 1
        assert count_triangles(cycle4()) == 0
        assert count_kstars(Graph.complete(3), 2) == 3
        star = Graph.from_edges(5, [(0, i) for i in range(1, 5)])
        assert count_kstars(star, 3) == 4
        assert count_4cycles(cycle4()) == 1
        assert count_4cycles(Graph.complete(4)) == 3

    def test_kstar_rejects_k0(self):
        with pytest.raises(ValueError):
            count_kstars(cycle4(), 0)

    @pytest.mark.parametrize("seed", range(30))
    def test_triangles_match_brute_force_on_gnp(self, seed):
        g = oracles.random_graph(12, 0.4, np.random.default_rng(seed))
        assert count_triangles(g) == oracles.triangles(oracles.adjacency(g))

    @settings(max_examples=100, deadline=None)
    @given(small_graphs(max_n=10))
    def test_all_counters_match_brute_force(self, g):
        a = oracles.adjacency(g)
        assert count_triangles(g) == oracles.triangles(a)
        assert count_kstars(g, 2) == oracles.kstars(a, 2)
        assert count_kstars(g, 3) == oracles.kstars(a, 3)
        assert count_4cycles(g) == oracles.four_cycles(a)
        assert 3 * count_triangles(g) <= count_kstars(g, 2)

    def test_sparse_path_matches_dense_path(self):
        # graphs above 256 nodes use the degree-oriented sparse product
        g = generate_ba(600, 6, 3)
        a = oracles.adjacency(g)
        assert count_triangles(g) == int(np.trace(a @ a @ a)) // 6

    def test_four_cycles_via_closed_walks(self):
        # tr(A^4) = 8 C4 + 2 sum d(d-1) + 2m
        g = generate_ba(300, 5, 2)
        a = oracles.adjacency(g).astype(float)
        d = g.degrees
        walks = int(round(np.trace(np.linalg.matrix_power(a, 4))))
        assert walks == 8 * count_4cycles(g) + 2 * int((d * (d - 1)).sum()) + 2 * g.num_edges

    def test_exact_counts_clustering(self):
        c = exact_counts(Graph.complete(4))
        assert c.triangles == 4 and c.two_stars == 12 and c.clustering_coefficient == 1.0
        assert exact_counts(Graph.empty(3)).clustering_coefficient is None


class TestGenerators:
    def test_ba_is_deterministic(self):
        a, b = generate_ba(500, 4, 9), generate_ba(500, 4, 9)
        assert np.array_equal(a.indices, b.indices) and np.array_equal(a.indptr, b.indptr)

    def test_ba_seed_changes_graph(self):
        assert not np.array_equal(generate_ba(500, 4, 1).indices, generate_ba(500, 4, 2).indices)

    def test_ba_edge_count(self):
        n, m = 5000, 7
        g = generate_ba(n, m, 0)
        g.validate()
        assert g.num_edges == m * (m - 1) // 2 + (n - m) * m
        assert abs(g.num_edges - (n - m) * m) / ((n - m) * m) < 0.01

    def test_ba_complete_seed_case(self):
        assert generate_ba(5, 4, 0).num_edges == 10

    def test_ba_m1_is_a_tree(self):
        g = generate_ba(100, 1, 0)
        assert g.num_edges == 99 and count_triangles(g) == 0

    @pytest.mark.parametrize("n,m", [(5, 5), (5, 0), (3, 7)])
    def test_ba_rejects_bad_parameters(self, n, m):
        with pytest.raises(ValueError):
            generate_ba(n, m, 0)

    def test_ba_is_preferential(self):
        g = generate_ba(3000, 3, 0)
        # early nodes accumulate degree far above m
        assert g.degrees[:10].mean() > 10 * g.degrees[-1000:].mean()

    def test_sample_full_is_identity(self):
        g = generate_ba(40, 3, 0)
        s = sample_induced(g, 40, 5)
        assert np.array_equal(s.indices, g.indices)

    def test_sample_single_node(self):
        s = sample_induced(generate_ba(40, 3, 0), 1, 5)
        assert s.n == 1 and s.num_edges == 0

    def test_sample_of_clique_is_clique(self):
        s = sample_induced(Graph.complete(5), 3, 0)
        assert s.num_edges == 3

    def test_sample_is_induced_and_order_preserving(self):
        g = generate_ba(60, 4, 1)
        s = sample_induced(g, 25, 7)
        keep = np.sort(np.random.default_rng(7).choice(60, size=25, replace=False))
        for a in range(25):
            for b in range(a + 1, 25):
                assert s.has_edge(a, b) == g.has_edge(keep[a], keep[b])

    def test_sample_too_large(self):
        with pytest.raises(ValueError):
            sample_induced(Graph.complete(3), 4, 0)

    def test_disjoint_union(self):
        u = disjoint_union([cycle4()] * 3)
        assert u.n == 12 and count_4cycles(u) == 3 and count_triangles(u) == 0
        assert math.isclose(exact_counts(u).mean_degree, 2.0)
