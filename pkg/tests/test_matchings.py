import itertools
import math

import numpy as np
import pytest
from scipy.stats import chisquare

from packcount.matchings import (
    BipartiteGraph,
    cayley_distance,
    compose,
    count_perfect_matchings,
    enumerate_perfect_matchings,
    find_perfect_matching,
    has_perfect_matching_halldense,
    inverse,
    sample_perfect_matching,
)
from packcount.testing import cayley_bfs_distances, permanent_bruteforce, random_bipartite_graph
from packcount.utils import CapacityError, NoPerfectMatchingError


@pytest.fixture
def k33_minus_edge():
    return BipartiteGraph.complete(3).remove_edge(0, 0)


class TestBipartiteGraph:
    def test_complete(self):
        H = BipartiteGraph.complete(4)
        assert H.is_complete()
        assert H.min_degree() == 4
        assert len(H.edges()) == 16

    def test_edits(self, k33_minus_edge):
        H = k33_minus_edge
        assert not H.has_edge(0, 0)
        assert H.left_degrees() == [2, 3, 3]
        assert H.right_degrees() == [2, 3, 3]
        assert H.add_edge(0, 0) == BipartiteGraph.complete(3)
        assert H.intersection(BipartiteGraph.complete(3)) == H

    def test_conversions(self, k33_minus_edge):
        H = k33_minus_edge
        assert BipartiteGraph.from_dict(H.to_dict()) == H
        assert BipartiteGraph.from_biadjacency(H.biadjacency()) == H
        assert BipartiteGraph.from_edges(3, H.edges()) == H

    def test_invalid(self):
        with pytest.raises(ValueError, match="adjacency rows"):
            BipartiteGraph(2, (3,))
        with pytest.raises(ValueError, match="outside"):
            BipartiteGraph(2, (4, 1))
        with pytest.raises(ValueError, match="outside"):
            BipartiteGraph.from_edges(2, [(0, 2)])
        with pytest.raises(ValueError, match="square"):
            BipartiteGraph.from_biadjacency(np.ones((2, 3)))


class TestCount:
    def test_k33(self, k33_minus_edge):
        assert count_perfect_matchings(BipartiteGraph.complete(3)) == 6
        assert count_perfect_matchings(k33_minus_edge) == 4

    @pytest.mark.parametrize("q", [1, 2, 5, 8])
    def test_complete(self, q):
        assert count_perfect_matchings(BipartiteGraph.complete(q)) == math.factorial(q)

    def test_empty_row(self):
        H = BipartiteGraph(3, (0, 7, 7))
        assert count_perfect_matchings(H) == 0
        assert find_perfect_matching(H) is None

    def test_against_bruteforce(self, rng):
        for _ in range(30):
            q = int(rng.integers(1, 7))
            H = BipartiteGraph.from_biadjacency(rng.random((q, q)) < 0.6)
            assert count_perfect_matchings(H) == permanent_bruteforce(H)
            assert len(enumerate_perfect_matchings(H)) == permanent_bruteforce(H)

    def test_cap(self):
        with pytest.raises(CapacityError, match="capped"):
            count_perfect_matchings(BipartiteGraph.complete(6), cap=5)


class TestEnumerate:
    def test_lexicographic(self, k33_minus_edge):
        out = enumerate_perfect_matchings(k33_minus_edge)
        assert out == [(1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]

    def test_all_permutations(self):
        assert enumerate_perfect_matchings(BipartiteGraph.complete(4)) == list(itertools.permutations(range(4)))

    def test_cap(self):
        with pytest.raises(CapacityError, match="enumeration cap"):
            enumerate_perfect_matchings(BipartiteGraph.complete(5), cap=100)

    def test_none(self):
        assert enumerate_perfect_matchings(BipartiteGraph(2, (1, 1))) == []


class TestSample:
    def test_is_matching(self, rng):
        H = random_bipartite_graph(6, 3, rng)
        for _ in range(20):
            assert H.is_matching(sample_perfect_matching(H, rng))

    def test_complete_fast_path(self, rng):
        rho = sample_perfect_matching(BipartiteGraph.complete(30), rng)
        assert sorted(rho) == list(range(30))

    def test_no_matching(self, rng):
        with pytest.raises(NoPerfectMatchingError):
            sample_perfect_matching(BipartiteGraph(2, (1, 1)), rng)

    def test_reproducible(self):
        H = BipartiteGraph.complete(4).remove_edge(1, 2)
        a = [sample_perfect_matching(H, np.random.default_rng(5)) for _ in range(3)]
        b = [sample_perfect_matching(H, np.random.default_rng(5)) for _ in range(3)]
        assert a == b

    @staticmethod
    def _failures(rng, graphs, draws):
        failures = 0
        for q in graphs:
            H = random_bipartite_graph(q, q // 2 + 1, rng)
            matchings = enumerate_perfect_matchings(H)
            index = {rho: k for k, rho in enumerate(matchings)}
            counts = np.zeros(len(matchings))
            for _ in range(draws):
                counts[index[sample_perfect_matching(H, rng)]] += 1
            if len(matchings) > 1 and chisquare(counts).pvalue < 0.01:
                failures += 1
        return failures

    def test_uniformity(self):
        rng = np.random.default_rng(11)
        assert self._failures(rng, [5, 5, 6], 3000) <= 1

    @pytest.mark.slow
    def test_uniformity_full(self):
        rng = np.random.default_rng(12)
        assert self._failures(rng, [5] * 10 + [6] * 10, 10_000) <= 1

    def test_edge_marginals(self):
        rng = np.random.default_rng(13)
        H = random_bipartite_graph(5, 3, rng)
        matchings = np.array(enumerate_perfect_matchings(H))
        draws = 10_000
        samples = np.array([sample_perfect_matching(H, rng) for _ in range(draws)])
        outside_3se = 0
        for i, j in H.edges():
            p = np.mean(matchings[:, i] == j)
            se = math.sqrt(p * (1 - p) / draws)
            diff = abs(np.mean(samples[:, i] == j) - p)
            assert diff <= 4 * se + 1e-12
            outside_3se += diff > 3 * se + 1e-12
        assert outside_3se <= 1


class TestHall:
    def test_dense(self, rng):
        H = random_bipartite_graph(8, 4, rng)
        cert = has_perfect_matching_halldense(H, 4)
        assert cert
        assert cert.by_density
        assert H.is_matching(cert.witness)

    def test_sparse(self):
        H = BipartiteGraph(3, (1, 1, 7))
        cert = has_perfect_matching_halldense(H, 1)
        assert not cert
        assert cert.witness is None
        assert not cert.by_density

    def test_dense_random(self, rng):
        for _ in range(1000):
            q = int(rng.integers(1, 13))
            d = math.ceil(q / 2)
            H = random_bipartite_graph(q, d, rng, p_remove=float(rng.uniform(0.3, 1.0)))
            assert H.min_degree() >= d
            cert = has_perfect_matching_halldense(H, d)
            assert cert.exists
            assert cert.by_density
            assert H.is_matching(cert.witness)

    def test_below_half_is_searched(self):
        # two left vertices share a single right neighbor
        H = BipartiteGraph(4, (0b0001, 0b0001, 0b1111, 0b1111))
        cert = has_perfect_matching_halldense(H, 1)
        assert not cert.by_density
        assert not cert.exists
        assert count_perfect_matchings(H) == 0

    def test_find(self, k33_minus_edge):
        assert k33_minus_edge.is_matching(find_perfect_matching(k33_minus_edge))


class TestCayley:
    def test_examples(self):
        assert cayley_distance((0, 1, 2), (0, 1, 2)) == 0
        assert cayley_distance((0, 1, 2), (1, 0, 2)) == 1
        assert cayley_distance((0, 1, 2), (1, 2, 0)) == 2
        assert cayley_distance((0, 1, 2, 3), (1, 0, 3, 2)) == 2

    def test_against_bfs(self):
        bfs = cayley_bfs_distances(4)
        for (r, s), d in bfs.items():
            assert cayley_distance(r, s) == d

    def test_algebra(self):
        r, s = (2, 0, 1, 3), (3, 1, 0, 2)
        assert compose(r, inverse(r)) == (0, 1, 2, 3)
        assert compose(r, s) == (3, 0, 2, 1)
        assert cayley_distance(r, s) == cayley_distance(s, r)

    def test_sizes(self):
        with pytest.raises(ValueError, match="sizes"):
            cayley_distance((0, 1), (0, 1, 2))
