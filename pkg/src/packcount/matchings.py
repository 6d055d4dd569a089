"""Balanced bipartite graphs and their perfect matchings.

A perfect matching of a balanced bipartite graph on ``[q] ⊔ [q]`` is represented as a permutation ``rho``, stored as a
tuple where ``rho[i]`` is the right vertex matched to the left vertex ``i``. Adjacency rows are stored as bit vectors
(Python integers), bit ``j`` of row ``i`` being set when ``(i, j)`` is an edge.
"""

import logging
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import maximum_bipartite_matching

from .utils import CapacityError, InvariantError, NoPerfectMatchingError, get_settings, randbelow

__all__ = [
    "BipartiteGraph",
    "HallCertificate",
    "Matching",
    "cayley_distance",
    "compose",
    "count_perfect_matchings",
    "enumerate_perfect_matchings",
    "find_perfect_matching",
    "has_perfect_matching_halldense",
    "inverse",
    "sample_perfect_matching",
]

logger = logging.getLogger(__name__)

Matching = tuple[int, ...]


def _popcount(x: int) -> int:
    return bin(x).count("1")


@dataclass(frozen=True)
class BipartiteGraph:
    """Balanced bipartite graph on ``[q] ⊔ [q]``, with edges oriented from left to right.

    Parameters
    ----------
    q : int
        Number of vertices on each side.
    rows : tuple of int
        Bit vector of the right neighbors of every left vertex.
    """

    q: int
    rows: tuple[int, ...]

    def __post_init__(self):
        if len(self.rows) != self.q:
            raise ValueError(f"Expected {self.q} adjacency rows, got {len(self.rows)}.")
        full = (1 << self.q) - 1
        if any(r & ~full for r in self.rows):
            raise ValueError(f"Adjacency rows reference right vertices outside of [0, {self.q}).")

    @classmethod
    def complete(cls, q: int) -> "BipartiteGraph":
        """Complete bipartite graph K_{q,q}."""
        return cls(q, tuple([(1 << q) - 1] * q))

    @classmethod
    def from_edges(cls, q: int, edges: Iterable[tuple[int, int]]) -> "BipartiteGraph":
        """Build a graph from ``(left, right)`` pairs."""
        rows = [0] * q
        for i, j in edges:
            if not (0 <= i < q and 0 <= j < q):
                raise ValueError(f"Edge {(i, j)} is outside of [0, {q}) x [0, {q}).")
            rows[int(i)] |= 1 << int(j)
        return cls(q, tuple(rows))

    @classmethod
    def from_biadjacency(cls, matrix) -> "BipartiteGraph":
        """Build a graph from a square 0/1 biadjacency matrix."""
        matrix = np.asarray(matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"The biadjacency matrix must be square, got shape {matrix.shape}.")
        q = matrix.shape[0]
        return cls.from_edges(q, zip(*np.nonzero(matrix)))

    @classmethod
    def from_dict(cls, doc: dict) -> "BipartiteGraph":
        """Build a graph from its JSON adjacency lists ``{"q": q, "adj": [[j, ...], ...]}``."""
        return cls.from_edges(doc["q"], ((i, j) for i, adj in enumerate(doc["adj"]) for j in adj))

    def to_dict(self) -> dict:
        """JSON adjacency lists of the graph."""
        return {"q": self.q, "adj": [self.neighbors(i) for i in range(self.q)]}

    def has_edge(self, i: int, j: int) -> bool:
        return bool((self.rows[i] >> j) & 1)

    def neighbors(self, i: int) -> list[int]:
        """Right neighbors of the left vertex ``i``, in ascending order."""
        r = self.rows[i]
        return [j for j in range(self.q) if (r >> j) & 1]

    def edges(self) -> list[tuple[int, int]]:
        """All edges in lexicographic order."""
        return [(i, j) for i in range(self.q) for j in self.neighbors(i)]

    def remove_edge(self, i: int, j: int) -> "BipartiteGraph":
        rows = list(self.rows)
        rows[i] &= ~(1 << j)
        return BipartiteGraph(self.q, tuple(rows))

    def add_edge(self, i: int, j: int) -> "BipartiteGraph":
        rows = list(self.rows)
        rows[i] |= 1 << j
        return BipartiteGraph(self.q, tuple(rows))

    def intersection(self, other: "BipartiteGraph") -> "BipartiteGraph":
        """Graph of the edges present in both graphs."""
        if other.q != self.q:
            raise ValueError(f"Cannot intersect graphs with q={self.q} and q={other.q}.")
        return BipartiteGraph(self.q, tuple(a & b for a, b in zip(self.rows, other.rows)))

    def left_degrees(self) -> list[int]:
        return [_popcount(r) for r in self.rows]

    def right_degrees(self) -> list[int]:
        return [sum((r >> j) & 1 for r in self.rows) for j in range(self.q)]

    def min_degree(self) -> int:
        """Minimum degree over both sides."""
        return min(self.left_degrees() + self.right_degrees())

    def is_complete(self) -> bool:
        full = (1 << self.q) - 1
        return all(r == full for r in self.rows)

    def is_matching(self, rho: Sequence[int]) -> bool:
        """Whether ``rho`` is a perfect matching of this graph."""
        return len(rho) == self.q and sorted(rho) == list(range(self.q)) and all(self.has_edge(i, j) for i, j in enumerate(rho))

    def biadjacency(self) -> np.ndarray:
        """Dense 0/1 biadjacency matrix."""
        out = np.zeros((self.q, self.q), dtype=np.int8)
        for i, j in self.edges():
            out[i, j] = 1
        return out


@dataclass(frozen=True)
class HallCertificate:
    """Answer of a perfect matching query, with a witness when one exists.

    Attributes
    ----------
    exists : bool
        Whether the graph has a perfect matching.
    witness : Matching, optional
        A perfect matching when ``exists`` is True.
    by_density : bool
        Whether existence was guaranteed by the minimum degree alone (d >= q/2).
    """

    exists: bool
    witness: Optional[Matching] = None
    by_density: bool = False

    def __bool__(self):
        return self.exists


def compose(r: Sequence[int], s: Sequence[int]) -> Matching:
    """Composition ``r ∘ s``, i.e. ``i -> r[s[i]]``."""
    return tuple(r[x] for x in s)


def inverse(r: Sequence[int]) -> Matching:
    out = [0] * len(r)
    for i, x in enumerate(r):
        out[x] = i
    return tuple(out)


def cayley_distance(r: Sequence[int], s: Sequence[int]) -> int:
    """Minimum number of transpositions turning ``r`` into ``s``.

    Parameters
    ----------
    r, s : sequence of int
        Permutations of the same size.

    Returns
    -------
    int
        ``q`` minus the number of cycles of ``r⁻¹ ∘ s``.
    """
    if len(r) != len(s):
        raise ValueError(f"Cannot compare permutations of sizes {len(r)} and {len(s)}.")
    quotient = compose(inverse(r), s)
    seen = [False] * len(quotient)
    cycles = 0
    for start in range(len(quotient)):
        if not seen[start]:
            cycles += 1
            x = start
            while not seen[x]:
                seen[x] = True
                x = quotient[x]
    return len(quotient) - cycles


def _check_cap(q: int, cap: Optional[int]) -> None:
    cap = get_settings().matching_count_cap if cap is None else cap
    if q > cap:
        raise CapacityError(f"Exact matching computations are capped at q={cap}, got q={q}.")


def _residual_counter(rows: Sequence[int]):
    """Memoized count of the perfect matchings completing a partial assignment of the first rows.

    The returned function maps the bit vector of used right vertices to the number of ways of matching the rows
    ``popcount(used)..q-1`` into the unused right vertices.
    """
    q = len(rows)

    @lru_cache(maxsize=None)
    def count(used: int) -> int:
        i = _popcount(used)
        if i == q:
            return 1
        avail = rows[i] & ~used
        total = 0
        while avail:
            low = avail & -avail
            total += count(used | low)
            avail ^= low
        return total

    return count


def _ryser(rows: Sequence[int]) -> int:
    # Gray-code subset iteration over the columns
    q = len(rows)
    columns = [[(r >> j) & 1 for r in rows] for j in range(q)]
    sums = [0] * q
    total = 0
    for k in range(1, 1 << q):
        j = (k & -k).bit_length() - 1
        gray = k ^ (k >> 1)
        if (gray >> j) & 1:
            for i, a in enumerate(columns[j]):
                sums[i] += a
        else:
            for i, a in enumerate(columns[j]):
                sums[i] -= a
        prod = 1
        for x in sums:
            if x == 0:
                prod = 0
                break
            prod *= x
        if prod:
            total += prod if (q - _popcount(gray)) % 2 == 0 else -prod
    return total


def count_perfect_matchings(H: BipartiteGraph, *, cap: Optional[int] = None) -> int:
    """Number of perfect matchings of a balanced bipartite graph, i.e. the permanent of its biadjacency matrix.

    Parameters
    ----------
    H : BipartiteGraph
        The graph.
    cap : int, optional
        Largest side size allowed. Defaults to the ``matching_count_cap`` setting.

    Returns
    -------
    int
        The exact number of perfect matchings.
    """
    _check_cap(H.q, cap)
    if H.q == 0:
        return 1
    if any(r == 0 for r in H.rows):
        return 0
    return _ryser(H.rows)


def _iter_perfect_matchings(rows: Sequence[int], count=None) -> Iterator[Matching]:
    q = len(rows)
    count = count or _residual_counter(rows)
    current = [0] * q

    def descend(i: int, used: int):
        if i == q:
            yield tuple(current)
            return
        avail = rows[i] & ~used
        while avail:
            low = avail & -avail
            avail ^= low
            if count(used | low):
                current[i] = low.bit_length() - 1
                yield from descend(i + 1, used | low)

    if count(0):
        yield from descend(0, 0)


def enumerate_perfect_matchings(H: BipartiteGraph, *, cap: Optional[int] = None, q_cap: Optional[int] = None) -> list[Matching]:
    """List every perfect matching of a graph, in lexicographic order of ``(rho[0], rho[1], ...)``.

    Parameters
    ----------
    H : BipartiteGraph
        The graph.
    cap : int, optional
        Largest number of matchings allowed. Defaults to the ``enumeration_cap`` setting.
    q_cap : int, optional
        Largest side size allowed. Defaults to the ``matching_count_cap`` setting.

    Returns
    -------
    list of Matching
        The perfect matchings.
    """
    _check_cap(H.q, q_cap)
    cap = get_settings().enumeration_cap if cap is None else cap
    count = _residual_counter(H.rows)
    total = count(0)
    if total > cap:
        raise CapacityError(f"The graph has {total} perfect matchings, more than the enumeration cap of {cap}.")
    return list(_iter_perfect_matchings(H.rows, count))


def sample_perfect_matching(H: BipartiteGraph, rng: np.random.Generator, *, q_cap: Optional[int] = None) -> Matching:
    """Draw a perfect matching exactly uniformly at random.

    Left vertices are matched in order, the partner of each being drawn with probability proportional to the number of
    perfect matchings of the residual graph.

    Parameters
    ----------
    H : BipartiteGraph
        The graph.
    rng : np.random.Generator
        Random stream.
    q_cap : int, optional
        Largest side size allowed for graphs other than K_{q,q}. Defaults to the ``matching_count_cap`` setting.

    Returns
    -------
    Matching
        The sampled matching.
    """
    if H.is_complete():
        return tuple(int(x) for x in rng.permutation(H.q))

    _check_cap(H.q, q_cap)
    count = _residual_counter(H.rows)
    if count(0) == 0:
        raise NoPerfectMatchingError("Cannot sample from a graph without perfect matchings.")

    used = 0
    rho = []
    for i in range(H.q):
        candidates = []
        weights = []
        avail = H.rows[i] & ~used
        while avail:
            low = avail & -avail
            avail ^= low
            w = count(used | low)
            if w:
                candidates.append(low)
                weights.append(w)
        r = randbelow(rng, sum(weights))
        for low, w in zip(candidates, weights):
            if r < w:
                break
            r -= w
        used |= low
        rho.append(low.bit_length() - 1)
    return tuple(rho)


def find_perfect_matching(H: BipartiteGraph) -> Optional[Matching]:
    """Find a perfect matching with Hopcroft-Karp augmenting paths, or None when there is none."""
    if H.q == 0:
        return ()
    graph = sparse.csr_matrix(H.biadjacency())
    match = maximum_bipartite_matching(graph, perm_type="column")
    if (match < 0).any():
        return None
    return tuple(int(j) for j in match)


def has_perfect_matching_halldense(H: BipartiteGraph, d: int) -> HallCertificate:
    """Decide whether a graph with minimum degree ``d`` has a perfect matching.

    When ``d >= q/2`` (and the graph indeed has minimum degree ``d``), Hall's condition holds and a perfect matching
    exists; a witness is then built by augmenting paths. Otherwise, a full matching search gives the truthful answer.

    Parameters
    ----------
    H : BipartiteGraph
        The graph.
    d : int
        Minimum degree of the graph on both sides.

    Returns
    -------
    HallCertificate
        The answer and its witness.
    """
    dense = 2 * d >= H.q and H.min_degree() >= d
    witness = find_perfect_matching(H)
    if dense and witness is None:
        raise InvariantError(f"A graph with q={H.q} and minimum degree {d} >= q/2 has no perfect matching.")
    return HallCertificate(exists=witness is not None, witness=witness, by_density=dense)
