"""Instance generators, brute-force oracles and fixtures used by the test-suite."""

import itertools
from collections import deque
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from packcount.dynamics import enumerate_packings
from packcount.graphio import Instance, load_instance
from packcount.matchings import BipartiteGraph, Matching
from packcount.packing import Packing, is_valid_packing
from packcount.utils import make_rng

__all__ = [
    "DATA_DIR",
    "UniformSampler",
    "brute_force_available",
    "brute_force_count",
    "brute_force_packings",
    "cayley_bfs_distances",
    "complete_instance",
    "cycle_instance",
    "list_assignment",
    "load_fixture",
    "min_cut_value",
    "path_instance",
    "permanent_bruteforce",
    "random_bipartite_graph",
    "random_instance",
    "random_regular_instance",
    "star_instance",
]

DATA_DIR = Path(__file__).parent / "data"


def load_fixture(name: str) -> Instance:
    """Load one of the JSON instances shipped in ``packcount/testing/data``."""
    return load_instance(DATA_DIR / f"{name}.json")


def list_assignment(n: int, q: int, kind: str = "identical", *, palette: Optional[int] = None, rng=None) -> list[list[int]]:
    """Lists of ``q`` colors for ``n`` vertices.

    Parameters
    ----------
    n, q : int
        Number of vertices and list size.
    kind : {"identical", "disjoint", "random"}
        All lists ``[0, q)``, pairwise disjoint lists, or random subsets of a palette.
    palette : int, optional
        Palette size for random lists. Defaults to ``q + 2``.
    rng : int or np.random.Generator, optional
        Random stream for random lists.

    Returns
    -------
    list of list of int
        The lists.
    """
    if kind == "identical":
        return [list(range(q)) for _ in range(n)]
    if kind == "disjoint":
        return [list(range(v * q, (v + 1) * q)) for v in range(n)]
    if kind == "random":
        rng = make_rng(rng)
        palette = q + 2 if palette is None else palette
        return [sorted(int(c) for c in rng.choice(palette, size=q, replace=False)) for _ in range(n)]
    raise NotImplementedError(f"List assignment '{kind}' is not implemented.")


def path_instance(n: int, q: int, kind: str = "identical", **kwargs) -> Instance:
    return Instance(n, q, tuple((i, i + 1) for i in range(n - 1)), list_assignment(n, q, kind, **kwargs))


def cycle_instance(n: int, q: int, kind: str = "identical", **kwargs) -> Instance:
    return Instance(n, q, tuple((i, (i + 1) % n) for i in range(n)), list_assignment(n, q, kind, **kwargs))


def complete_instance(n: int, q: int, kind: str = "identical", **kwargs) -> Instance:
    return Instance(n, q, tuple(itertools.combinations(range(n), 2)), list_assignment(n, q, kind, **kwargs))


def star_instance(delta: int, q: int, kind: str = "identical", **kwargs) -> Instance:
    """Star K_{1,delta} centered at vertex 0."""
    return Instance(delta + 1, q, tuple((0, i) for i in range(1, delta + 1)), list_assignment(delta + 1, q, kind, **kwargs))


def random_regular_instance(n: int, d: int, q: int, rng=None, kind: str = "identical", max_tries: int = 1000) -> Instance:
    """Random d-regular graph from the configuration model, retried until simple."""
    if (n * d) % 2:
        raise ValueError(f"No {d}-regular graph on {n} vertices exists.")
    rng = make_rng(rng)
    for _ in range(max_tries):
        stubs = np.repeat(np.arange(n), d)
        rng.shuffle(stubs)
        pairs = {tuple(sorted((int(a), int(b)))) for a, b in stubs.reshape(-1, 2)}
        if len(pairs) == n * d // 2 and all(a != b for a, b in pairs):
            return Instance(n, q, tuple(pairs), list_assignment(n, q, kind, rng=rng))
    raise RuntimeError(f"Could not draw a simple {d}-regular graph on {n} vertices.")


def random_instance(n: int, q: int, rng=None, *, p: float = 0.5, kind: str = "random", palette: Optional[int] = None) -> Instance:
    """Erdős–Rényi graph with random lists."""
    rng = make_rng(rng)
    edges = tuple((u, v) for u, v in itertools.combinations(range(n), 2) if rng.random() < p)
    return Instance(n, q, edges, list_assignment(n, q, kind, palette=palette, rng=rng))


def random_bipartite_graph(q: int, min_degree: int, rng=None, *, p_remove: float = 0.5) -> BipartiteGraph:
    """Random balanced bipartite graph whose minimum degree on both sides is at least ``min_degree``.

    Edges of K_{q,q} are visited in random order and removed with probability ``p_remove`` when both endpoints keep
    degree ``min_degree``.
    """
    rng = make_rng(rng)
    matrix = np.ones((q, q), dtype=int)
    for k in rng.permutation(q * q):
        i, j = divmod(int(k), q)
        if rng.random() < p_remove and matrix[i].sum() > min_degree and matrix[:, j].sum() > min_degree:
            matrix[i, j] = 0
    return BipartiteGraph.from_biadjacency(matrix)


def permanent_bruteforce(H: BipartiteGraph) -> int:
    """Number of perfect matchings by a loop over the q! permutations."""
    return sum(1 for rho in itertools.permutations(range(H.q)) if H.is_matching(rho))


def brute_force_packings(inst: Instance) -> list[Packing]:
    """Valid packings by filtering all (q!)^n spin vectors."""
    perms = list(itertools.permutations(range(inst.q)))
    out = []
    for spins in itertools.product(perms, repeat=inst.n):
        p = Packing(spins)
        if is_valid_packing(inst, p):
            out.append(p)
    return out


def brute_force_count(inst: Instance) -> int:
    return len(brute_force_packings(inst))


def brute_force_available(inst: Instance, p: Packing, u: int) -> list[Matching]:
    """Spins of ``u`` keeping every edge at ``u`` proper, by a loop over the q! permutations."""
    out = []
    for rho in itertools.permutations(range(inst.q)):
        cand = p.replace(u, rho)
        if all(inst.lists[u][rho[i]] != inst.lists[w][cand.spins[w][i]] for w in inst.neighbors[u] for i in range(inst.q)):
            out.append(rho)
    return out


def cayley_bfs_distances(q: int) -> dict[tuple[Matching, Matching], int]:
    """Transposition distances between all pairs of permutations of ``[q]``, by breadth-first search."""
    perms = list(itertools.permutations(range(q)))
    transpositions = list(itertools.combinations(range(q), 2))
    out = {}
    for source in perms:
        dist = {source: 0}
        queue = deque([source])
        while queue:
            x = queue.popleft()
            for i, j in transpositions:
                y = list(x)
                y[i], y[j] = y[j], y[i]
                y = tuple(y)
                if y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        for target, d in dist.items():
            out[(source, target)] = d
    return out


def min_cut_value(relation, mu_a, mu_b) -> Fraction:
    """``min over A of [1 - mu_a(A) + mu_b(N(A))]``, by a loop over all subsets of the left side."""
    na = len(mu_a)
    nbrs = [set() for _ in range(na)]
    for i, j in relation:
        nbrs[i].add(j)
    best = Fraction(1)
    for mask in range(1, 1 << na):
        A = [i for i in range(na) if (mask >> i) & 1]
        N = set().union(*(nbrs[i] for i in A))
        value = 1 - sum(Fraction(mu_a[i]) for i in A) + sum(Fraction(mu_b[j]) for j in N)
        best = min(best, value)
    return best


class UniformSampler:
    """Exactly uniform sampler of valid packings, by enumeration (cached per instance)."""

    def __init__(self):
        self._cache = {}

    def __call__(self, inst: Instance, rng: np.random.Generator) -> Packing:
        if inst not in self._cache:
            self._cache[inst] = enumerate_packings(inst)
        states = self._cache[inst]
        return states[int(rng.integers(len(states)))]

