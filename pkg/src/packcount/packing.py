"""List packings and their availability graphs.

A list packing of an instance is encoded by one permutation ``omega_v`` of ``[q]`` per vertex: the ``i``-th coloring
of the packing gives ``v`` the ``omega_v[i]``-th smallest color of its list. Pairwise disjointness of the ``q``
colorings is therefore automatic, and validity only asks that every coloring is proper.
"""

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal, Optional

from .graphio import Instance
from .matchings import BipartiteGraph, Matching, cayley_distance, enumerate_perfect_matchings
from .utils import ParseError

__all__ = [
    "Packing",
    "availability_rows",
    "available_permutations",
    "build_availability_graph",
    "edge_conflicts",
    "is_valid_packing",
    "packing_distance",
    "satisfies_mode",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Packing:
    """Spin vector of a list packing.

    Parameters
    ----------
    spins : tuple of Matching
        One permutation of ``[q]`` per vertex.
    mode : {"valid", "near-valid"}
        Validity requirement. A near-valid packing allows monochromatic edges incident to its designated vertex.
    vertex : int, optional
        Designated vertex of a near-valid packing.
    """

    spins: tuple[Matching, ...]
    mode: Literal["valid", "near-valid"] = "valid"
    vertex: Optional[int] = None

    def __post_init__(self):
        spins = tuple(tuple(int(x) for x in s) for s in self.spins)
        if not spins:
            raise ParseError("A packing needs at least one vertex.")
        q = len(spins[0])
        for v, s in enumerate(spins):
            if sorted(s) != list(range(q)):
                raise ParseError(f"The spin of vertex {v} is not a permutation of [0, {q}): {list(s)}.")
        if self.mode == "valid":
            if self.vertex is not None:
                raise ParseError("A valid packing has no designated vertex.")
        elif self.mode == "near-valid":
            if self.vertex is None or not 0 <= self.vertex < len(spins):
                raise ParseError(f"A near-valid packing needs a designated vertex in [0, {len(spins)}), got {self.vertex}.")
        else:
            raise ParseError(f"Unknown validity mode '{self.mode}', expected one of ['valid', 'near-valid'].")
        object.__setattr__(self, "spins", spins)

    @property
    def n(self) -> int:
        return len(self.spins)

    @property
    def q(self) -> int:
        return len(self.spins[0])

    def replace(self, v: int, rho: Sequence[int]) -> "Packing":
        """Return a copy where the spin of ``v`` is ``rho``, with the same validity mode."""
        spins = list(self.spins)
        spins[v] = tuple(rho)
        return Packing(tuple(spins), self.mode, self.vertex)

    def as_near_valid(self, v: int) -> "Packing":
        return Packing(self.spins, "near-valid", v)

    def as_valid(self) -> "Packing":
        return Packing(self.spins)

    def to_json(self) -> str:
        """One JSON array of list indices per vertex."""
        return json.dumps([list(s) for s in self.spins])

    @classmethod
    def from_json(cls, text: str) -> "Packing":
        try:
            spins = json.loads(text)
        except json.JSONDecodeError as err:
            raise ParseError(f"Malformed packing document: {err}") from err
        if not isinstance(spins, list) or not all(isinstance(s, list) for s in spins):
            raise ParseError("A packing document must be an array of permutations.")
        return cls(tuple(tuple(s) for s in spins))


def _check_shape(inst: Instance, p: Packing) -> None:
    if p.n != inst.n or p.q != inst.q:
        raise ParseError(f"The packing has shape (n={p.n}, q={p.q}) but the instance has n={inst.n} and q={inst.q}.")


def edge_conflicts(inst: Instance, spins: Sequence[Sequence[int]], u: int, v: int) -> list[int]:
    """Packing indices ``i`` at which the coloring ``f_i`` gives ``u`` and ``v`` the same color."""
    lu, lv = inst.lists[u], inst.lists[v]
    su, sv = spins[u], spins[v]
    return [i for i in range(inst.q) if lu[su[i]] == lv[sv[i]]]


def is_valid_packing(inst: Instance, p: Packing) -> bool:
    """Whether every coloring of the packing is a proper L-coloring.

    Parameters
    ----------
    inst : Instance
        The instance.
    p : Packing
        The packing, whatever its mode.

    Returns
    -------
    bool
        True when no edge is monochromatic in any coloring.
    """
    _check_shape(inst, p)
    return not any(edge_conflicts(inst, p.spins, u, v) for u, v in inst.edges)


def satisfies_mode(inst: Instance, p: Packing) -> bool:
    """Whether a packing satisfies its own validity mode."""
    _check_shape(inst, p)
    skip = p.vertex if p.mode == "near-valid" else None
    return not any(edge_conflicts(inst, p.spins, u, v) for u, v in inst.edges if skip not in (u, v))


def availability_rows(inst: Instance, spins: Sequence[Optional[Sequence[int]]], u: int, neighbors: Optional[Sequence[int]] = None) -> tuple[int, ...]:
    """Bit-vector rows of the availability graph of ``u`` against some of its neighbors.

    Neighbors whose spin is None are ignored, which allows building the graph against a partial assignment.
    """
    full = (1 << inst.q) - 1
    rows = [full] * inst.q
    index = inst.color_index[u]
    for w in inst.neighbors[u] if neighbors is None else neighbors:
        s = spins[w]
        if s is None:
            continue
        lw = inst.lists[w]
        for i in range(inst.q):
            j = index.get(lw[s[i]])
            if j is not None:
                rows[i] &= ~(1 << j)
    return tuple(rows)


def build_availability_graph(inst: Instance, p: Packing, u: int) -> BipartiteGraph:
    """Availability graph of a vertex.

    Edge ``(i, j)`` is present when the ``j``-th color of the list of ``u`` is not used at packing index ``i`` by any
    neighbor of ``u``. Colors are compared by value, so lists may differ between neighbors.

    Parameters
    ----------
    inst : Instance
        The instance.
    p : Packing
        A valid or near-valid packing.
    u : int
        The vertex.

    Returns
    -------
    BipartiteGraph
        The availability graph, of minimum degree at least ``q - deg(u)``.
    """
    _check_shape(inst, p)
    return BipartiteGraph(inst.q, availability_rows(inst, p.spins, u))


def available_permutations(inst: Instance, p: Packing, u: int, *, cap: Optional[int] = None) -> list[Matching]:
    """Spins that ``u`` may take while keeping the packing in its mode.

    For a valid packing these are the perfect matchings of the availability graph of ``u``, in lexicographic order.
    For a packing that is near-valid at ``v`` the edges at ``v`` are unconstrained: every permutation is returned
    when ``u == v``, and the spin of ``v`` is ignored when ``u`` is one of its neighbors.
    """
    _check_shape(inst, p)
    if p.mode == "near-valid":
        if u == p.vertex:
            return enumerate_perfect_matchings(BipartiteGraph.complete(inst.q), cap=cap)
        if p.vertex in inst.neighbors[u]:
            neighbors = [w for w in inst.neighbors[u] if w != p.vertex]
            H = BipartiteGraph(inst.q, availability_rows(inst, p.spins, u, neighbors))
            return enumerate_perfect_matchings(H, cap=cap)
    return enumerate_perfect_matchings(build_availability_graph(inst, p, u), cap=cap)


def packing_distance(p: Packing, other: Packing) -> int:
    """Sum over the vertices of the Cayley distance between the two spins."""
    if p.n != other.n or p.q != other.q:
        raise ParseError(f"Cannot compare packings of shapes {(p.n, p.q)} and {(other.n, other.q)}.")
    return sum(cayley_distance(a, b) for a, b in zip(p.spins, other.spins))
