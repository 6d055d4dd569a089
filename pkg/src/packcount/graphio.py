"""Problem instances: a graph together with a q-list assignment."""

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Annotated, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .utils import ParseError

__all__ = [
    "Instance",
    "InstanceDocument",
    "instance_digest",
    "load_instance",
    "max_degree",
    "parse_instance",
    "serialize_instance",
]

logger = logging.getLogger(__name__)

Color = Annotated[int, Field(ge=0)]


class InstanceDocument(BaseModel):
    """Schema of the canonical JSON document describing an instance."""

    model_config = ConfigDict(strict=True, extra="forbid")

    n: int = Field(ge=1)
    q: int = Field(ge=1)
    edges: list[list[int]]
    lists: list[list[Color]]


@dataclass(frozen=True)
class Instance:
    """A graph on the vertices ``0..n-1`` with a list of ``q`` distinct colors per vertex.

    Edges are stored as sorted pairs ``(u, v)`` with ``u < v`` in lexicographic order, and every list is stored in
    ascending order, so that list index ``j`` of a vertex always designates its ``j``-th smallest color.

    Parameters
    ----------
    n : int
        Number of vertices.
    q : int
        Size of every list.
    edges : sequence of pairs of int
        Unordered vertex pairs.
    lists : sequence of sequences of int
        The list of nonnegative colors of every vertex.
    """

    n: int
    q: int
    edges: tuple[tuple[int, int], ...]
    lists: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.n < 1 or self.q < 1:
            raise ParseError(f"An instance needs n >= 1 and q >= 1, got n={self.n} and q={self.q}.")
        if len(self.lists) != self.n:
            raise ParseError(f"Expected {self.n} lists, got {len(self.lists)}.")

        lists = []
        for v, lst in enumerate(self.lists):
            if len(lst) != self.q:
                raise ParseError(f"The list of vertex {v} has {len(lst)} colors, expected q={self.q}.")
            if len(set(lst)) != len(lst):
                raise ParseError(f"The list of vertex {v} contains duplicate colors: {list(lst)}.")
            if any(c < 0 for c in lst):
                raise ParseError(f"The list of vertex {v} contains negative colors: {list(lst)}.")
            lists.append(tuple(sorted(int(c) for c in lst)))

        edges = set()
        for e in self.edges:
            if len(e) != 2:
                raise ParseError(f"Edges must be vertex pairs, got {list(e)}.")
            u, v = (int(x) for x in e)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ParseError(f"Edge {[u, v]} references a vertex outside of [0, {self.n}).")
            if u == v:
                raise ParseError(f"Self-loops are not allowed, got {[u, v]}.")
            pair = (min(u, v), max(u, v))
            if pair in edges:
                raise ParseError(f"Duplicate edge {list(pair)}.")
            edges.add(pair)

        object.__setattr__(self, "lists", tuple(lists))
        object.__setattr__(self, "edges", tuple(sorted(edges)))

    @property
    def m(self) -> int:
        """Number of edges."""
        return len(self.edges)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        """Sorted neighbors of every vertex."""
        nbrs = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return tuple(tuple(sorted(x)) for x in nbrs)

    @cached_property
    def degrees(self) -> tuple[int, ...]:
        """Degree of every vertex."""
        return tuple(len(x) for x in self.neighbors)

    @cached_property
    def max_degree(self) -> int:
        """Maximum degree of the graph."""
        return max(self.degrees)

    @cached_property
    def color_index(self) -> tuple[dict[int, int], ...]:
        """Map from color to list index, for every vertex."""
        return tuple({c: j for j, c in enumerate(lst)} for lst in self.lists)

    def color(self, v: int, j: int) -> int:
        """Return the ``j``-th smallest color of the list of ``v``."""
        return self.lists[v][j]

    def with_edges(self, edges) -> "Instance":
        """Return the same vertices and lists on another edge set."""
        return Instance(n=self.n, q=self.q, edges=tuple(tuple(e) for e in edges), lists=self.lists)


def parse_instance(text: Union[str, bytes]) -> Instance:
    """Parse a canonical JSON document into a validated instance.

    Parameters
    ----------
    text : str or bytes
        JSON document of the form ``{"n": int, "q": int, "edges": [[u, v], ...], "lists": [[c, ...], ...]}``.

    Returns
    -------
    Instance
        The validated instance, with sorted lists and edges.
    """
    try:
        doc = InstanceDocument.model_validate_json(text)
    except ValidationError as err:
        raise ParseError(f"Malformed instance document: {err}") from err
    return Instance(n=doc.n, q=doc.q, edges=tuple(tuple(e) for e in doc.edges), lists=tuple(tuple(lst) for lst in doc.lists))


def serialize_instance(inst: Instance) -> str:
    """Serialize an instance to its canonical JSON text (sorted lists and sorted edge pairs)."""
    doc = {
        "n": inst.n,
        "q": inst.q,
        "edges": [list(e) for e in inst.edges],
        "lists": [list(lst) for lst in inst.lists],
    }
    return json.dumps(doc, sort_keys=True)


def load_instance(path: Union[str, os.PathLike]) -> Instance:
    """Read and parse an instance file.

    Parameters
    ----------
    path : str or os.PathLike
        Path to the JSON document.

    Returns
    -------
    Instance
        The validated instance.
    """
    try:
        with open(path) as f:
            text = f.read()
    except OSError as err:
        raise ParseError(f"Could not read the instance file '{path}': {err}") from err
    inst = parse_instance(text)
    logger.debug("Loaded instance with n=%s, q=%s, m=%s from %s", inst.n, inst.q, inst.m, path)
    return inst


def instance_digest(inst: Instance) -> str:
    """Hex SHA-256 digest of the canonical serialization of an instance."""
    return hashlib.sha256(serialize_instance(inst).encode()).hexdigest()


def max_degree(inst: Instance) -> int:
    """Maximum number of edges incident to a vertex of the instance."""
    return inst.max_degree
