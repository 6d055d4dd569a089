"""Couplings of uniform perfect matchings of nearby availability graphs."""

import logging
import warnings
from fractions import Fraction
from typing import Optional

from ..graphio import Instance
from ..matchings import BipartiteGraph, cayley_distance, enumerate_perfect_matchings
from ..packing import Packing, build_availability_graph
from ..utils import DegenerateCouplingError, get_settings
from ._base import Coupling, ExactJoint, glue, identity_coupling, maxflow_coupling
from .cayley import apply_transposition, transposition_path

__all__ = ["analytic_edge_bound", "couple_adjacent_graphs", "couple_matching_distributions", "couple_matchings_edge", "edge_degree_bounds"]

logger = logging.getLogger(__name__)


def edge_degree_bounds(q: int, delta: int) -> dict[str, tuple[int, int]]:
    """Degree ranges of the 3-cycle relation between matchings using and avoiding an edge.

    For a graph of minimum degree ``q - delta``, a matching using the edge has between ``(q-delta-1)(q-2delta-3)``
    and ``(q-1)(q-2)`` related matchings, and a matching avoiding it between ``q-2delta-4`` and ``q-2``. Lower
    bounds are clamped at zero.
    """
    return {
        "left": (max(0, q - delta - 1) * max(0, q - 2 * delta - 3), max(0, (q - 1) * (q - 2))),
        "right": (max(0, q - 2 * delta - 4), max(0, q - 2)),
    }


def analytic_edge_bound(q: int, delta: int) -> float:
    """Lower bound ``m_L m_R / (M_L M_R)`` on the related-pair probability, from :py:func:`edge_degree_bounds`."""
    bounds = edge_degree_bounds(q, delta)
    (mL, ML), (mR, MR) = bounds["left"], bounds["right"]
    if ML == 0 or MR == 0:
        return 0.0
    return (mL * mR) / (ML * MR)


def couple_matchings_edge(H: BipartiteGraph, e: tuple[int, int], delta: int, *, cap: Optional[int] = None) -> Coupling:
    """Couple the uniform matchings avoiding an edge with the uniform matchings of the whole graph.

    Let ``L`` be the perfect matchings using ``e = (a, b)`` and ``R`` those avoiding it. A matching ``rho`` of ``L``
    is related to ``rho ∘ (a i j)`` whenever the latter is in ``R``; both differ by a 3-cycle, hence have Cayley
    distance two. The uniform distributions on ``L`` and ``R`` are coupled maximally over that relation, and the
    result is mixed with the identity coupling on ``R`` with weights ``|L|/(|L|+|R|)`` and ``|R|/(|L|+|R|)``.

    Parameters
    ----------
    H : BipartiteGraph
        The graph, of minimum degree at least ``q - delta``.
    e : (int, int)
        The edge ``(left, right)``.
    delta : int
        Degree deficit of the graph.
    cap : int, optional
        Largest number of matchings enumerated. Defaults to the ``enumeration_cap`` setting.

    Returns
    -------
    Coupling
        Coupling of Uniform(R) (first coordinate) and Uniform(L ∪ R) (second coordinate), with an exact table. The
        coupling of Uniform(L) and Uniform(R) it is built from is available as ``intermediate``.
    """
    q = H.q
    a, b = e
    if H.min_degree() < q - delta:
        warnings.warn(f"The graph has minimum degree {H.min_degree()} < q - delta = {q - delta}; the degree bounds do not apply.", UserWarning)

    matchings = enumerate_perfect_matchings(H, cap=cap)
    using = [rho for rho in matchings if rho[a] == b]
    avoiding = [rho for rho in matchings if rho[a] != b]
    if not avoiding:
        raise DegenerateCouplingError(f"No perfect matching avoids the edge {tuple(e)}.")

    attrs = {
        "edge": [a, b],
        "delta": delta,
        "size_L": len(using),
        "size_R": len(avoiding),
        "degree_bounds": {k: list(v) for k, v in edge_degree_bounds(q, delta).items()},
        "analytic_bound": analytic_edge_bound(q, delta),
    }
    if not using:
        out = identity_coupling(avoiding)
        out.attrs.update(attrs, coupling="edge", achieved=1.0, expected_cayley=0.0, expected_cayley_exact="0")
        return out

    index_R = {rho: k for k, rho in enumerate(avoiding)}
    relation = []
    deg_L = [0] * len(using)
    deg_R = [0] * len(avoiding)
    for x, rho in enumerate(using):
        for i in range(q):
            if i == a:
                continue
            for j in range(q):
                if j == a or j == i:
                    continue
                # rho ∘ (a i j): a -> rho[i], i -> rho[j], j -> rho[a] = b
                other = list(rho)
                other[a], other[i], other[j] = rho[i], rho[j], b
                y = index_R.get(tuple(other))
                if y is not None:
                    relation.append((x, y))
                    deg_L[x] += 1
                    deg_R[y] += 1

    intermediate = maxflow_coupling(
        relation,
        [Fraction(1, len(using))] * len(using),
        [Fraction(1, len(avoiding))] * len(avoiding),
        support_a=using,
        support_b=avoiding,
        attrs={"coupling": "3-cycle"},
    )
    mL, ML, mR, MR = min(deg_L), max(deg_L), min(deg_R), max(deg_R)
    attrs.update(
        achieved=intermediate.attrs["achieved"],
        measured_degrees={"left": [mL, ML], "right": [mR, MR]},
        corollary_bound=(mL * mR) / (ML * MR) if ML and MR else 0.0,
    )

    # mixture over the common denominator D * N
    D = intermediate.exact.denominator
    N = len(matchings)
    index_all = {rho: k for k, rho in enumerate(matchings)}
    numerators = {(y, index_all[rho]): D for y, rho in enumerate(avoiding)}
    for (x, y), n in intermediate.exact.numerators.items():
        key = (y, index_all[using[x]])
        numerators[key] = numerators.get(key, 0) + len(using) * n

    out = Coupling(
        avoiding,
        matchings,
        exact=ExactJoint(numerators, D * N),
        expected_a=[Fraction(1, len(avoiding))] * len(avoiding),
        expected_b=[Fraction(1, N)] * N,
        attrs={"coupling": "edge", **attrs},
        intermediate=intermediate,
    )
    expected = out.expected(cayley_distance, exact=True)
    out.attrs.update(expected_cayley=float(expected), expected_cayley_exact=str(expected))
    logger.debug("Edge coupling of %s: |L|=%s, |R|=%s, E[d_C]=%s.", e, len(using), len(avoiding), expected)
    return out


def couple_adjacent_graphs(H: BipartiteGraph, other: BipartiteGraph, delta: int, *, cap: Optional[int] = None) -> Coupling:
    """Couple the uniform perfect matchings of two graphs differing by a few edges.

    The edges of ``H`` missing from ``other`` are removed one at a time, then the edges of ``other`` missing from
    ``H`` are added one at a time, each link being an edge coupling; the links are glued in order.

    Parameters
    ----------
    H, other : BipartiteGraph
        The two graphs, of minimum degree at least ``q - delta``.
    delta : int
        Degree deficit of both graphs.
    cap : int, optional
        Largest number of matchings enumerated per graph.

    Returns
    -------
    Coupling
        Coupling of the uniform matchings of ``H`` and of ``other``. ``attrs["case"]`` holds the numbers of removed
        and added edges.
    """
    old, new = set(H.edges()), set(other.edges())
    removed = sorted(old - new)
    added = sorted(new - old)
    case = [len(removed), len(added)]
    if not removed and not added:
        out = identity_coupling(enumerate_perfect_matchings(H, cap=cap))
        out.attrs["case"] = case
        return out

    chain = None
    X = H
    for k, e in enumerate(removed):
        link = couple_matchings_edge(X, e, delta + k, cap=cap).transpose()
        chain = link if chain is None else glue(chain, link)
        X = X.remove_edge(*e)
    for k, e in enumerate(added, start=1):
        Y = X.add_edge(*e)
        link = couple_matchings_edge(Y, e, delta + len(added) - k, cap=cap)
        chain = link if chain is None else glue(chain, link)
        X = Y
    chain.attrs["case"] = case
    return chain


def couple_matching_distributions(
    inst: Instance,
    omega: Packing,
    omega_p: Packing,
    v: int,
    u: int,
    *,
    cap: Optional[int] = None,
    constant_c: Optional[float] = None,
) -> Coupling:
    """Couple the uniform available permutations of ``u`` in two packings differing at a neighbor ``v``.

    The spin of ``v`` is moved from ``omega_v`` to ``omega'_v`` along a minimal transposition path. Every
    intermediate packing is near-valid at ``v``, and consecutive availability graphs of ``u`` differ by at most two
    removed and two added edges; consecutive graphs are coupled by :py:func:`couple_adjacent_graphs` and the step
    couplings are glued along the path.

    Parameters
    ----------
    inst : Instance
        The instance.
    omega, omega_p : Packing
        Packings differing at most at ``v``.
    v : int
        The vertex of disagreement.
    u : int
        A neighbor of ``v``.
    cap : int, optional
        Largest number of matchings enumerated per graph.
    constant_c : float, optional
        Regime constant C. Defaults to the ``constant_c`` setting.

    Returns
    -------
    Coupling
        Coupling of the uniform perfect matchings of ``H_u(omega)`` and ``H_u(omega_p)``. Its attributes report the
        exact expected Cayley distance next to the target ``psi / (2 Delta)``.
    """
    if omega.n != inst.n or omega_p.n != inst.n:
        raise ValueError("The packings do not match the instance.")
    differing = [w for w in range(inst.n) if omega.spins[w] != omega_p.spins[w]]
    if any(w != v for w in differing):
        raise ValueError(f"The packings differ at vertices {differing}, expected at most vertex {v}.")
    if u not in inst.neighbors[v]:
        raise ValueError(f"Vertex {u} is not a neighbor of vertex {v}.")
    constant_c = get_settings().constant_c if constant_c is None else constant_c
    delta = inst.max_degree

    path = transposition_path(omega.spins[v], omega_p.spins[v])
    current = omega.as_near_valid(v)
    H = build_availability_graph(inst, current, u)
    cases = []
    coupling = None
    for tau in path.steps:
        nxt = current.replace(v, apply_transposition(current.spins[v], tau))
        H_next = build_availability_graph(inst, nxt, u)
        step = couple_adjacent_graphs(H, H_next, delta, cap=cap)
        cases.append(step.attrs["case"])
        coupling = step if coupling is None else glue(coupling, step)
        current, H = nxt, H_next
    if coupling is None:
        coupling = identity_coupling(enumerate_perfect_matchings(H, cap=cap))

    psi = len(path)
    expected = coupling.expected(cayley_distance, exact=True)
    coupling.attrs = {
        "coupling": "availability",
        "vertex": v,
        "neighbor": u,
        "psi": psi,
        "delta": delta,
        "cases": cases,
        "expected_cayley": float(expected),
        "expected_cayley_exact": str(expected),
        "target": psi / (2 * delta),
        "constant_c": constant_c,
        "regime": inst.q >= constant_c * delta**2,
    }
    return coupling
