"""Heat-bath Glauber dynamics on list packings, and an exact mixing laboratory for tiny instances."""

import logging
import warnings
from collections.abc import Iterator
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import xarray as xr
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from tqdm import tqdm

from .graphio import Instance
from .matchings import (
    BipartiteGraph,
    Matching,
    _iter_perfect_matchings,
    cayley_distance,
    find_perfect_matching,
    sample_perfect_matching,
)
from .packing import Packing, availability_rows, build_availability_graph, edge_conflicts, is_valid_packing
from .utils import CapacityError, InvariantError, NoPerfectMatchingError, RegimeError, get_settings, make_rng

__all__ = [
    "ChainState",
    "Transition",
    "connect_states",
    "diameter_bound",
    "enumerate_packings",
    "exact_tv_curve",
    "glauber_step",
    "initial_packing",
    "is_irreducible",
    "mixing_time",
    "reversibility_error",
    "run_chain",
    "sample_packings",
    "stationarity_error",
    "transition_matrix",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChainState:
    """State of a Glauber chain: the current packing, the number of steps taken and the random stream."""

    packing: Packing
    step: int = 0
    rng: Optional[np.random.Generator] = None


@dataclass(frozen=True)
class Transition:
    """Single-vertex move of a packing."""

    vertex: int
    before: Matching
    after: Matching

    @property
    def weight(self) -> int:
        """Cayley distance between the two spins."""
        return cayley_distance(self.before, self.after)


def _relabel_columns(rows, perm) -> tuple[int, ...]:
    # bit k of the new row is bit perm[k] of the old one
    return tuple(sum(1 << k for k, j in enumerate(perm) if (r >> j) & 1) for r in rows)


def initial_packing(inst: Instance, rng: Optional[np.random.Generator] = None) -> Packing:
    """Build a valid packing greedily.

    Vertices are processed in index order; each one takes a perfect matching of its availability graph against its
    already assigned neighbors, found by augmenting paths.

    Parameters
    ----------
    inst : Instance
        The instance.
    rng : np.random.Generator, optional
        When given, the right side of every availability graph is randomly relabelled before the search, so that
        different streams start from different packings.

    Returns
    -------
    Packing
        A valid packing.
    """
    spins: list[Optional[Matching]] = [None] * inst.n
    for v in range(inst.n):
        rows = availability_rows(inst, spins, v)
        if rng is None:
            rho = find_perfect_matching(BipartiteGraph(inst.q, rows))
        else:
            perm = [int(x) for x in rng.permutation(inst.q)]
            found = find_perfect_matching(BipartiteGraph(inst.q, _relabel_columns(rows, perm)))
            rho = None if found is None else tuple(perm[k] for k in found)
        if rho is None:
            raise NoPerfectMatchingError(
                f"Construction failed: the availability graph of vertex {v} has no perfect matching (q={inst.q}, max degree={inst.max_degree})."
            )
        spins[v] = rho
    return Packing(tuple(spins))


def glauber_step(inst: Instance, state: ChainState) -> ChainState:
    """One heat-bath update: resample the spin of a uniform vertex uniformly among its available permutations."""
    rng = state.rng
    u = int(rng.integers(inst.n))
    H = build_availability_graph(inst, state.packing, u)
    rho = sample_perfect_matching(H, rng)
    return ChainState(state.packing.replace(u, rho), state.step + 1, rng)


def _warn_regime(inst: Instance) -> None:
    if inst.q < 2 * inst.max_degree + 2:
        warnings.warn(
            f"q={inst.q} is below the ergodicity regime q >= 2*Delta+2 = {2 * inst.max_degree + 2}; the chain may not be irreducible.",
            UserWarning,
        )


def run_chain(inst: Instance, state: ChainState, steps: int, *, progress: bool = False) -> ChainState:
    """Iterate Glauber steps from a state.

    Parameters
    ----------
    inst : Instance
        The instance.
    state : ChainState
        Starting state; its random stream is consumed.
    steps : int
        Number of steps.
    progress : bool
        Whether to display a progress bar.

    Returns
    -------
    ChainState
        The final state.
    """
    if state.rng is None:
        raise ValueError("The chain state needs a random stream.")
    for _ in tqdm(range(steps), disable=not progress, desc="glauber"):
        state = glauber_step(inst, state)
    return state


def sample_packings(
    inst: Instance,
    k: int,
    steps: int,
    rng: Union[int, np.random.Generator, None] = None,
    *,
    progress: bool = False,
) -> list[Packing]:
    """Draw ``k`` packings, each from a fresh chain started at a random initial packing and run for ``steps`` steps."""
    _warn_regime(inst)
    rng = make_rng(rng)
    out = []
    for _ in tqdm(range(k), disable=not progress, desc="samples"):
        state = ChainState(initial_packing(inst, rng), 0, rng)
        out.append(run_chain(inst, state, steps).packing)
    return out


def _iter_packings(inst: Instance, cap: int, what: str) -> Iterator[Packing]:
    spins: list[Optional[Matching]] = [None] * inst.n
    visited = 0

    def descend(v: int):
        nonlocal visited
        if v == inst.n:
            yield Packing(tuple(spins))
            return
        earlier = [w for w in inst.neighbors[v] if w < v]
        rows = availability_rows(inst, spins, v, earlier)
        for rho in _iter_perfect_matchings(rows):
            visited += 1
            if visited > cap:
                raise CapacityError(f"Enumerating {what} visits more than {cap} partial packings.")
            spins[v] = rho
            yield from descend(v + 1)
        spins[v] = None

    yield from descend(0)


def enumerate_packings(inst: Instance, *, cap: Optional[int] = None) -> list[Packing]:
    """All valid packings of an instance, in lexicographic order of their spin vectors.

    Parameters
    ----------
    inst : Instance
        The instance.
    cap : int, optional
        Largest number of backtracking nodes. Defaults to the ``state_cap`` setting.

    Returns
    -------
    list of Packing
        The valid packings.
    """
    cap = get_settings().state_cap if cap is None else cap
    states = list(_iter_packings(inst, cap, "the state space"))
    logger.info("Enumerated %s valid packings (n=%s, q=%s).", len(states), inst.n, inst.q)
    return states


def transition_matrix(inst: Instance, states: Optional[list[Packing]] = None, *, cap: Optional[int] = None) -> tuple[list[Packing], sparse.csr_matrix]:
    """Exact transition matrix of the Glauber dynamics over the enumerated state space.

    Parameters
    ----------
    inst : Instance
        The instance.
    states : list of Packing, optional
        Enumerated state space. Computed by :py:func:`enumerate_packings` when not given.
    cap : int, optional
        Largest state space. Defaults to the ``state_cap`` setting.

    Returns
    -------
    states : list of Packing
        The states indexing the matrix.
    P : scipy.sparse.csr_matrix
        Row-stochastic matrix, ``P[a, b]`` being the probability of moving from ``states[a]`` to ``states[b]``.
    """
    if states is None:
        states = enumerate_packings(inst, cap=cap)
    index = {p.spins: k for k, p in enumerate(states)}
    rows, cols, data = [], [], []
    for a, p in enumerate(states):
        for u in range(inst.n):
            moves = list(_iter_perfect_matchings(availability_rows(inst, p.spins, u)))
            w = 1.0 / (inst.n * len(moves))
            for rho in moves:
                spins = p.spins[:u] + (rho,) + p.spins[u + 1 :]
                rows.append(a)
                cols.append(index[spins])
                data.append(w)
    N = len(states)
    P = sparse.csr_matrix((data, (rows, cols)), shape=(N, N))
    P.sum_duplicates()
    return states, P


def is_irreducible(P: sparse.spmatrix) -> bool:
    """Whether the directed graph of nonzero transitions is strongly connected."""
    n_components, _ = connected_components(P, directed=True, connection="strong")
    return n_components == 1


def stationarity_error(P: sparse.spmatrix) -> float:
    """Largest entry of ``|u P - u|`` for the uniform distribution ``u``."""
    N = P.shape[0]
    u = np.full(N, 1.0 / N)
    return float(np.abs(P.T @ u - u).max())


def reversibility_error(P: sparse.spmatrix) -> float:
    """Largest entry of ``|P - P^T|``, zero for chains reversible with respect to the uniform distribution."""
    diff = abs(P - P.T)
    return float(diff.max()) if diff.nnz else 0.0


def diameter_bound(inst: Instance) -> int:
    """Upper bound ``(Delta+1)(q-1)n`` on the weighted diameter of the state space."""
    return (inst.max_degree + 1) * (inst.q - 1) * inst.n


def connect_states(inst: Instance, a: Packing, b: Packing) -> list[Transition]:
    """Sequence of Glauber moves transforming a valid packing into another one.

    Vertices are fixed to their target spin in index order. Before vertex ``i`` takes its target spin, every later
    neighbor that would conflict with it is repacked with a perfect matching of its availability graph from which the
    edges conflicting with the target spin of ``i`` are removed. That graph has minimum degree at least
    ``q - Delta - 1 >= q/2``, hence a perfect matching.

    Parameters
    ----------
    inst : Instance
        The instance, with ``q >= 2*Delta + 2``.
    a, b : Packing
        Valid packings.

    Returns
    -------
    list of Transition
        At most ``(Delta+1) n`` moves, each between valid packings.
    """
    if inst.q < 2 * inst.max_degree + 2:
        raise RegimeError(f"Connecting packings requires q >= 2*Delta+2 = {2 * inst.max_degree + 2}, got q={inst.q}.")
    for name, p in (("source", a), ("target", b)):
        if not is_valid_packing(inst, p):
            raise ValueError(f"The {name} packing is not valid.")

    current = list(a.spins)
    moves = []
    for i in range(inst.n):
        if current[i] == b.spins[i]:
            continue
        target_colors = [inst.lists[i][x] for x in b.spins[i]]
        for j in inst.neighbors[i]:
            if j < i or not edge_conflicts(inst, current[:i] + [b.spins[i]] + current[i + 1 :], i, j):
                continue
            rows = list(availability_rows(inst, current, j))
            index = inst.color_index[j]
            for k, c in enumerate(target_colors):
                col = index.get(c)
                if col is not None:
                    rows[k] &= ~(1 << col)
            rho = find_perfect_matching(BipartiteGraph(inst.q, tuple(rows)))
            if rho is None:
                raise InvariantError(f"The repacking graph of vertex {j} has no perfect matching although q >= 2*Delta+2.")
            moves.append(Transition(j, current[j], rho))
            current[j] = rho
        moves.append(Transition(i, current[i], b.spins[i]))
        current[i] = b.spins[i]
    return moves


def exact_tv_curve(
    inst: Instance,
    p0: Union[np.ndarray, Packing],
    t_max: int,
    *,
    states: Optional[list[Packing]] = None,
    P: Optional[sparse.spmatrix] = None,
    cap: Optional[int] = None,
) -> xr.DataArray:
    """Exact total variation distance to the uniform distribution along the chain.

    Parameters
    ----------
    inst : Instance
        The instance.
    p0 : np.ndarray or Packing
        Initial distribution over the enumerated states, or a packing for a point mass.
    t_max : int
        Last time step.
    states : list of Packing, optional
        Enumerated states. Computed when not given.
    P : scipy.sparse.spmatrix, optional
        Transition matrix over ``states``. Computed when not given.
    cap : int, optional
        Largest state space. Defaults to the ``state_cap`` setting.

    Returns
    -------
    xr.DataArray
        The distances for ``t = 0..t_max``, along the "time" dimension.
    """
    if P is None:
        states, P = transition_matrix(inst, states, cap=cap)
    N = P.shape[0]
    if isinstance(p0, Packing):
        if states is None:
            raise ValueError("A point mass needs the states indexing the transition matrix.")
        index = {p.spins: k for k, p in enumerate(states)}
        if p0.spins not in index:
            raise ValueError("The initial packing is not one of the enumerated states.")
        dist = np.zeros(N)
        dist[index[p0.spins]] = 1.0
    else:
        dist = np.asarray(p0, dtype=float)
        if dist.shape != (N,):
            raise ValueError(f"The initial distribution has shape {dist.shape}, expected ({N},).")

    PT = P.T.tocsr()
    curve = np.empty(t_max + 1)
    for t in range(t_max + 1):
        curve[t] = 0.5 * np.abs(dist - 1.0 / N).sum()
        dist = PT @ dist

    tol = get_settings().tolerance
    increases = np.nonzero(np.diff(curve) > tol)[0]
    if increases.size:
        warnings.warn(f"The total variation distance increases at times {(increases + 1).tolist()}.", UserWarning)

    out = xr.DataArray(curve, coords={"time": np.arange(t_max + 1)}, dims="time", name="tv_distance")
    out.attrs = {
        "long_name": "Total variation distance to the uniform distribution",
        "description": f"Exact distance of the Glauber chain after t steps, over {N} enumerated packings.",
        "n_states": N,
    }
    return out


def mixing_time(curve: Union[xr.DataArray, np.ndarray], eps: float) -> Optional[int]:
    """First time at which the distance is at most ``eps``, or None when the curve never reaches it."""
    values = np.asarray(curve)
    hits = np.nonzero(values <= eps)[0]
    return int(hits[0]) if hits.size else None
