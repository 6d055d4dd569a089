"""Coupled Glauber steps and path-coupling contraction experiments."""

import logging
import math
import warnings
from fractions import Fraction
from typing import Literal, Optional, Union

import numpy as np
import xarray as xr
from statsmodels.stats.weightstats import DescrStatsW
from tqdm import tqdm

from ..dynamics import ChainState, diameter_bound, initial_packing, run_chain
from ..graphio import Instance, instance_digest
from ..matchings import Matching, cayley_distance, enumerate_perfect_matchings, sample_perfect_matching
from ..packing import Packing, build_availability_graph, packing_distance
from ..utils import DegenerateCouplingError, get_settings, make_rng
from ._base import Coupling, couple_uniform_sets
from .matchings import couple_matching_distributions

__all__ = ["coupled_glauber_step", "exact_contraction", "path_coupling_bound", "path_coupling_report"]

logger = logging.getLogger(__name__)


def _disagreement(omega: Packing, omega_p: Packing) -> Optional[int]:
    differing = [w for w in range(omega.n) if omega.spins[w] != omega_p.spins[w]]
    if len(differing) > 1:
        raise ValueError(f"The packings differ at vertices {differing}, expected at most one vertex.")
    return differing[0] if differing else None


def _neighbor_coupling(inst: Instance, omega: Packing, omega_p: Packing, v: int, u: int, cap: Optional[int]) -> Coupling:
    try:
        return couple_matching_distributions(inst, omega, omega_p, v, u, cap=cap)
    except DegenerateCouplingError as err:
        warnings.warn(f"{err} Falling back to the maximal equality coupling at vertex {u}.", UserWarning)
        return couple_uniform_sets(
            enumerate_perfect_matchings(build_availability_graph(inst, omega, u), cap=cap),
            enumerate_perfect_matchings(build_availability_graph(inst, omega_p, u), cap=cap),
        )


def coupled_glauber_step(
    inst: Instance,
    omega: Packing,
    omega_p: Packing,
    rng: np.random.Generator,
    *,
    cap: Optional[int] = None,
) -> tuple[Packing, Packing]:
    """Update the same uniform vertex in two packings differing at most at one vertex.

    When the updated vertex ``u`` is not a neighbor of the vertex of disagreement ``v`` (including ``u == v``), both
    availability graphs coincide and both chains take the same sample. Otherwise, the pair of new spins is drawn
    from :py:func:`couple_matching_distributions`. When that coupling degenerates, the maximal equality coupling of
    the two sets of available permutations is used instead.

    Parameters
    ----------
    inst : Instance
        The instance.
    omega, omega_p : Packing
        Valid packings differing at most at one vertex.
    rng : np.random.Generator
        Random stream shared by both chains.
    cap : int, optional
        Largest number of matchings enumerated per graph.

    Returns
    -------
    tuple of Packing
        The two updated packings.
    """
    v = _disagreement(omega, omega_p)
    u = int(rng.integers(inst.n))
    H = build_availability_graph(inst, omega, u)
    if v is None or u == v or u not in inst.neighbors[v] or H == build_availability_graph(inst, omega_p, u):
        rho = sample_perfect_matching(H, rng)
        return omega.replace(u, rho), omega_p.replace(u, rho)
    rho, rho_p = _neighbor_coupling(inst, omega, omega_p, v, u, cap).sample(rng)
    return omega.replace(u, rho), omega_p.replace(u, rho_p)


def exact_contraction(inst: Instance, omega: Packing, omega_p: Packing, *, cap: Optional[int] = None) -> Fraction:
    """Exact expected distance after one coupled step, averaged over the updated vertex.

    Parameters
    ----------
    inst : Instance
        The instance.
    omega, omega_p : Packing
        Valid packings differing at one vertex.
    cap : int, optional
        Largest number of matchings enumerated per graph.

    Returns
    -------
    Fraction
        ``E[d(sigma, sigma')]`` for the coupled step of :py:func:`coupled_glauber_step`.
    """
    v = _disagreement(omega, omega_p)
    if v is None:
        return Fraction(0)
    psi = cayley_distance(omega.spins[v], omega_p.spins[v])
    total = Fraction(0)
    for u in range(inst.n):
        if u == v:
            continue
        total += psi
        if u in inst.neighbors[v]:
            if build_availability_graph(inst, omega, u) != build_availability_graph(inst, omega_p, u):
                total += _neighbor_coupling(inst, omega, omega_p, v, u, cap).expected(cayley_distance, exact=True)
    return total / inst.n


def path_coupling_bound(diameter: float, epsilon: float, beta: float) -> float:
    """Mixing-time bound ``log(D / epsilon) / (1 - beta)`` given by a contraction ``beta``; infinite when ``beta >= 1``."""
    if beta >= 1:
        return math.inf
    return math.log(diameter / epsilon) / (1 - beta)


def _random_edge(inst: Instance, omega: Packing, rng: np.random.Generator, cap: Optional[int]) -> Optional[tuple[int, Matching]]:
    # a vertex with at least two available permutations, and one of them other than its spin
    options = {}
    for v in range(inst.n):
        H = build_availability_graph(inst, omega, v)
        if H.is_complete():
            if inst.q > 1:
                options[v] = None
        else:
            moves = [rho for rho in enumerate_perfect_matchings(H, cap=cap) if rho != omega.spins[v]]
            if moves:
                options[v] = moves
    if not options:
        return None
    candidates = sorted(options)
    v = candidates[int(rng.integers(len(candidates)))]
    if options[v] is None:
        while True:
            rho = tuple(int(x) for x in rng.permutation(inst.q))
            if rho != omega.spins[v]:
                return v, rho
    moves = options[v]
    return v, moves[int(rng.integers(len(moves)))]


def path_coupling_report(
    inst: Instance,
    trials: int,
    rng: Union[int, np.random.Generator, None] = None,
    *,
    burn_in: Optional[int] = None,
    epsilon: float = 0.01,
    method: Literal["sample", "exact"] = "sample",
    alpha: float = 0.05,
    constant_c: Optional[float] = None,
    cap: Optional[int] = None,
    progress: bool = False,
) -> xr.Dataset:
    """Estimate the one-step contraction of the coupled dynamics on random adjacent packings.

    Every trial draws a valid packing by running the chain from a random initial packing, picks a vertex ``v`` with
    an alternative available permutation and builds the packing differing from the first at ``v`` only. With
    ``method="sample"``, one coupled step is taken and the ratio of distances recorded; with ``method="exact"``, the
    exact expected ratio of :py:func:`exact_contraction` is recorded instead. A trial on a packing where no vertex
    can move records a ratio of 1.

    Parameters
    ----------
    inst : Instance
        The instance.
    trials : int
        Number of adjacent pairs.
    rng : int or np.random.Generator, optional
        Seed or random stream.
    burn_in : int, optional
        Chain steps before each trial. Defaults to ``10 n``.
    epsilon : float
        Accuracy of the implied mixing-time bound.
    method : {"sample", "exact"}
        Sampled coupled step or exact expectation.
    alpha : float
        Significance level of the confidence interval of the contraction.
    constant_c : float, optional
        Regime constant C. Defaults to the ``constant_c`` setting.
    cap : int, optional
        Largest number of matchings enumerated per graph.
    progress : bool
        Whether to display a progress bar.

    Returns
    -------
    xr.Dataset
        Per-trial ratios along the "trial" dimension, with the estimated contraction, its confidence interval and the
        implied mixing-time bound in the attributes.
    """
    if trials < 1:
        raise ValueError(f"At least one trial is needed, got {trials}.")
    if method not in ["sample", "exact"]:
        raise ValueError(f"Unknown method '{method}', expected one of ['sample', 'exact'].")
    seed = rng if isinstance(rng, int) else None
    rng = make_rng(rng)
    constant_c = get_settings().constant_c if constant_c is None else constant_c
    burn_in = 10 * inst.n if burn_in is None else burn_in
    delta = inst.max_degree
    regime = inst.q >= constant_c * delta**2
    if not regime:
        warnings.warn(f"q={inst.q} is below the regime q >= C*Delta^2 = {constant_c * delta**2:g}; contraction is not guaranteed.", UserWarning)

    ratios = np.ones(trials)
    vertices = np.full(trials, -1)
    psis = np.zeros(trials, dtype=int)
    after = np.zeros(trials)
    frozen = np.zeros(trials, dtype=bool)
    for t in tqdm(range(trials), disable=not progress, desc="contraction"):
        omega = run_chain(inst, ChainState(initial_packing(inst, rng), 0, rng), burn_in).packing
        edge = _random_edge(inst, omega, rng, cap)
        if edge is None:
            frozen[t] = True
            continue
        v, rho = edge
        omega_p = omega.replace(v, rho)
        psi = cayley_distance(omega.spins[v], rho)
        if method == "exact":
            dist = float(exact_contraction(inst, omega, omega_p, cap=cap))
        else:
            sigma, sigma_p = coupled_glauber_step(inst, omega, omega_p, rng, cap=cap)
            dist = packing_distance(sigma, sigma_p)
        vertices[t], psis[t], after[t], ratios[t] = v, psi, dist, dist / psi

    stats = DescrStatsW(ratios)
    beta = float(stats.mean)
    if trials > 1 and stats.std > 0:
        low, high = (float(x) for x in stats.tconfint_mean(alpha=alpha))
        se = float(stats.std_mean)
    else:
        low = high = beta
        se = 0.0
    D = diameter_bound(inst)
    bound = path_coupling_bound(D, epsilon, beta)
    logger.info("Contraction over %s trials: beta=%.4f [%.4f, %.4f], implied bound %s.", trials, beta, low, high, bound)

    ds = xr.Dataset(
        {
            "ratio": ("trial", ratios, {"long_name": "Ratio of distances after and before the coupled step"}),
            "vertex": ("trial", vertices, {"long_name": "Vertex of disagreement", "description": "-1 when the packing is frozen."}),
            "psi": ("trial", psis, {"long_name": "Cayley distance at the vertex of disagreement"}),
            "distance_after": ("trial", after, {"long_name": "Distance after the coupled step"}),
            "frozen": ("trial", frozen, {"long_name": "Whether no vertex of the packing can move"}),
        },
        coords={"trial": np.arange(trials)},
    )
    ds.attrs = {
        "description": "Path-coupling contraction of the heat-bath Glauber dynamics on list packings.",
        "method": method,
        "beta_hat": beta,
        "beta_ci_low": low,
        "beta_ci_high": high,
        "alpha": alpha,
        "standard_error": se,
        "target": 1 - 1 / (2 * inst.n),
        "diameter": D,
        "epsilon": epsilon,
        "implied_bound": bound,
        "constant_c": constant_c,
        "regime": bool(regime),
        "all_frozen": bool(frozen.all()),
        "burn_in": burn_in,
        "instance_hash": instance_digest(inst),
    }
    if seed is not None:
        ds.attrs["seed"] = seed
    return ds
