"""Exact counting of list packings and the telescoping-product approximation scheme."""

import logging
import math
import multiprocessing
import warnings
from collections.abc import Callable
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Optional, Union

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from .dynamics import ChainState, initial_packing, run_chain
from .graphio import Instance, instance_digest
from .matchings import Matching, _iter_perfect_matchings, _residual_counter
from .packing import Packing, availability_rows, edge_conflicts, is_valid_packing
from .utils import CapacityError, InvariantError, NoPerfectMatchingError, RegimeError, get_settings, spawn_rngs, worker_count

__all__ = [
    "CountEstimate",
    "RatioEstimate",
    "chebyshev_schedule",
    "exact_count",
    "exact_ratios",
    "fpras_count",
    "is_eps_approximation",
    "ratio_bounds",
]

logger = logging.getLogger(__name__)

Sampler = Callable[[Instance, np.random.Generator], Packing]


def _count_branch(inst: Instance, first: Optional[Matching], cap: int) -> tuple[int, int]:
    """Count the packings extending a spin of vertex 0 (all of them when ``first`` is None).

    Returns the count and the number of backtracking nodes visited.
    """
    spins: list[Optional[Matching]] = [None] * inst.n
    visited = 0

    def earlier_rows(v):
        return availability_rows(inst, spins, v, [w for w in inst.neighbors[v] if w < v])

    def descend(v: int) -> int:
        nonlocal visited
        rows = earlier_rows(v)
        if v == inst.n - 1:
            return _residual_counter(rows)(0)
        total = 0
        for rho in _iter_perfect_matchings(rows):
            visited += 1
            if visited > cap:
                raise CapacityError(f"Exact counting visits more than {cap} partial packings.")
            spins[v] = rho
            total += descend(v + 1)
        spins[v] = None
        return total

    if first is None:
        return descend(0), visited
    if inst.n == 1:
        return 1, 1
    spins[0] = first
    return descend(1), visited + 1


def _count_branch_star(args):
    return _count_branch(*args)


def exact_count(inst: Instance, *, cap: Optional[int] = None, max_cores: Optional[int] = None) -> int:
    """Exact number of valid list packings.

    Vertices are assigned in index order, each one taking a perfect matching of its availability graph against its
    already assigned neighbors; the last vertex contributes the number of such matchings instead of enumerating them.

    Parameters
    ----------
    inst : Instance
        The instance.
    cap : int, optional
        Largest number of backtracking nodes. Defaults to the ``exact_count_cap`` setting.
    max_cores : int, optional
        Number of processes over which the spins of vertex 0 are distributed. Defaults to ``PACKCOUNT_THREADS``.

    Returns
    -------
    int
        The number of valid packings.
    """
    cap = get_settings().exact_count_cap if cap is None else cap
    processes = worker_count(max_cores)
    if processes == 1 or inst.n == 1:
        count, visited = _count_branch(inst, None, cap)
    else:
        firsts = list(_iter_perfect_matchings(availability_rows(inst, [None] * inst.n, 0, [])))
        with multiprocessing.Pool(processes=processes) as pool:
            results = pool.map(_count_branch_star, [(inst, f, cap) for f in firsts])
        count = sum(r[0] for r in results)
        visited = sum(r[1] for r in results)
        if visited > cap:
            raise CapacityError(f"Exact counting visits more than {cap} partial packings.")
    logger.debug("Exact count %s after visiting %s partial packings.", count, visited)
    return count


def _prefix_instances(inst: Instance) -> list[Instance]:
    # G_i holds the first i edges of the sorted edge list
    return [inst.with_edges(inst.edges[:i]) for i in range(inst.m + 1)]


def exact_ratios(inst: Instance, *, cap: Optional[int] = None) -> list[Fraction]:
    """Exact ratios ``|Omega_i| / |Omega_{i-1}|`` of the telescoping product, for ``i = 1..m``."""
    counts = [exact_count(g, cap=cap, max_cores=1) for g in _prefix_instances(inst)]
    return [Fraction(counts[i], counts[i - 1]) for i in range(1, len(counts))]


def ratio_bounds(q: int) -> tuple[Fraction, Fraction]:
    """Theoretical range ``(1/(1+q!), 1)`` of every ratio of the telescoping product."""
    if q < 1:
        raise ValueError(f"q must be positive, got {q}.")
    return Fraction(1, 1 + math.factorial(q)), Fraction(1)


def chebyshev_schedule(inst: Instance, epsilon: float, failure_prob: float, *, c1: Optional[float] = None) -> tuple[int, int]:
    """Per-ratio sample count and per-sample burn-in of the approximation scheme.

    Parameters
    ----------
    inst : Instance
        The instance.
    epsilon : float
        Requested accuracy, in (0, 1).
    failure_prob : float
        Allowed failure probability, in (0, 1).
    c1 : float, optional
        Sample budget multiplier. Defaults to the ``chebyshev_c1`` setting.

    Returns
    -------
    samples : int
        ``ceil(c1 (1+q!)^2 m / epsilon^2)``.
    burn_in : int
        ``ceil(2n (ln n + ln(m s / failure_prob) + ln(1/epsilon)))``.
    """
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}.")
    if not 0 < failure_prob < 1:
        raise ValueError(f"failure_prob must be in (0, 1), got {failure_prob}.")
    if inst.m == 0:
        return 0, 0
    c1 = get_settings().chebyshev_c1 if c1 is None else c1
    eps = Fraction(repr(float(epsilon)))
    s = math.ceil(Fraction(repr(float(c1))) * (1 + math.factorial(inst.q)) ** 2 * inst.m / eps**2)
    T = math.ceil(2 * inst.n * (math.log(inst.n) + math.log(inst.m * s / failure_prob) + math.log(1 / epsilon)))
    return s, T


@dataclass(frozen=True)
class RatioEstimate:
    """Monte-Carlo estimate of one ratio of the telescoping product.

    Attributes
    ----------
    edge_index : int
        Index ``i`` of the ratio ``|Omega_i| / |Omega_{i-1}|``, from 1 to m.
    edge : tuple of int
        The edge distinguishing ``G_i`` from ``G_{i-1}``.
    samples : int
        Number of packings drawn from ``G_{i-1}``.
    hits : int
        Number of them that are also valid in ``G_i``.
    q : int
        List size, which sets the theoretical range.
    """

    edge_index: int
    edge: tuple[int, int]
    samples: int
    hits: int
    q: int

    @property
    def estimate(self) -> Fraction:
        return Fraction(self.hits, self.samples)

    @property
    def out_of_range(self) -> bool:
        """Whether the estimate falls outside of the theoretical range."""
        low, high = ratio_bounds(self.q)
        return not low <= self.estimate <= high

    def confidence_interval(self, alpha: float = 0.05) -> tuple[float, float]:
        """Clopper-Pearson interval of the ratio."""
        low, high = proportion_confint(self.hits, self.samples, alpha=alpha, method="beta")
        return float(low), float(high)

    def to_dict(self) -> dict:
        low, high = self.confidence_interval()
        return {
            "edge_index": self.edge_index,
            "edge": list(self.edge),
            "samples": self.samples,
            "hits": self.hits,
            "estimate": str(self.estimate),
            "ci_low": low,
            "ci_high": high,
            "out_of_range": self.out_of_range,
        }


def _render(x: Fraction, digits: int = 30) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    with localcontext() as ctx:
        ctx.prec = digits
        return str(Decimal(x.numerator) / Decimal(x.denominator))


@dataclass(frozen=True)
class CountEstimate:
    """Result of the approximation scheme: ``value = (q!)^n * prod(per_edge estimates)``."""

    value: Fraction
    epsilon: float
    failure_prob: float
    seed: Optional[int]
    per_edge: tuple[RatioEstimate, ...]
    samples_per_ratio: int
    burn_in: int
    c1: float
    instance_hash: str = ""
    sampler: str = "glauber"
    extra: dict = field(default_factory=dict)

    @property
    def value_decimal(self) -> str:
        """The estimate rendered as a decimal string."""
        return _render(self.value)

    @property
    def measured_lower_bound(self) -> Optional[Fraction]:
        """Smallest ratio estimate, a measured counterpart of ``1/(1+q!)``."""
        return min((r.estimate for r in self.per_edge), default=None)

    def to_dict(self) -> dict:
        lower = self.measured_lower_bound
        return {
            "value": self.value_decimal,
            "value_exact": str(self.value),
            "epsilon": self.epsilon,
            "failure_prob": self.failure_prob,
            "seed": self.seed,
            "samples_per_ratio": self.samples_per_ratio,
            "burn_in": self.burn_in,
            "c1": self.c1,
            "sampler": self.sampler,
            "instance_hash": self.instance_hash,
            "measured_lower_bound": None if lower is None else str(lower),
            "per_edge": [r.to_dict() for r in self.per_edge],
            **self.extra,
        }


class _GlauberSampler:
    """Fresh chain from a random initial packing, run for a fixed number of steps."""

    def __init__(self, burn_in: int):
        self.burn_in = burn_in

    def __call__(self, inst: Instance, rng: np.random.Generator) -> Packing:
        try:
            start = initial_packing(inst, rng)
        except NoPerfectMatchingError as err:
            raise RegimeError(f"No initial packing could be built: {err}") from err
        return run_chain(inst, ChainState(start, 0, rng), self.burn_in).packing


def _estimate_ratio(args) -> RatioEstimate:
    inst, i, samples, sampler, rng = args
    previous = inst.with_edges(inst.edges[: i - 1])
    u, v = inst.edges[i - 1]
    hits = 0
    for _ in range(samples):
        p = sampler(previous, rng)
        if not is_valid_packing(previous, p):
            raise InvariantError(f"A sample drawn for ratio {i} is not a valid packing of G_{i - 1}.")
        if not edge_conflicts(inst, p.spins, u, v):
            hits += 1
    logger.info("Ratio %s (edge %s): %s hits out of %s samples.", i, (u, v), hits, samples)
    return RatioEstimate(i, (u, v), samples, hits, inst.q)


def fpras_count(
    inst: Instance,
    epsilon: float,
    failure_prob: float,
    seed: Optional[int] = None,
    *,
    samples: Optional[int] = None,
    burn_in: Optional[int] = None,
    sampler: Optional[Sampler] = None,
    c1: Optional[float] = None,
    max_cores: Optional[int] = None,
) -> CountEstimate:
    """Approximate the number of list packings with a telescoping product of sampled ratios.

    The graphs ``G_0 ⊂ ... ⊂ G_m = G`` hold the first ``i`` edges of the sorted edge list, so that ``|Omega_0| =
    (q!)^n``. Every ratio ``|Omega_i| / |Omega_{i-1}|`` is estimated by the fraction of packings of ``G_{i-1}``, each
    drawn from a fresh Glauber chain, in which the ``i``-th edge is not monochromatic.

    Parameters
    ----------
    inst : Instance
        The instance.
    epsilon : float
        Requested accuracy, in (0, 1).
    failure_prob : float
        Allowed failure probability, in (0, 1).
    seed : int, optional
        Seed of the run. A random seed is drawn and reported when not given.
    samples : int, optional
        Samples per ratio, overriding the Chebyshev schedule.
    burn_in : int, optional
        Chain steps per sample, overriding the Chebyshev schedule.
    sampler : callable, optional
        Function ``(instance, rng) -> Packing`` replacing the Glauber chain.
    c1 : float, optional
        Sample budget multiplier. Defaults to the ``chebyshev_c1`` setting.
    max_cores : int, optional
        Number of processes over which the ratios are distributed. Defaults to ``PACKCOUNT_THREADS``.

    Returns
    -------
    CountEstimate
        The estimate and its per-edge diagnostics.
    """
    c1 = get_settings().chebyshev_c1 if c1 is None else c1
    s, T = chebyshev_schedule(inst, epsilon, failure_prob, c1=c1)
    s = s if samples is None else samples
    T = T if burn_in is None else burn_in
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % 2**64)
    base = Fraction(math.factorial(inst.q) ** inst.n)
    common = {"epsilon": epsilon, "failure_prob": failure_prob, "seed": seed, "c1": c1, "instance_hash": instance_digest(inst)}
    if inst.m == 0:
        return CountEstimate(value=base, per_edge=(), samples_per_ratio=0, burn_in=0, sampler="none", **common)
    if s < 1:
        raise ValueError(f"At least one sample per ratio is needed, got {s}.")

    if inst.q < 2 * inst.max_degree + 2:
        warnings.warn(f"q={inst.q} is below q >= 2*Delta+2 = {2 * inst.max_degree + 2}; the chains may not be ergodic.", UserWarning)
    name = "glauber" if sampler is None else getattr(sampler, "__name__", type(sampler).__name__)
    sampler = _GlauberSampler(T) if sampler is None else sampler

    rngs = spawn_rngs(seed, inst.m)
    tasks = [(inst, i, s, sampler, rngs[i - 1]) for i in range(1, inst.m + 1)]
    processes = min(worker_count(max_cores), inst.m)
    logger.info("Estimating %s ratios with %s samples each (burn-in %s) on %s processes.", inst.m, s, T, processes)
    if processes == 1:
        per_edge = [_estimate_ratio(t) for t in tasks]
    else:
        with multiprocessing.Pool(processes=processes) as pool:
            per_edge = pool.map(_estimate_ratio, tasks)

    value = base
    for r in per_edge:
        if r.out_of_range:
            warnings.warn(f"The estimate {r.estimate} of ratio {r.edge_index} is outside of the theoretical range.", UserWarning)
        value *= r.estimate
    return CountEstimate(value=value, per_edge=tuple(per_edge), samples_per_ratio=s, burn_in=T, sampler=name, **common)


def is_eps_approximation(estimate: Union[CountEstimate, Fraction, int, float], truth: Union[Fraction, int, float], eps: float) -> bool:
    """Whether ``exp(-eps) <= truth / estimate <= exp(eps)``."""
    if isinstance(estimate, CountEstimate):
        estimate = estimate.value
    estimate, truth = Fraction(estimate), Fraction(truth)
    if estimate <= 0 or truth <= 0:
        return estimate == truth
    gap = math.log(truth.numerator) - math.log(truth.denominator) - math.log(estimate.numerator) + math.log(estimate.denominator)
    return abs(gap) <= eps
