"""Utility functions for packcount: errors, configuration and random streams."""

import logging
import os
from functools import lru_cache
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field

__all__ = [
    "CapacityError",
    "DegenerateCouplingError",
    "InvariantError",
    "NoPerfectMatchingError",
    "PackCountError",
    "ParseError",
    "RegimeError",
    "Settings",
    "get_settings",
    "make_rng",
    "randbelow",
    "spawn_rngs",
    "worker_count",
]

logger = logging.getLogger(__name__)

_DEFAULTS_FILE = Path(__file__).parent / "data" / "defaults.yml"


class PackCountError(Exception):
    """Base class for all errors raised by packcount."""


class ParseError(PackCountError, ValueError):
    """A problem instance or a packing document is malformed."""


class RegimeError(PackCountError, ValueError):
    """The operation requires a larger list size relative to the maximum degree."""


class CapacityError(PackCountError, RuntimeError):
    """An exact computation would exceed its configured cap."""


class NoPerfectMatchingError(PackCountError, ValueError):
    """A bipartite graph has no perfect matching where one is required."""


class DegenerateCouplingError(PackCountError, ValueError):
    """An edge coupling cannot be built because no perfect matching avoids the edge."""


class InvariantError(PackCountError, RuntimeError):
    """An internal invariant was found violated at run time."""


class Settings(BaseModel):
    """Validated configuration of caps and constants.

    Parameters
    ----------
    matching_count_cap : int
        Largest side size for which exact permanents are computed.
    enumeration_cap : int
        Largest number of perfect matchings that may be enumerated.
    state_cap : int
        Largest number of packings enumerated by the mixing laboratory.
    exact_count_cap : int
        Largest number of backtracking nodes visited by exact counting.
    constant_c : float
        Regime constant C of the availability-graph coupling (q >= C * Delta^2).
    chebyshev_c1 : float
        Multiplier of the per-ratio sample budget.
    tolerance : float
        Absolute tolerance for marginal and stochasticity checks.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    matching_count_cap: int = Field(24, ge=1)
    enumeration_cap: int = Field(1_000_000, ge=1)
    state_cap: int = Field(100_000, ge=1)
    exact_count_cap: int = Field(100_000_000, ge=1)
    constant_c: float = Field(16.0, gt=0)
    chebyshev_c1: float = Field(74.0, gt=0)
    tolerance: float = Field(1e-12, gt=0)


def _flatten(cfg: dict) -> dict:
    out = {}
    for k, v in (cfg or {}).items():
        if isinstance(v, dict):
            out.update(_flatten(v))
        else:
            out[k] = v
    return out


@lru_cache(maxsize=1)
def _load_defaults() -> dict:
    with open(_DEFAULTS_FILE) as f:
        return _flatten(yaml.safe_load(f))


def get_settings(file: Optional[Union[str, os.PathLike]] = None, **overrides) -> Settings:
    """Load the packaged defaults, merge a user file and keyword overrides, and validate.

    Parameters
    ----------
    file : str or os.PathLike, optional
        YAML file merged over the defaults. If not provided, the environment variable ``PACKCOUNT_CONFIG`` is used when set.
    **overrides : dict
        Individual settings overriding both files.

    Returns
    -------
    Settings
        The validated settings.
    """
    cfg = dict(_load_defaults())

    file = file or os.getenv("PACKCOUNT_CONFIG")
    if file:
        with open(file) as f:
            user = _flatten(yaml.safe_load(f))
        logger.info("Merging user configuration from %s", file)
        cfg.update(user)

    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return Settings(**cfg)


def worker_count(max_cores: Optional[int] = None) -> int:
    """Return the number of worker processes to use.

    Parameters
    ----------
    max_cores : int, optional
        Explicit request. Defaults to the ``PACKCOUNT_THREADS`` environment variable, or 1.

    Returns
    -------
    int
        A positive number of workers.
    """
    if max_cores is None:
        try:
            max_cores = int(os.getenv("PACKCOUNT_THREADS", "1"))
        except ValueError:
            raise ValueError(f"PACKCOUNT_THREADS must be an integer, got '{os.getenv('PACKCOUNT_THREADS')}'.")
    return max(1, min(max_cores, os.cpu_count() or 1))


def make_rng(seed: Optional[Union[int, np.random.Generator]] = None) -> np.random.Generator:
    """Build a random stream from a 64-bit seed, or pass an existing generator through.

    Parameters
    ----------
    seed : int or np.random.Generator, optional
        Seed of the stream. A generator is returned unchanged.

    Returns
    -------
    np.random.Generator
        The random stream.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(np.random.SeedSequence(seed))


def spawn_rngs(seed: Optional[int], k: int) -> list[np.random.Generator]:
    """Derive k independent child streams of a seed.

    The children only depend on the seed and their index, so serial and parallel runs draw identical numbers.

    Parameters
    ----------
    seed : int, optional
        Seed of the parent stream.
    k : int
        Number of child streams.

    Returns
    -------
    list of np.random.Generator
        The child streams.
    """
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


def randbelow(rng: np.random.Generator, n: int) -> int:
    """Draw an exactly uniform integer in [0, n), including for n beyond 64 bits.

    Parameters
    ----------
    rng : np.random.Generator
        Random stream.
    n : int
        Exclusive upper bound, positive.

    Returns
    -------
    int
        The draw.
    """
    if n <= 0:
        raise ValueError(f"The upper bound must be positive, got {n}.")
    if n < 2**62:
        return int(rng.integers(n))
    nbits = n.bit_length()
    while True:
        value = 0
        for _ in range(0, nbits, 62):
            value = (value << 62) | int(rng.integers(2**62))
        value >>= (-nbits) % 62
        if value < n:
            return value
