"""Cayley metric on permutations and minimal transposition paths."""

from collections.abc import Sequence
from dataclasses import dataclass

from ..matchings import Matching, cayley_distance

__all__ = ["TranspositionPath", "apply_transposition", "cayley_distance", "transposition_path"]


def apply_transposition(rho: Sequence[int], tau: tuple[int, int]) -> Matching:
    """Left-multiply a permutation by the transposition of the two values ``tau``."""
    a, b = tau
    return tuple(b if x == a else a if x == b else x for x in rho)


@dataclass(frozen=True)
class TranspositionPath:
    """Transpositions ``tau_1..tau_psi`` with ``target = tau_psi ∘ ... ∘ tau_1 ∘ source``."""

    source: Matching
    target: Matching
    steps: tuple[tuple[int, int], ...]

    def __len__(self):
        return len(self.steps)

    def replay(self) -> list[Matching]:
        """Permutations visited along the path, from ``source`` to ``target``."""
        out = [self.source]
        for tau in self.steps:
            out.append(apply_transposition(out[-1], tau))
        return out


def transposition_path(r: Sequence[int], s: Sequence[int]) -> TranspositionPath:
    """Minimal-length path of transpositions from ``r`` to ``s``.

    Positions are fixed from left to right: at the first position ``k`` where the current permutation and ``s``
    differ, the values ``current[k]`` and ``s[k]`` are swapped. Both values lie on the same cycle of the quotient, so
    every swap increases its number of cycles by one and the path has length ``cayley_distance(r, s)``.

    Parameters
    ----------
    r, s : sequence of int
        Permutations of the same size.

    Returns
    -------
    TranspositionPath
        The path.
    """
    if len(r) != len(s):
        raise ValueError(f"Cannot connect permutations of sizes {len(r)} and {len(s)}.")
    current = tuple(r)
    steps = []
    for k in range(len(s)):
        if current[k] != s[k]:
            tau = (current[k], s[k])
            steps.append(tau)
            current = apply_transposition(current, tau)
    return TranspositionPath(tuple(r), tuple(s), tuple(steps))
