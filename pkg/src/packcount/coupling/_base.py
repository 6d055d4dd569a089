"""Couplings as explicit joint tables, maximal couplings by max-flow and conditional gluing."""

import logging
import math
from collections import defaultdict
from collections.abc import Callable, Hashable, Iterable, Sequence
from fractions import Fraction
from typing import NamedTuple, Optional, Union

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import maximum_flow

from ..utils import CapacityError, InvariantError, get_settings, randbelow

__all__ = [
    "Coupling",
    "ExactJoint",
    "couple_uniform_sets",
    "glue",
    "identity_coupling",
    "maxflow_coupling",
]

logger = logging.getLogger(__name__)

_INT32_MAX = 2**31 - 1

Number = Union[int, float, Fraction]


class ExactJoint(NamedTuple):
    """Joint table in exact arithmetic: ``Pr[(a, b)] = numerators[(a, b)] / denominator``."""

    numerators: dict[tuple[int, int], int]
    denominator: int


def _as_fraction(x: Number) -> Fraction:
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def _reduce(numerators: dict[tuple[int, int], int], denominator: int) -> ExactJoint:
    g = denominator
    for x in numerators.values():
        g = math.gcd(g, x)
        if g == 1:
            break
    return ExactJoint({k: x // g for k, x in numerators.items() if x}, denominator // g)


class Coupling:
    """Joint distribution over pairs from two finite supports.

    Parameters
    ----------
    support_a, support_b : sequence
        Ordered supports of the two coordinates.
    joint : scipy.sparse.spmatrix
        Probability of every pair of indices.
    exact : ExactJoint, optional
        The same table in exact arithmetic. When given, ``joint`` may be omitted.
    attrs : dict, optional
        Metadata describing the construction.
    intermediate : Coupling, optional
        A coupling from which this one was built.
    tolerance : float, optional
        Absolute tolerance of the marginal checks. Defaults to the ``tolerance`` setting.

    Notes
    -----
    The marginals ``mu_a`` and ``mu_b`` are the row and column sums of the table. Constructors of this module pass the
    marginals they target through ``expected_a`` / ``expected_b``, which are then checked against the table.
    """

    def __init__(
        self,
        support_a: Sequence[Hashable],
        support_b: Sequence[Hashable],
        joint: Optional[sparse.spmatrix] = None,
        *,
        exact: Optional[ExactJoint] = None,
        expected_a: Optional[Sequence[Number]] = None,
        expected_b: Optional[Sequence[Number]] = None,
        attrs: Optional[dict] = None,
        intermediate: Optional["Coupling"] = None,
        tolerance: Optional[float] = None,
    ):
        self.support_a = tuple(support_a)
        self.support_b = tuple(support_b)
        shape = (len(self.support_a), len(self.support_b))
        if exact is not None:
            exact = _reduce(exact.numerators, exact.denominator)
            keys = list(exact.numerators)
            joint = sparse.csr_matrix(
                (
                    [x / exact.denominator for x in exact.numerators.values()],
                    ([k[0] for k in keys], [k[1] for k in keys]),
                ),
                shape=shape,
                dtype=np.float64,
            )
        if joint is None:
            raise ValueError("A coupling needs a joint table.")
        self.joint = sparse.csr_matrix(joint, dtype=np.float64)
        if self.joint.shape != shape:
            raise ValueError(f"The joint table has shape {self.joint.shape}, expected {shape}.")
        self.exact = exact
        self.attrs = dict(attrs or {})
        self.intermediate = intermediate
        self.mu_a = np.asarray(self.joint.sum(axis=1)).ravel()
        self.mu_b = np.asarray(self.joint.sum(axis=0)).ravel()

        tol = get_settings().tolerance if tolerance is None else tolerance
        err = self.marginal_error(expected_a, expected_b)
        if err > tol:
            raise InvariantError(f"The coupling is not marginal-faithful: error {err:.3e} exceeds {tol:.1e}.")

    def __repr__(self):
        return f"Coupling({len(self.support_a)} x {len(self.support_b)}, nnz={self.joint.nnz})"

    def marginal_error(self, expected_a: Optional[Sequence[Number]] = None, expected_b: Optional[Sequence[Number]] = None) -> float:
        """Largest deviation of the total mass and marginals from their targets."""
        err = abs(float(self.joint.sum()) - 1.0)
        if expected_a is not None:
            err = max(err, float(np.abs(self.mu_a - np.asarray([float(x) for x in expected_a])).max(initial=0.0)))
        if expected_b is not None:
            err = max(err, float(np.abs(self.mu_b - np.asarray([float(x) for x in expected_b])).max(initial=0.0)))
        return err

    def exact_marginals(self) -> tuple[list[Fraction], list[Fraction]]:
        """Exact marginals of the table. Requires the exact table."""
        if self.exact is None:
            raise ValueError("This coupling has no exact table.")
        rows = [0] * len(self.support_a)
        cols = [0] * len(self.support_b)
        for (a, b), x in self.exact.numerators.items():
            rows[a] += x
            cols[b] += x
        D = self.exact.denominator
        return [Fraction(x, D) for x in rows], [Fraction(x, D) for x in cols]

    def items(self) -> Iterable[tuple[Hashable, Hashable, float]]:
        """Pairs of the support and their probability."""
        coo = self.joint.tocoo()
        for a, b, p in zip(coo.row, coo.col, coo.data):
            yield self.support_a[a], self.support_b[b], float(p)

    def probability(self, relation: Callable[[Hashable, Hashable], bool], *, exact: bool = False) -> Union[float, Fraction]:
        """Probability that a drawn pair satisfies a relation."""
        return self.expected(lambda a, b: 1 if relation(a, b) else 0, exact=exact)

    def expected(self, metric: Callable[[Hashable, Hashable], Number], *, exact: bool = False) -> Union[float, Fraction]:
        """Expectation of ``metric(a, b)`` under the coupling.

        With ``exact=True`` the expectation is computed from the exact table and returned as a fraction.
        """
        if exact:
            if self.exact is None:
                raise ValueError("This coupling has no exact table.")
            total = sum(_as_fraction(metric(self.support_a[a], self.support_b[b])) * x for (a, b), x in self.exact.numerators.items())
            return Fraction(total) / self.exact.denominator
        return float(sum(p * metric(a, b) for a, b, p in self.items()))

    def transpose(self) -> "Coupling":
        """The same coupling with both coordinates swapped."""
        exact = None if self.exact is None else ExactJoint({(b, a): x for (a, b), x in self.exact.numerators.items()}, self.exact.denominator)
        return Coupling(
            self.support_b,
            self.support_a,
            None if exact is not None else self.joint.T,
            exact=exact,
            attrs=self.attrs,
            intermediate=self.intermediate,
        )

    def sample(self, rng: np.random.Generator) -> tuple[Hashable, Hashable]:
        """Draw a pair from the table; exactly when the exact table is available."""
        if self.exact is not None:
            r = randbelow(rng, self.exact.denominator)
            for (a, b), x in self.exact.numerators.items():
                if r < x:
                    return self.support_a[a], self.support_b[b]
                r -= x
            raise InvariantError("The exact table does not sum to its denominator.")
        coo = self.joint.tocoo()
        k = rng.choice(coo.nnz, p=coo.data / coo.data.sum())
        return self.support_a[coo.row[k]], self.support_b[coo.col[k]]

    def to_dict(self) -> dict:
        """JSON-serializable description of the table."""
        if self.exact is not None:
            entries = [[a, b, f"{x}/{self.exact.denominator}"] for (a, b), x in sorted(self.exact.numerators.items())]
        else:
            coo = self.joint.tocoo()
            entries = sorted([int(a), int(b), float(p)] for a, b, p in zip(coo.row, coo.col, coo.data))
        return {
            "support_a": [list(x) if isinstance(x, tuple) else x for x in self.support_a],
            "support_b": [list(x) if isinstance(x, tuple) else x for x in self.support_b],
            "entries": entries,
            "attrs": {k: v for k, v in self.attrs.items() if isinstance(v, (int, float, str, bool, list, dict, type(None)))},
        }


def _common_denominator(fractions: Iterable[Fraction]) -> int:
    D = 1
    for f in fractions:
        D = D * f.denominator // math.gcd(D, f.denominator)
    return D


def maxflow_coupling(
    relation: Iterable[tuple[int, int]],
    mu_a: Sequence[Number],
    mu_b: Sequence[Number],
    *,
    support_a: Optional[Sequence[Hashable]] = None,
    support_b: Optional[Sequence[Hashable]] = None,
    attrs: Optional[dict] = None,
) -> Coupling:
    """Coupling maximizing the probability of drawing a related pair.

    The masses are scaled to integers by their common denominator and the mass put on related pairs is a maximum flow
    (Dinic) from the source, through the left side, across the relation, through the right side, to the sink. The
    leftover mass is spread by the north-west corner rule, which never lands on a related pair since the flow is
    maximum. The achieved probability equals ``min_A [1 - mu_a(A) + mu_b(N(A))]``.

    Parameters
    ----------
    relation : iterable of (int, int)
        Related index pairs.
    mu_a, mu_b : sequence of int, float or Fraction
        Distributions on the two sides. Floats are read through their decimal representation.
    support_a, support_b : sequence, optional
        Labels of the two sides. Defaults to the indices.
    attrs : dict, optional
        Extra metadata.

    Returns
    -------
    Coupling
        The coupling, with an exact table. ``attrs["achieved"]`` holds the probability of a related pair.

    Raises
    ------
    CapacityError
        When the least common denominator of the masses does not fit the int32 capacities of the solver.
    """
    fa = [_as_fraction(x) for x in mu_a]
    fb = [_as_fraction(x) for x in mu_b]
    for name, f in (("mu_a", fa), ("mu_b", fb)):
        if any(x < 0 for x in f) or sum(f) != 1:
            raise ValueError(f"{name} is not a probability distribution.")
    na, nb = len(fa), len(fb)
    D = _common_denominator(fa + fb)
    if D > _INT32_MAX:
        raise CapacityError(f"The common denominator {D} of the marginals exceeds the integer capacity range of the max-flow solver.")
    ca = [int(x * D) for x in fa]
    cb = [int(x * D) for x in fb]

    # nodes: 0 source, 1..na left, na+1..na+nb right, na+nb+1 sink
    sink = na + nb + 1
    rows, cols, caps = [], [], []
    for i, c in enumerate(ca):
        if c:
            rows.append(0)
            cols.append(1 + i)
            caps.append(c)
    for j, c in enumerate(cb):
        if c:
            rows.append(1 + na + j)
            cols.append(sink)
            caps.append(c)
    pairs = sorted(set((int(i), int(j)) for i, j in relation))
    for i, j in pairs:
        if ca[i] and cb[j]:
            rows.append(1 + i)
            cols.append(1 + na + j)
            caps.append(min(ca[i], cb[j]))
    graph = sparse.csr_matrix((np.asarray(caps, dtype=np.int32), (rows, cols)), shape=(sink + 1, sink + 1))
    result = maximum_flow(graph, 0, sink, method="dinic")
    F = int(result.flow_value)
    logger.debug("Max-flow coupling: |L|=%s, |R|=%s, %s relation pairs, flow %s/%s.", na, nb, len(pairs), F, D)

    numerators: dict[tuple[int, int], int] = {}
    ra, rb = list(ca), list(cb)
    flow = result.flow.tocoo()
    for u, v, x in zip(flow.row, flow.col, flow.data):
        if x > 0 and 1 <= u <= na and na < v <= na + nb:
            i, j = int(u) - 1, int(v) - 1 - na
            numerators[(i, j)] = numerators.get((i, j), 0) + int(x)
            ra[i] -= int(x)
            rb[j] -= int(x)

    # north-west corner rule on the leftover mass
    i = j = 0
    while i < na and j < nb:
        if ra[i] == 0:
            i += 1
            continue
        if rb[j] == 0:
            j += 1
            continue
        x = min(ra[i], rb[j])
        numerators[(i, j)] = numerators.get((i, j), 0) + x
        ra[i] -= x
        rb[j] -= x

    info = {"achieved": F / D, "achieved_exact": str(Fraction(F, D)), "relation_pairs": len(pairs)}
    info.update(attrs or {})
    return Coupling(
        range(na) if support_a is None else support_a,
        range(nb) if support_b is None else support_b,
        exact=ExactJoint(numerators, D),
        expected_a=fa,
        expected_b=fb,
        attrs=info,
    )


def couple_uniform_sets(A: Iterable[Hashable], B: Iterable[Hashable]) -> Coupling:
    """Coupling of the uniform distributions on two finite sets maximizing the probability of equality.

    The equality probability is exactly ``|A ∩ B| / max(|A|, |B|)``.

    Parameters
    ----------
    A, B : iterable
        Nonempty sets. Their elements keep their order of first appearance.

    Returns
    -------
    Coupling
        The coupling.
    """
    A = list(dict.fromkeys(A))
    B = list(dict.fromkeys(B))
    if not A or not B:
        raise ValueError("Cannot couple uniform distributions on an empty set.")
    index_b = {b: j for j, b in enumerate(B)}
    relation = [(i, index_b[a]) for i, a in enumerate(A) if a in index_b]
    return maxflow_coupling(
        relation,
        [Fraction(1, len(A))] * len(A),
        [Fraction(1, len(B))] * len(B),
        support_a=A,
        support_b=B,
        attrs={"coupling": "uniform-sets"},
    )


def identity_coupling(support: Sequence[Hashable], mu: Optional[Sequence[Number]] = None) -> Coupling:
    """Coupling drawing the same element twice, uniform over the support unless ``mu`` is given."""
    support = tuple(support)
    if not support:
        raise ValueError("Cannot build a coupling on an empty support.")
    f = [Fraction(1, len(support))] * len(support) if mu is None else [_as_fraction(x) for x in mu]
    D = _common_denominator(f)
    return Coupling(
        support,
        support,
        exact=ExactJoint({(k, k): int(x * D) for k, x in enumerate(f) if x}, D),
        expected_a=f,
        expected_b=f,
        attrs={"coupling": "identity"},
    )


def glue(first: Coupling, second: Coupling, *, attrs: Optional[dict] = None) -> Coupling:
    """Compose a coupling of X and Y with a coupling of Y and Z into a coupling of X and Z.

    A pair ``(x, y)`` is drawn from ``first``, then ``z`` from the conditional of ``second`` given ``y``, so that the
    joint table is ``first · diag(1 / mu_Y) · second``.

    Parameters
    ----------
    first : Coupling
        Coupling of X and Y.
    second : Coupling
        Coupling of Y and Z, over the same ordered support of Y.
    attrs : dict, optional
        Metadata of the result.

    Returns
    -------
    Coupling
        Coupling of X and Z, exact when both inputs are.
    """
    if first.support_b != second.support_a:
        raise ValueError("The middle supports of the glued couplings differ.")
    tol = get_settings().tolerance
    if np.abs(first.mu_b - second.mu_a).max(initial=0.0) > tol:
        raise InvariantError("The middle marginals of the glued couplings differ.")

    if first.exact is not None and second.exact is not None:
        D1, D2 = first.exact.denominator, second.exact.denominator
        col_first = defaultdict(int)
        rows_second = defaultdict(list)
        col_list = defaultdict(list)
        for (x, y), n in first.exact.numerators.items():
            col_first[y] += n
            col_list[y].append((x, n))
        row_second = defaultdict(int)
        for (y, z), n in second.exact.numerators.items():
            row_second[y] += n
            rows_second[y].append((z, n))
        for y in set(col_first) | set(row_second):
            if col_first[y] * D2 != row_second[y] * D1:
                raise InvariantError(f"The exact middle marginals differ at index {y}.")
        # Pr[x, z] = sum_y n1[x, y] n2[y, z] / (D2 c_y) with c_y = sum_x n1[x, y]
        L = 1
        for c in col_first.values():
            L = L * c // math.gcd(L, c)
        numerators = defaultdict(int)
        for y, left in col_list.items():
            scale = L // col_first[y]
            for z, n2 in rows_second.get(y, ()):
                for x, n1 in left:
                    numerators[(x, z)] += n1 * n2 * scale
        exact = ExactJoint(dict(numerators), D2 * L)
        return Coupling(first.support_a, second.support_b, exact=exact, attrs=attrs)

    inv = np.divide(1.0, first.mu_b, out=np.zeros_like(first.mu_b), where=first.mu_b > 0)
    joint = first.joint @ sparse.diags(inv) @ second.joint
    return Coupling(first.support_a, second.support_b, joint, attrs=attrs)
