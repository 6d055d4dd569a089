"""Command-line entry point for the estimators and the coupling and mixing experiments."""

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from .counting import exact_count, fpras_count
from .coupling import couple_matching_distributions, exact_contraction, path_coupling_report
from .dynamics import (
    ChainState,
    enumerate_packings,
    exact_tv_curve,
    initial_packing,
    is_irreducible,
    mixing_time,
    reversibility_error,
    run_chain,
    sample_packings,
    stationarity_error,
    transition_matrix,
)
from .graphio import Instance, instance_digest, load_instance
from .packing import available_permutations, is_valid_packing
from .utils import (
    CapacityError,
    DegenerateCouplingError,
    InvariantError,
    NoPerfectMatchingError,
    PackCountError,
    ParseError,
    RegimeError,
    make_rng,
)

__all__ = ["COMMANDS", "RunConfig", "build_parser", "main", "run"]

logger = logging.getLogger(__name__)

COMMANDS = ["count-exact", "count-fpras", "sample", "mix-lab", "couple-lab", "contraction"]

EXIT_CODES = [
    (ParseError, 2),
    (RegimeError, 3),
    (CapacityError, 4),
    (InvariantError, 5),
    (NoPerfectMatchingError, 3),
    (PackCountError, 1),
    (ValueError, 2),
]


class RunConfig(BaseModel):
    """Validated options of one invocation.

    Parameters
    ----------
    command : str
        One of :py:data:`COMMANDS`.
    instance : Path
        JSON instance file.
    seed : int, optional
        64-bit seed. Randomized commands draw and report one when not given.
    epsilon : float, optional
        Accuracy of the estimator, or of the mixing time for the mixing and contraction experiments.
    failure_prob : float
        Failure probability of the estimator.
    steps : int, optional
        Chain steps: burn-in per sample, length of the distance curve, or burn-in before the coupling experiments.
    trials : int, optional
        Number of samples, or of adjacent pairs in the contraction experiment.
    out : Path, optional
        File receiving the report. The report is printed when not given.
    constant_c : float, optional
        Regime constant C of the availability-graph coupling.
    summary : bool
        Whether to print a one-line summary on the standard error.
    samples, burn_in : int, optional
        Budget overrides of the estimator.
    vertex : int, optional
        Vertex of disagreement of the coupling experiment.
    verbose : int
        Verbosity level.
    """

    model_config = ConfigDict(extra="forbid")

    command: Literal["count-exact", "count-fpras", "sample", "mix-lab", "couple-lab", "contraction"]
    instance: Path
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    epsilon: Optional[float] = Field(None, gt=0, lt=1)
    failure_prob: float = Field(0.25, gt=0, lt=1)
    steps: Optional[int] = Field(None, ge=0)
    trials: Optional[int] = Field(None, ge=1)
    out: Optional[Path] = None
    constant_c: Optional[float] = Field(None, gt=0)
    summary: bool = False
    samples: Optional[int] = Field(None, ge=1)
    burn_in: Optional[int] = Field(None, ge=0)
    vertex: Optional[int] = Field(None, ge=0)
    verbose: int = 0

    def echo(self) -> dict:
        """Options that determine the results, as stored in the report."""
        return self.model_dump(mode="json", exclude={"out", "summary", "verbose"})


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _count_exact(inst: Instance, config: RunConfig, seed: Optional[int]) -> dict:
    return {"count": str(exact_count(inst))}


def _count_fpras(inst: Instance, config: RunConfig, seed: Optional[int]) -> dict:
    estimate = fpras_count(
        inst,
        0.5 if config.epsilon is None else config.epsilon,
        config.failure_prob,
        seed,
        samples=config.samples,
        burn_in=config.burn_in,
    )
    return estimate.to_dict()


def _default_steps(inst: Instance, eps: float) -> int:
    return math.ceil(2 * inst.n * (math.log(inst.n) + math.log(1 / eps))) + 1


def _sample(inst: Instance, config: RunConfig, seed: Optional[int]) -> dict:
    eps = 0.01 if config.epsilon is None else config.epsilon
    steps = _default_steps(inst, eps) if config.steps is None else config.steps
    samples = sample_packings(inst, config.trials or 1, steps, seed, progress=config.verbose > 0)
    return {
        "steps": steps,
        "samples": [[list(rho) for rho in p.spins] for p in samples],
        "all_valid": all(is_valid_packing(inst, p) for p in samples),
    }


def _mix_lab(inst: Instance, config: RunConfig, seed: Optional[int]) -> dict:
    eps = 0.01 if config.epsilon is None else config.epsilon
    states = enumerate_packings(inst)
    if not states:
        raise RegimeError("The instance has no valid packing, so there is no chain to analyze.")
    states, P = transition_matrix(inst, states)
    t_max = math.ceil(2 * inst.n * math.log(100 * len(states))) if config.steps is None else config.steps
    start = initial_packing(inst, make_rng(seed))
    curve = exact_tv_curve(inst, start, t_max, states=states, P=P)
    return {
        "n_states": len(states),
        "irreducible": is_irreducible(P),
        "stationarity_error": stationarity_error(P),
        "reversibility_error": reversibility_error(P),
        "regime": inst.q >= 2 * inst.max_degree + 2,
        "start": [list(rho) for rho in start.spins],
        "t_max": t_max,
        "epsilon": eps,
        "mixing_time": mixing_time(curve, eps),
        "tv_distance": curve.values,
    }


def _pick_disagreement(inst: Instance, omega, vertex: Optional[int], rng: np.random.Generator):
    if vertex is not None:
        if vertex >= inst.n:
            raise ParseError(f"Vertex {vertex} is out of range for n={inst.n}.")
        candidates = [vertex]
    else:
        candidates = [v for v in range(inst.n) if inst.neighbors[v]]
    for v in candidates:
        moves = [rho for rho in available_permutations(inst, omega, v) if rho != omega.spins[v]]
        if moves:
            return v, moves[int(rng.integers(len(moves)))]
    raise RegimeError("No vertex of the sampled packing has an alternative available permutation.")


def _couple_lab(inst: Instance, config: RunConfig, seed: Optional[int]) -> dict:
    rng = make_rng(seed)
    steps = 10 * inst.n if config.steps is None else config.steps
    omega = run_chain(inst, ChainState(initial_packing(inst, rng), 0, rng), steps).packing
    v, rho = _pick_disagreement(inst, omega, config.vertex, rng)
    omega_p = omega.replace(v, rho)
    neighbors = []
    for u in inst.neighbors[v]:
        try:
            coupling = couple_matching_distributions(inst, omega, omega_p, v, u, constant_c=config.constant_c)
        except DegenerateCouplingError as err:
            neighbors.append({"neighbor": u, "degenerate": str(err)})
            continue
        neighbors.append({**coupling.attrs, "marginal_error": coupling.marginal_error(), "shape": [len(coupling.support_a), len(coupling.support_b)]})
    contraction = exact_contraction(inst, omega, omega_p)
    return {
        "vertex": v,
        "omega": [list(r) for r in omega.spins],
        "omega_prime": [list(r) for r in omega_p.spins],
        "neighbors": neighbors,
        "expected_distance": float(contraction),
        "expected_distance_exact": str(contraction),
    }


def _contraction(inst: Instance, config: RunConfig, seed: Optional[int]) -> dict:
    ds = path_coupling_report(
        inst,
        config.trials or 100,
        seed,
        burn_in=config.steps,
        epsilon=0.01 if config.epsilon is None else config.epsilon,
        constant_c=config.constant_c,
        progress=config.verbose > 0,
    )
    return {**ds.attrs, "ratios": ds["ratio"].values, "frozen": ds["frozen"].values}


HANDLERS = {
    "count-exact": _count_exact,
    "count-fpras": _count_fpras,
    "sample": _sample,
    "mix-lab": _mix_lab,
    "couple-lab": _couple_lab,
    "contraction": _contraction,
}


def _summary(report: dict) -> str:
    results = report["results"]
    keys = ["count", "value", "n_states", "mixing_time", "beta_hat", "implied_bound", "expected_distance", "all_valid"]
    parts = [f"{k}={results[k]}" for k in keys if k in results]
    return f"{report['command']} on {report['instance_hash'][:12]}: " + ", ".join(parts)


def run(config: RunConfig) -> tuple[int, str]:
    """Execute one command.

    Parameters
    ----------
    config : RunConfig
        The validated options.

    Returns
    -------
    status : int
        Exit status: 0 on success, 2 for parse errors, 3 for regime errors and instances without a valid packing, 4 for
        capacity errors, 5 for internal invariant violations and 1 for any other library error.
    report : str
        The JSON report, or a JSON error document.
    """
    seed = config.seed
    if seed is None and config.command != "count-exact":
        seed = int(np.random.SeedSequence().entropy % 2**64)
        logger.info("No seed given, using %s.", seed)
    try:
        inst = load_instance(config.instance)
        results = HANDLERS[config.command](inst, config, seed)
    except (PackCountError, ValueError) as err:
        status = next(code for cls, code in EXIT_CODES if isinstance(err, cls))
        logger.error("%s: %s", type(err).__name__, err)
        doc = {"command": config.command, "config": config.echo(), "error": type(err).__name__, "message": str(err), "status": status}
        return status, json.dumps(doc, sort_keys=True)

    report = {
        "command": config.command,
        "config": config.echo(),
        "instance_hash": instance_digest(inst),
        "version": __version__,
        "seed": seed,
        "results": _jsonable(results),
    }
    return 0, json.dumps(report, sort_keys=True, indent=2)


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per experiment."""
    parser = argparse.ArgumentParser(prog="packcount", description=__doc__, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        sub.add_argument("--instance", required=True, help="JSON instance file.")
        sub.add_argument("--seed", type=int, default=None, help="64-bit seed; drawn and reported when omitted.")
        sub.add_argument("--epsilon", type=float, default=None, help="Accuracy of the estimate or of the mixing time.")
        sub.add_argument("--failure-prob", type=float, default=0.25, help="Failure probability of the estimator.")
        sub.add_argument("--steps", type=int, default=None, help="Chain steps.")
        sub.add_argument("--trials", type=int, default=None, help="Number of samples or adjacent pairs.")
        sub.add_argument("--out", default=None, help="Report file; printed when omitted.")
        sub.add_argument("--constant-c", type=float, default=None, help="Regime constant C.")
        sub.add_argument("--summary", action="store_true", help="Print a one-line summary on stderr.")
        sub.add_argument("--samples", type=int, default=None, help="Samples per ratio, overriding the schedule.")
        sub.add_argument("--burn-in", type=int, default=None, help="Chain steps per sample, overriding the schedule.")
        sub.add_argument("--vertex", type=int, default=None, help="Vertex of disagreement.")
        sub.add_argument("-v", "--verbose", action="count", default=0, help="Increase verbosity.")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """Parse the arguments, run the command and write its report."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = RunConfig(**vars(args))
    except ValidationError as err:
        logger.error("Invalid options: %s", err)
        doc = {"command": args.command, "error": "ValidationError", "message": str(err), "status": 2}
        print(json.dumps(doc, sort_keys=True))
        return 2

    status, text = run(config)
    if status == 0 and config.summary:
        print(_summary(json.loads(text)), file=sys.stderr)
    if status == 0 and config.out is not None:
        config.out.write_text(text + "\n")
    else:
        print(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
