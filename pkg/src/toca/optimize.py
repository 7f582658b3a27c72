"""Activation algorithms: rounding, bound-driven heuristics, exact solve,
and the closed form for uniform capacities.

All algorithms start from the same model family.  The two heuristics first
box every activation variable into the unit interval around its fractional
optimum, then repeatedly fix the variable closest to an integer (downward
or upward) and re-solve; each iteration pins one more variable, so they
terminate after at most |E| re-solves.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

from .errors import InternalError, ModelError, SolverError, UsageError
from .lpmodel import (
    FractionalSolution,
    Mode,
    SolveLimits,
    SolveStatus,
    SolverBackend,
    TocaModel,
    Variant,
    build_oblivious,
    build_traffic_aware,
    solve,
)
from .topology import ActivationSolution, Topology
from .traffic import TrafficMatrix, check_ratio

INT_TOL = 1e-6

ALGORITHMS = ("rnd", "dwn", "up", "exact", "uniform")


@dataclass(frozen=True)
class AlgorithmRun:
    """Outcome of one algorithm on one instance.

    `objective` is the activation total z; `lp_objective` the fractional
    optimum z* when the algorithm solved the relaxation.  `bound` and
    `gap` are only set by the exact solver, and `timed_out` marks an
    interrupted proof (the activation is then the incumbent, if any).
    """

    algorithm: str
    variant: Variant
    activation: ActivationSolution | None
    objective: int | None
    lp_objective: Fraction | None
    iterations: int
    rollbacks: int
    runtime_ms: float
    lp_solution: FractionalSolution | None = None
    timed_out: bool = False
    bound: float | None = None
    gap: float | None = None


def _snap_int(value: float) -> int | None:
    nearest = round(value)
    return int(nearest) if abs(value - nearest) <= INT_TOL else None


def _ceil(value: float) -> int:
    snapped = _snap_int(value)
    return snapped if snapped is not None else math.ceil(value)


def _floor(value: float) -> int:
    snapped = _snap_int(value)
    return snapped if snapped is not None else math.floor(value)


def _build(
    topo: Topology,
    rho: Fraction | float | str,
    traffic: TrafficMatrix | None,
    mode: Mode,
) -> TocaModel:
    if traffic is None:
        return build_oblivious(topo, rho, mode)
    return build_traffic_aware(topo, traffic, rho, mode)


def _solved_lp(
    model: TocaModel,
    backend: SolverBackend | None,
    limits: SolveLimits | None,
) -> FractionalSolution:
    sol = solve(model, backend, limits)
    if sol.status is not SolveStatus.OPTIMAL:
        raise SolverError(f"fractional relaxation ended {sol.status.value}")
    return sol


def rnd(
    topo: Topology,
    rho: Fraction | float | str,
    backend: SolverBackend | None = None,
    *,
    traffic: TrafficMatrix | None = None,
    limits: SolveLimits | None = None,
) -> AlgorithmRun:
    """Round the fractional optimum up, edge by edge.  Zero stays zero."""
    t0 = time.perf_counter()
    model = _build(topo, rho, traffic, Mode.LP_RELAXATION)
    sol = _solved_lp(model, backend, limits)
    act = ActivationSolution(tuple(_ceil(v) for v in sol.xstar))
    act.validate(topo)
    return AlgorithmRun(
        algorithm="rnd",
        variant=model.variant,
        activation=act,
        objective=act.total,
        lp_objective=sol.objective_exact,
        iterations=0,
        rollbacks=0,
        runtime_ms=(time.perf_counter() - t0) * 1000.0,
        lp_solution=sol,
    )


def _heuristic(
    name: str,
    downward: bool,
    topo: Topology,
    rho: Fraction | float | str,
    backend: SolverBackend | None,
    traffic: TrafficMatrix | None,
    limits: SolveLimits | None,
) -> AlgorithmRun:
    t0 = time.perf_counter()
    model = _build(topo, rho, traffic, Mode.LP_RELAXATION)
    initial = _solved_lp(model, backend, limits)
    for e, value in enumerate(initial.xstar):
        model.set_bounds(e, _floor(value), _ceil(value))

    current = initial
    iterations = 0
    rollbacks = 0
    while True:
        fractional = [
            (e, value)
            for e, value in enumerate(current.xstar)
            if _snap_int(value) is None
        ]
        if not fractional:
            break
        if iterations >= model.num_edges:
            raise InternalError("fixing loop exceeded the edge count")
        if downward:
            e, value = min(fractional, key=lambda ev: (ev[1] - math.floor(ev[1]), ev[0]))
            model.fix(e, math.floor(value))
            nxt = solve(model, backend, limits)
            if nxt.status is SolveStatus.INFEASIBLE:
                # Fixing down cut off the polytope; the upward fix cannot,
                # since it only relaxes capacity relative to the last solve.
                rollbacks += 1
                model.fix(e, math.ceil(value))
                nxt = solve(model, backend, limits)
        else:
            e, value = min(fractional, key=lambda ev: (math.ceil(ev[1]) - ev[1], ev[0]))
            model.fix(e, math.ceil(value))
            nxt = solve(model, backend, limits)
        if nxt.status is not SolveStatus.OPTIMAL:
            raise InternalError(f"re-solve after fixing edge {e} ended {nxt.status.value}")
        current = nxt
        iterations += 1

    counts = []
    for e, value in enumerate(current.xstar):
        snapped = _snap_int(value)
        if snapped is None:
            raise InternalError(f"edge {e} still fractional after fixing loop")
        counts.append(snapped)
    act = ActivationSolution(tuple(counts))
    act.validate(topo)
    return AlgorithmRun(
        algorithm=name,
        variant=model.variant,
        activation=act,
        objective=act.total,
        lp_objective=initial.objective_exact,
        iterations=iterations,
        rollbacks=rollbacks,
        runtime_ms=(time.perf_counter() - t0) * 1000.0,
        lp_solution=initial,
    )


def heur_down(
    topo: Topology,
    rho: Fraction | float | str,
    backend: SolverBackend | None = None,
    *,
    traffic: TrafficMatrix | None = None,
    limits: SolveLimits | None = None,
) -> AlgorithmRun:
    """Fix fractional variables downward first, rolling back on infeasibility."""
    return _heuristic("dwn", True, topo, rho, backend, traffic, limits)


def heur_up(
    topo: Topology,
    rho: Fraction | float | str,
    backend: SolverBackend | None = None,
    *,
    traffic: TrafficMatrix | None = None,
    limits: SolveLimits | None = None,
) -> AlgorithmRun:
    """Fix fractional variables upward; never needs a rollback."""
    return _heuristic("up", False, topo, rho, backend, traffic, limits)


def exact(
    topo: Topology,
    rho: Fraction | float | str,
    backend: SolverBackend | None = None,
    *,
    traffic: TrafficMatrix | None = None,
    limits: SolveLimits | None = None,
) -> AlgorithmRun:
    """Integer optimum.  A time limit surfaces in the run record: the
    activation is the best incumbent (or None) with its bound and gap."""
    t0 = time.perf_counter()
    model = _build(topo, rho, traffic, Mode.ILP)
    sol = solve(model, backend, limits)
    if sol.status is SolveStatus.INFEASIBLE:
        raise ModelError("integer model is infeasible at full activation")
    act = None
    z = None
    if sol.xstar is not None:
        counts = []
        for e, value in enumerate(sol.xstar):
            snapped = _snap_int(value)
            if snapped is None:
                raise SolverError(f"integer solve left edge {e} at {value}")
            counts.append(snapped)
        act = ActivationSolution(tuple(counts))
        act.validate(topo)
        z = act.total
    return AlgorithmRun(
        algorithm="exact",
        variant=model.variant,
        activation=act,
        objective=z,
        lp_objective=None,
        iterations=0,
        rollbacks=0,
        runtime_ms=(time.perf_counter() - t0) * 1000.0,
        timed_out=sol.status is SolveStatus.TIME_LIMIT,
        bound=sol.bound,
        gap=sol.gap,
    )


def uniform_closed_form(topo: Topology, rho: Fraction | float | str) -> AlgorithmRun:
    """With uniform capacities the per-edge optimum decouples: activate
    ceil(rho * c_e) connections on every edge.  No LP is solved."""
    t0 = time.perf_counter()
    rho = check_ratio(rho)
    if topo.num_edges == 0:
        raise UsageError("topology has no edges")
    caps = {e.capacity for e in topo.edges}
    if len(caps) > 1:
        raise UsageError(
            "closed form needs uniform capacities; use rnd for this topology"
        )
    act = ActivationSolution(tuple(math.ceil(rho * e.connections) for e in topo.edges))
    act.validate(topo)
    return AlgorithmRun(
        algorithm="uniform",
        variant=Variant.OBLIVIOUS,
        activation=act,
        objective=act.total,
        lp_objective=None,
        iterations=0,
        rollbacks=0,
        runtime_ms=(time.perf_counter() - t0) * 1000.0,
    )


def approx_ratio_bound(rho: Fraction | float | str, c_min: int) -> Fraction:
    """Worst-case ratio of the rounded solution to the integer optimum."""
    rho = check_ratio(rho)
    if not isinstance(c_min, int) or c_min < 1:
        raise UsageError(f"c_min must be a positive integer, got {c_min}")
    rc = rho * c_min
    if rc < 1:
        return max(1 / rc, Fraction(2))
    return 1 + 1 / rc


def uniform_ratio_bound(rho: Fraction | float | str, c_avg: Fraction | int) -> Fraction:
    """Worst-case ratio of the uniform closed form to the integer optimum."""
    rho = check_ratio(rho)
    c_avg = Fraction(c_avg)
    if c_avg <= 0:
        raise UsageError(f"average connection count must be positive, got {c_avg}")
    p, q = rho.numerator, rho.denominator
    return min(1 / rho, 1 + Fraction(q - 1) / (p * c_avg))
