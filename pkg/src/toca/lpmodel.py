"""Connection-activation models and the LP/ILP solver backend.

The decision variables are one activation count x_e per edge plus one flow
variable per commodity per arc.  Minimizing the total activation subject to

  * flow conservation for every commodity at every node,
  * per-edge (or per-arc) capacity x_e * ccap(e),

yields the fractional relaxation; restricting x to integers gives the exact
model.  In the oblivious variant the commodity set is one demand per edge
(the worst-case pattern); symmetric demands make the two flow directions of
a commodity mirror images, so the reduced model keeps a single commodity
per edge and charges both directions of an edge against one shared
capacity row.  The full (unreduced) model keeps one commodity per arc and
ties the mirrored flows together with explicit equality rows; both models
have the same optimum and the reduced one is solved by default.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .errors import SolverError, UsageError
from .topology import Arc, EdgeId, Topology
from .traffic import Pair, TrafficMatrix, check_ratio

DEFAULT_TIME_LIMIT_S = 3600.0
DEFAULT_MIP_GAP = 1e-9
LEMMA1_TOL = 1e-6


class Mode(enum.Enum):
    LP_RELAXATION = "lp"
    ILP = "ilp"


class Variant(enum.Enum):
    OBLIVIOUS = "oblivious"
    TRAFFIC_AWARE = "traffic-aware"


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    TIME_LIMIT = "time-limit"


@dataclass(frozen=True)
class SolveLimits:
    time_limit_s: float = DEFAULT_TIME_LIMIT_S
    mip_gap: float = DEFAULT_MIP_GAP


@dataclass
class LpProblem:
    """min c.x  s.t.  A_ub x <= b_ub, A_eq x = b_eq, lb <= x <= ub."""

    c: np.ndarray
    A_ub: sp.csr_matrix | None
    b_ub: np.ndarray | None
    A_eq: sp.csr_matrix | None
    b_eq: np.ndarray | None
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray | None = None


@dataclass
class RawSolution:
    status: SolveStatus
    x: np.ndarray | None
    objective: float | None
    is_basic: bool
    dual_bound: float | None = None
    gap: float | None = None


class SolverBackend:
    """Solver interface.

    Contract for `solve_lp`: an OPTIMAL result must be a vertex (basic)
    solution of the LP; backends built on interior-point methods must run
    crossover.  The rounding and fixing steps downstream rely on it.
    """

    name = "abstract"

    def solve_lp(self, lp: LpProblem, limits: SolveLimits) -> RawSolution:
        raise NotImplementedError

    def solve_mip(self, lp: LpProblem, limits: SolveLimits) -> RawSolution:
        raise NotImplementedError


class HighsBackend(SolverBackend):
    """HiGHS via scipy: dual simplex for LPs, branch-and-bound for ILPs."""

    name = "highs"

    def solve_lp(self, lp: LpProblem, limits: SolveLimits) -> RawSolution:
        res = linprog(
            lp.c,
            A_ub=lp.A_ub,
            b_ub=lp.b_ub,
            A_eq=lp.A_eq,
            b_eq=lp.b_eq,
            bounds=np.column_stack([lp.lb, lp.ub]),
            method="highs-ds",
            options={"time_limit": limits.time_limit_s},
        )
        if res.status == 0:
            return RawSolution(SolveStatus.OPTIMAL, res.x, float(res.fun), True)
        if res.status == 2:
            return RawSolution(SolveStatus.INFEASIBLE, None, None, False)
        if res.status == 1:
            return RawSolution(SolveStatus.TIME_LIMIT, None, None, False)
        raise SolverError(f"LP solve failed: {res.message}")

    def solve_mip(self, lp: LpProblem, limits: SolveLimits) -> RawSolution:
        constraints = []
        if lp.A_ub is not None:
            constraints.append(LinearConstraint(lp.A_ub, -np.inf, lp.b_ub))
        if lp.A_eq is not None:
            constraints.append(LinearConstraint(lp.A_eq, lp.b_eq, lp.b_eq))
        res = milp(
            lp.c,
            constraints=constraints,
            integrality=lp.integrality,
            bounds=Bounds(lp.lb, lp.ub),
            options={
                "time_limit": limits.time_limit_s,
                "mip_rel_gap": limits.mip_gap,
            },
        )
        gap = getattr(res, "mip_gap", None)
        bound = getattr(res, "mip_dual_bound", None)
        if res.status == 0:
            return RawSolution(
                SolveStatus.OPTIMAL, res.x, float(res.fun), False, bound, gap
            )
        if res.status == 2:
            return RawSolution(SolveStatus.INFEASIBLE, None, None, False)
        if res.status == 1:
            obj = float(res.fun) if res.x is not None else None
            return RawSolution(SolveStatus.TIME_LIMIT, res.x, obj, False, bound, gap)
        raise SolverError(f"ILP solve failed: {res.message}")


@dataclass
class TocaModel:
    """Assembled model.  Constraint matrices are built once; the heuristics
    tighten variable bounds between solves instead of rebuilding."""

    topo: Topology
    rho: Fraction
    mode: Mode
    variant: Variant
    index_reduced: bool
    commodities: tuple[Pair, ...]
    demands: tuple[Fraction, ...]
    arcs: tuple[Arc, ...]
    lp: LpProblem
    _overrides: dict[EdgeId, tuple[int, int]] = field(default_factory=dict)

    @property
    def num_edges(self) -> int:
        return self.topo.num_edges

    def flow_var(self, commodity: int, arc: int) -> int:
        return self.num_edges + commodity * len(self.arcs) + arc

    @property
    def has_overrides(self) -> bool:
        return bool(self._overrides)

    def set_bounds(self, e: EdgeId, lo: int, hi: int) -> None:
        cap = self.topo.edges[e].connections
        if not (0 <= lo <= hi <= cap):
            raise UsageError(f"bounds [{lo}, {hi}] invalid for edge {e} (0..{cap})")
        self._overrides[e] = (lo, hi)

    def fix(self, e: EdgeId, value: int) -> None:
        self.set_bounds(e, value, value)

    def clear_overrides(self) -> None:
        self._overrides.clear()

    def current_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lb = self.lp.lb.copy()
        ub = self.lp.ub.copy()
        for e, (lo, hi) in self._overrides.items():
            lb[e] = lo
            ub[e] = hi
        return lb, ub


@dataclass(frozen=True)
class FractionalSolution:
    """Result of one solve.  `xstar` is indexed by edge id; `flows` maps
    (commodity, arc) to its flow value, omitting zeros."""

    status: SolveStatus
    xstar: tuple[float, ...] | None
    flows: dict[tuple[Pair, Arc], float] | None
    objective: float | None
    objective_exact: Fraction | None
    is_basic: bool
    bound: float | None = None
    gap: float | None = None
    solve_ms: float = 0.0


def _assemble(
    topo: Topology,
    rho: Fraction,
    mode: Mode,
    variant: Variant,
    index_reduced: bool,
    commodities: Sequence[Pair],
    demands: Sequence[Fraction],
    per_edge_capacity: bool,
    symmetry_rows: bool,
) -> TocaModel:
    m = topo.num_edges
    arcs = tuple(topo.arcs())
    num_arcs = len(arcs)
    arc_index = {a: i for i, a in enumerate(arcs)}
    nvars = m + len(commodities) * num_arcs

    def fvar(k: int, a: int) -> int:
        return m + k * num_arcs + a

    eq_rows: list[int] = []
    eq_cols: list[int] = []
    eq_vals: list[float] = []
    b_eq: list[float] = []
    row = 0
    for k, (s, t) in enumerate(commodities):
        d = float(demands[k])
        for v in range(topo.num_nodes):
            for w, eid in topo.neighbors(v):
                eq_rows.append(row)
                eq_cols.append(fvar(k, arc_index[(v, w)]))
                eq_vals.append(1.0)
                eq_rows.append(row)
                eq_cols.append(fvar(k, arc_index[(w, v)]))
                eq_vals.append(-1.0)
            b_eq.append(d if v == s else -d if v == t else 0.0)
            row += 1
    if symmetry_rows:
        # Mirrored commodities must route mirrored flows: f_{s,t}(u,v) = f_{t,s}(v,u).
        rev_commodity = {pair: i for i, pair in enumerate(commodities)}
        for k, (s, t) in enumerate(commodities):
            if s > t:
                continue
            krev = rev_commodity[(t, s)]
            for a, (u, v) in enumerate(arcs):
                eq_rows.append(row)
                eq_cols.append(fvar(k, a))
                eq_vals.append(1.0)
                eq_rows.append(row)
                eq_cols.append(fvar(krev, arc_index[(v, u)]))
                eq_vals.append(-1.0)
                b_eq.append(0.0)
                row += 1

    ub_rows: list[int] = []
    ub_cols: list[int] = []
    ub_vals: list[float] = []
    b_ub: list[float] = []
    cap_row = 0
    if per_edge_capacity:
        # Symmetric commodities: both directions of edge e share one row.
        for e in topo.edges:
            for k in range(len(commodities)):
                ub_rows.extend((cap_row, cap_row))
                ub_cols.extend((fvar(k, 2 * e.id), fvar(k, 2 * e.id + 1)))
                ub_vals.extend((1.0, 1.0))
            ub_rows.append(cap_row)
            ub_cols.append(e.id)
            ub_vals.append(-float(e.ccap))
            b_ub.append(0.0)
            cap_row += 1
    else:
        for a, (u, v) in enumerate(arcs):
            eid = a // 2
            for k in range(len(commodities)):
                ub_rows.append(cap_row)
                ub_cols.append(fvar(k, a))
                ub_vals.append(1.0)
            ub_rows.append(cap_row)
            ub_cols.append(eid)
            ub_vals.append(-float(topo.edges[eid].ccap))
            b_ub.append(0.0)
            cap_row += 1

    c = np.zeros(nvars)
    c[:m] = 1.0
    lb = np.zeros(nvars)
    ub = np.full(nvars, np.inf)
    for e in topo.edges:
        ub[e.id] = float(e.connections)
    A_eq = (
        sp.csr_matrix((eq_vals, (eq_rows, eq_cols)), shape=(row, nvars))
        if row
        else None
    )
    A_ub = sp.csr_matrix((ub_vals, (ub_rows, ub_cols)), shape=(cap_row, nvars))
    integrality = None
    if mode is Mode.ILP:
        integrality = np.zeros(nvars)
        integrality[:m] = 1
    lp = LpProblem(
        c=c,
        A_ub=A_ub,
        b_ub=np.array(b_ub),
        A_eq=A_eq,
        b_eq=np.array(b_eq) if A_eq is not None else None,
        lb=lb,
        ub=ub,
        integrality=integrality,
    )
    return TocaModel(
        topo=topo,
        rho=rho,
        mode=mode,
        variant=variant,
        index_reduced=index_reduced,
        commodities=tuple(commodities),
        demands=tuple(demands),
        arcs=arcs,
        lp=lp,
    )


def build_oblivious(
    topo: Topology,
    rho: Fraction | float | str,
    mode: Mode = Mode.LP_RELAXATION,
    index_reduction: bool = True,
) -> TocaModel:
    """Model against the worst-case pattern scaled by rho.

    With `index_reduction` (the default) there is one commodity per edge
    and one capacity row per edge; without it, one commodity per arc, one
    capacity row per arc, and explicit flow-symmetry rows.
    """
    rho = check_ratio(rho)
    if topo.num_edges == 0:
        raise UsageError("topology has no edges")
    if index_reduction:
        commodities: list[Pair] = [(e.u, e.v) for e in topo.edges]
        demands = [rho * e.capacity for e in topo.edges]
    else:
        commodities = list(topo.arcs())
        demands = [rho * topo.edges[a // 2].capacity for a in range(2 * topo.num_edges)]
    return _assemble(
        topo,
        rho,
        mode,
        Variant.OBLIVIOUS,
        index_reduction,
        commodities,
        demands,
        per_edge_capacity=index_reduction,
        symmetry_rows=not index_reduction,
    )


def build_traffic_aware(
    topo: Topology,
    traffic: TrafficMatrix,
    rho: Fraction | float | str,
    mode: Mode = Mode.LP_RELAXATION,
) -> TocaModel:
    """Model against a single known matrix scaled by rho.

    One commodity per positive demand; capacities are per arc and no
    symmetry is assumed.
    """
    rho = check_ratio(rho)
    if topo.num_edges == 0:
        raise UsageError("topology has no edges")
    if traffic.num_nodes != topo.num_nodes:
        raise UsageError(
            f"matrix covers {traffic.num_nodes} nodes, topology has {topo.num_nodes}"
        )
    commodities = []
    demands = []
    for pair, value in traffic.items():
        commodities.append(pair)
        demands.append(rho * value)
    return _assemble(
        topo,
        rho,
        Mode(mode),
        Variant.TRAFFIC_AWARE,
        False,
        commodities,
        demands,
        per_edge_capacity=False,
        symmetry_rows=False,
    )


def lemma1_counts(
    xstar: Sequence[float],
    topo: Topology,
    rho: Fraction,
    tol: float = LEMMA1_TOL,
) -> tuple[int, int]:
    """(h, l): edges at their connection cap vs. strictly inside (0, rho*c_e).

    A basic optimum of the oblivious LP satisfies l <= h.
    """
    h = 0
    l = 0
    for e, x in zip(topo.edges, xstar):
        if x >= e.connections - tol:
            h += 1
        elif tol < x < float(rho * e.connections) - tol:
            l += 1
    return h, l


def solve(
    model: TocaModel,
    backend: SolverBackend | None = None,
    limits: SolveLimits | None = None,
) -> FractionalSolution:
    """Solve the model at its current bounds.

    LP solves must come back basic (vertex) solutions; a fresh oblivious
    LP optimum is additionally checked against the basic-solution
    structure bound (see `lemma1_counts`).  Violations of either indicate
    a misconfigured backend.
    """
    backend = backend or HighsBackend()
    limits = limits or SolveLimits()
    lb, ub = model.current_bounds()
    lp = LpProblem(
        c=model.lp.c,
        A_ub=model.lp.A_ub,
        b_ub=model.lp.b_ub,
        A_eq=model.lp.A_eq,
        b_eq=model.lp.b_eq,
        lb=lb,
        ub=ub,
        integrality=model.lp.integrality,
    )
    t0 = time.perf_counter()
    if model.mode is Mode.ILP:
        raw = backend.solve_mip(lp, limits)
    else:
        raw = backend.solve_lp(lp, limits)
    solve_ms = (time.perf_counter() - t0) * 1000.0

    if raw.x is None:
        return FractionalSolution(
            status=raw.status,
            xstar=None,
            flows=None,
            objective=None,
            objective_exact=None,
            is_basic=False,
            bound=raw.dual_bound,
            gap=raw.gap,
            solve_ms=solve_ms,
        )

    m = model.num_edges
    xstar = tuple(max(0.0, float(v)) for v in raw.x[:m])
    flows: dict[tuple[Pair, Arc], float] = {}
    for k, pair in enumerate(model.commodities):
        base = m + k * len(model.arcs)
        for a, arc in enumerate(model.arcs):
            val = float(raw.x[base + a])
            if val > 1e-9:
                flows[(pair, arc)] = val
    if model.mode is not Mode.ILP:
        if raw.status is SolveStatus.OPTIMAL and not raw.is_basic:
            raise SolverError(
                f"backend {backend.name!r} returned a non-basic LP solution"
            )
        if (
            raw.status is SolveStatus.OPTIMAL
            and model.variant is Variant.OBLIVIOUS
            and not model.has_overrides
        ):
            h, l = lemma1_counts(xstar, model.topo, model.rho)
            if l > h:
                raise SolverError(
                    f"backend {backend.name!r} violated the basic-solution "
                    f"structure bound: {l} strictly fractional vs {h} saturated"
                )
    return FractionalSolution(
        status=raw.status,
        xstar=xstar,
        flows=flows,
        objective=raw.objective,
        objective_exact=sum((Fraction(v) for v in xstar), Fraction(0)),
        is_basic=raw.is_basic,
        bound=raw.dual_bound,
        gap=raw.gap,
        solve_ms=solve_ms,
    )


def write_lp_text(model: TocaModel, path: str) -> None:
    """Dump the model at its current bounds in the plain LP text format."""
    m = model.num_edges
    names = [f"x_{e.u}_{e.v}" for e in model.topo.edges]
    for s, t in model.commodities:
        for u, v in model.arcs:
            names.append(f"f_{s}_{t}__{u}_{v}")

    def render(matrix: sp.csr_matrix, r: int) -> str:
        start, end = matrix.indptr[r], matrix.indptr[r + 1]
        terms = []
        for idx in range(start, end):
            coef = matrix.data[idx]
            terms.append(f"{'+' if coef >= 0 else '-'} {abs(coef):.12g} {names[matrix.indices[idx]]}")
        return " ".join(terms)

    lb, ub = model.current_bounds()
    lines = ["Minimize", " obj: " + " + ".join(names[:m]), "Subject To"]
    if model.lp.A_eq is not None:
        for r in range(model.lp.A_eq.shape[0]):
            lines.append(f" eq{r}: {render(model.lp.A_eq, r)} = {model.lp.b_eq[r]:.12g}")
    for r in range(model.lp.A_ub.shape[0]):
        lines.append(f" cap{r}: {render(model.lp.A_ub, r)} <= {model.lp.b_ub[r]:.12g}")
    lines.append("Bounds")
    for i in range(m):
        lines.append(f" {lb[i]:.12g} <= {names[i]} <= {ub[i]:.12g}")
    if model.mode is Mode.ILP:
        lines.append("Generals")
        lines.append(" " + " ".join(names[:m]))
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
