"""Evaluation: MLU under three routers, exhaustive optimum, structure checks.

The maximum link utilization (MLU) of a matrix on a topology is computed
for multi-commodity flow (the fluid optimum), shortest-path routing with
ECMP splits, and 2-segment routing (traffic to each destination may detour
through one midpoint, each leg following ECMP shortest paths).  A matrix
is considered routable when its MLU stays within FEASIBILITY_TOL of 1.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import InternalError, OracleSizeError, SolverError, UsageError
from .lpmodel import FractionalSolution, lemma1_counts
from .topology import ActivationSolution, Arc, Topology, reduce
from .traffic import TrafficMatrix, check_ratio, scale, worst_case_matrix

FEASIBILITY_TOL = 1e-6
DEFAULT_ORACLE_LIMIT = 2_000_000


@dataclass(frozen=True)
class MluResult:
    mlu: float
    feasible: bool
    router: str


@dataclass(frozen=True)
class EcmpFractions:
    """Per-destination arc fractions of one unit of flow leaving `source`.

    Unreachable destinations map to an empty dict.
    """

    source: int
    to: dict[int, dict[Arc, Fraction]]


@dataclass(frozen=True)
class Lemma1Report:
    holds: bool
    saturated: int
    fractional: int


def _result(mlu: float, router: str) -> MluResult:
    return MluResult(mlu, mlu <= 1.0 + FEASIBILITY_TOL, router)


def _dijkstra(topo: Topology, root: int) -> tuple[int | None, ...]:
    dist: list[int | None] = [None] * topo.num_nodes
    heap: list[tuple[int, int]] = [(0, root)]
    while heap:
        d, v = heapq.heappop(heap)
        if dist[v] is not None:
            continue
        dist[v] = d
        for w, eid in topo.neighbors(v):
            if dist[w] is None:
                heapq.heappush(heap, (d + topo.edges[eid].weight, w))
    return tuple(dist)


class _EcmpState:
    """Shortest-path distances plus memoized per-pair arc fractions."""

    def __init__(self, topo: Topology):
        self.topo = topo
        self.dist = [_dijkstra(topo, r) for r in range(topo.num_nodes)]
        self._memo: dict[tuple[int, int], dict[Arc, Fraction]] = {}
        self._memo_float: dict[tuple[int, int], dict[Arc, float]] = {}

    def fractions(self, s: int, t: int) -> dict[Arc, Fraction]:
        key = (s, t)
        got = self._memo.get(key)
        if got is not None:
            return got
        out = self._pair_fractions(s, t)
        self._memo[key] = out
        return out

    def fractions_float(self, s: int, t: int) -> dict[Arc, float]:
        key = (s, t)
        got = self._memo_float.get(key)
        if got is None:
            got = {a: float(v) for a, v in self.fractions(s, t).items()}
            self._memo_float[key] = got
        return got

    def _pair_fractions(self, s: int, t: int) -> dict[Arc, Fraction]:
        if s == t:
            return {}
        dist_s, dist_t = self.dist[s], self.dist[t]
        total = dist_s[t]
        if total is None:
            return {}
        on_path = [
            v
            for v in range(self.topo.num_nodes)
            if dist_s[v] is not None
            and dist_t[v] is not None
            and dist_s[v] + dist_t[v] == total
        ]
        on_path.sort(key=lambda v: dist_s[v])
        share: dict[int, Fraction] = {s: Fraction(1)}
        fractions: dict[Arc, Fraction] = {}
        for v in on_path:
            inflow = share.get(v, Fraction(0))
            if v == t or inflow == 0:
                continue
            # Arcs of the shortest-path DAG leaving v toward t.
            outs = [
                (v, w)
                for w, eid in self.topo.neighbors(v)
                if dist_t[w] is not None
                and dist_s[v] + self.topo.edges[eid].weight + dist_t[w] == total
            ]
            if not outs:
                raise InternalError(f"no shortest-path successor at node {v}")
            split = inflow / len(outs)
            for arc in outs:
                fractions[arc] = fractions.get(arc, Fraction(0)) + split
                share[arc[1]] = share.get(arc[1], Fraction(0)) + split
        if share.get(t) != 1:
            raise InternalError(f"split fractions for ({s}, {t}) do not reach 1")
        return fractions


@lru_cache(maxsize=16)
def _ecmp_state(topo: Topology) -> _EcmpState:
    return _EcmpState(topo)


def ecmp_fractions(topo: Topology, source: int) -> EcmpFractions:
    """Equal-split shortest-path fractions from one source to every node."""
    if not 0 <= source < topo.num_nodes:
        raise UsageError(f"source {source} out of range")
    state = _ecmp_state(topo)
    to = {
        t: dict(state.fractions(source, t))
        for t in range(topo.num_nodes)
        if t != source
    }
    return EcmpFractions(source, to)


def _check_matrix(topo: Topology, traffic: TrafficMatrix) -> None:
    if traffic.num_nodes != topo.num_nodes:
        raise UsageError(
            f"matrix covers {traffic.num_nodes} nodes, topology has {topo.num_nodes}"
        )


def _linprog_min(c, A_ub, b_ub, A_eq, b_eq, bounds) -> np.ndarray:
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs")
    if res.status != 0:
        raise SolverError(f"utilization LP failed: {res.message}")
    return res.x


def mcf_mlu(topo: Topology, traffic: TrafficMatrix) -> MluResult:
    """Fluid-optimal MLU: minimize the load factor over all flow routings.

    Demands are aggregated by source, which preserves the optimum.  A
    positive demand between disconnected nodes yields an infinite MLU.
    """
    _check_matrix(topo, traffic)
    items = list(traffic.items())
    if not items:
        return _result(0.0, "MCF")
    by_source: dict[int, dict[int, Fraction]] = {}
    for (s, t), value in items:
        by_source.setdefault(s, {})[t] = value
    for s, dests in by_source.items():
        dist = _dijkstra(topo, s)
        if any(dist[t] is None for t in dests):
            return MluResult(math.inf, False, "MCF")

    arcs = topo.arcs()
    arc_index = {a: i for i, a in enumerate(arcs)}
    sources = sorted(by_source)
    nvars = 1 + len(sources) * len(arcs)

    def fvar(i: int, a: int) -> int:
        return 1 + i * len(arcs) + a

    eq_rows, eq_cols, eq_vals, b_eq = [], [], [], []
    row = 0
    for i, s in enumerate(sources):
        dests = by_source[s]
        for v in range(topo.num_nodes):
            if v == s:
                continue
            for w, _ in topo.neighbors(v):
                eq_rows.append(row)
                eq_cols.append(fvar(i, arc_index[(v, w)]))
                eq_vals.append(1.0)
                eq_rows.append(row)
                eq_cols.append(fvar(i, arc_index[(w, v)]))
                eq_vals.append(-1.0)
            b_eq.append(-float(dests.get(v, 0)))
            row += 1
    ub_rows, ub_cols, ub_vals = [], [], []
    for a, arc in enumerate(arcs):
        for i in range(len(sources)):
            ub_rows.append(a)
            ub_cols.append(fvar(i, a))
            ub_vals.append(1.0)
        ub_rows.append(a)
        ub_cols.append(0)
        ub_vals.append(-float(topo.edges[a // 2].capacity))
    c = np.zeros(nvars)
    c[0] = 1.0
    x = _linprog_min(
        c,
        sp.csr_matrix((ub_vals, (ub_rows, ub_cols)), shape=(len(arcs), nvars)),
        np.zeros(len(arcs)),
        sp.csr_matrix((eq_vals, (eq_rows, eq_cols)), shape=(row, nvars)),
        np.array(b_eq),
        [(0, None)] * nvars,
    )
    return _result(max(float(x[0]), 0.0), "MCF")


def mcf_feasible(topo: Topology, act: ActivationSolution, traffic: TrafficMatrix) -> bool:
    """Can the activation-induced topology still route the matrix?"""
    return mcf_mlu(reduce(topo, act), traffic).feasible


def spr_mlu(topo: Topology, traffic: TrafficMatrix) -> MluResult:
    """MLU under plain shortest-path routing with ECMP splits (exact)."""
    _check_matrix(topo, traffic)
    if len(traffic) == 0:
        return _result(0.0, "SPR")
    state = _ecmp_state(topo)
    load: dict[Arc, Fraction] = {}
    for (s, t), value in traffic.items():
        fractions = state.fractions(s, t)
        if not fractions:
            return MluResult(math.inf, False, "SPR")
        for arc, g in fractions.items():
            load[arc] = load.get(arc, Fraction(0)) + value * g
    mlu = Fraction(0)
    for (u, v), total in load.items():
        edge = topo.edge_between(u, v)
        mlu = max(mlu, total / edge.capacity)
    return _result(float(mlu), "SPR")


def two_sr_mlu(topo: Topology, traffic: TrafficMatrix) -> MluResult:
    """Optimal 2-segment MLU: per commodity, split traffic over midpoints;
    each leg (source to midpoint, midpoint to destination) follows ECMP.

    Midpoints equal to an endpoint reproduce plain shortest-path routing,
    so the optimum can only improve on it.
    """
    _check_matrix(topo, traffic)
    items = list(traffic.items())
    if not items:
        return _result(0.0, "2SR")
    state = _ecmp_state(topo)
    for (s, t), _ in items:
        if state.dist[s][t] is None:
            return MluResult(math.inf, False, "2SR")

    arcs = topo.arcs()
    arc_index = {a: i for i, a in enumerate(arcs)}
    num_arcs = len(arcs)
    # Variable 0 is the load factor; one split variable per (commodity,
    # midpoint) whose two legs exist.
    cols: list[tuple[int, int]] = []
    eq_rows, eq_cols, eq_vals = [], [], []
    ub_rows, ub_cols, ub_vals = [], [], []
    for k, ((s, t), value) in enumerate(items):
        demand = float(value)
        dist_s = state.dist[s]
        for m in range(topo.num_nodes):
            if dist_s[m] is None or state.dist[m][t] is None:
                continue
            col = 1 + len(cols)
            cols.append((k, m))
            eq_rows.append(k)
            eq_cols.append(col)
            eq_vals.append(1.0)
            contribution: dict[int, float] = {}
            for leg in (state.fractions_float(s, m), state.fractions_float(m, t)):
                for arc, g in leg.items():
                    a = arc_index[arc]
                    contribution[a] = contribution.get(a, 0.0) + demand * g
            for a, coef in contribution.items():
                ub_rows.append(a)
                ub_cols.append(col)
                ub_vals.append(coef)
    for a in range(num_arcs):
        ub_rows.append(a)
        ub_cols.append(0)
        ub_vals.append(-float(topo.edges[a // 2].capacity))
    nvars = 1 + len(cols)
    c = np.zeros(nvars)
    c[0] = 1.0
    x = _linprog_min(
        c,
        sp.csr_matrix((ub_vals, (ub_rows, ub_cols)), shape=(num_arcs, nvars)),
        np.zeros(num_arcs),
        sp.csr_matrix((eq_vals, (eq_rows, eq_cols)), shape=(len(items), nvars)),
        np.ones(len(items)),
        [(0, None)] * nvars,
    )
    return _result(max(float(x[0]), 0.0), "2SR")


def lemma1_check(
    sol: FractionalSolution, topo: Topology, rho: Fraction | float | str
) -> Lemma1Report:
    """Structure of a basic fractional optimum: the number of variables
    strictly inside (0, rho*c_e) never exceeds the number at their cap."""
    rho = check_ratio(rho)
    if sol.xstar is None:
        raise UsageError("solution carries no variable values")
    h, l = lemma1_counts(sol.xstar, topo, rho)
    return Lemma1Report(holds=l <= h, saturated=h, fractional=l)


def _fixed_sum_vectors(caps: list[int], total: int):
    """All count vectors with the given sum, lexicographically ascending."""
    suffix = [0] * (len(caps) + 1)
    for i in range(len(caps) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + caps[i]

    def rec(i: int, remaining: int, prefix: list[int]):
        if i == len(caps):
            yield tuple(prefix)
            return
        lo = max(0, remaining - suffix[i + 1])
        hi = min(caps[i], remaining)
        for v in range(lo, hi + 1):
            prefix.append(v)
            yield from rec(i + 1, remaining - v, prefix)
            prefix.pop()

    yield from rec(0, total, [])


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        self.parent[self.find(a)] = self.find(b)


def brute_force_optimum(
    topo: Topology,
    rho: Fraction | float | str,
    limit: int = DEFAULT_ORACLE_LIMIT,
) -> ActivationSolution:
    """Exhaustive optimum by ascending total activation, lexicographic
    within each total; the first feasible candidate is the answer.

    Refuses topologies whose candidate space exceeds `limit`.  Candidates
    are screened by support connectivity and per-node capacity before the
    full flow feasibility check.
    """
    rho = check_ratio(rho)
    space = math.prod(e.connections + 1 for e in topo.edges)
    if space > limit:
        raise OracleSizeError(
            f"candidate space {space} exceeds the enumeration limit {limit}"
        )
    demands = scale(worst_case_matrix(topo), rho)
    caps = [e.connections for e in topo.edges]
    n = topo.num_nodes
    # The screens below are necessary conditions evaluated in floats with a
    # conservative slack, so they only ever discard provably infeasible
    # candidates; the flow check stays the arbiter for everything else.
    slack = 1e-9
    ccap = [float(e.ccap) for e in topo.edges]
    ends = [(e.u, e.v) for e in topo.edges]
    # Demand leaving node v: rho times the capacity of its incident edges.
    out_need = [0.0] * n
    for e in topo.edges:
        out_need[e.u] += float(rho * e.capacity)
        out_need[e.v] += float(rho * e.capacity)
    volume_need = sum(out_need) / 2 - slack

    # No candidate below this total reaches the required volume, even when
    # the fattest connections are activated first.
    start_total, best_volume = 0, 0.0
    for conn, cc in sorted(zip(caps, ccap), key=lambda p: -p[1]):
        while conn and best_volume < volume_need:
            best_volume += cc
            start_total += 1
            conn -= 1

    for total in range(start_total, sum(caps) + 1):
        for counts in _fixed_sum_vectors(caps, total):
            out_cap = [0.0] * n
            volume = 0.0
            for i, x in enumerate(counts):
                if x:
                    cap = ccap[i] * x
                    u, v = ends[i]
                    out_cap[u] += cap
                    out_cap[v] += cap
                    volume += cap
            if volume < volume_need:
                continue
            if any(have < need - slack for have, need in zip(out_cap, out_need)):
                continue
            uf = _UnionFind(n)
            for i, x in enumerate(counts):
                if x:
                    uf.union(*ends[i])
            if any(uf.find(u) != uf.find(v) for u, v in ends):
                continue
            act = ActivationSolution(counts)
            if mcf_feasible(topo, act, demands):
                return act
    raise InternalError("full activation should always be feasible")
