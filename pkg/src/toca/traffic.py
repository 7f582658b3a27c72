"""Traffic matrices and the worst-case demand pattern.

Demands are kept as exact rationals; floats appear only when a matrix is
handed to an LP solver.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Iterator, Mapping

from .errors import ModelError, UsageError

if TYPE_CHECKING:
    from .topology import Topology

Pair = tuple[int, int]


def check_ratio(rho: Fraction | float | int | str) -> Fraction:
    """Validate a retention ratio: a rational strictly between 0 and 1."""
    try:
        value = Fraction(rho)
    except (ValueError, ZeroDivisionError, TypeError):
        raise UsageError(f"bad retention ratio {rho!r}") from None
    if not 0 < value < 1:
        raise UsageError(f"retention ratio must satisfy 0 < rho < 1, got {value}")
    return value


@dataclass(frozen=True)
class TrafficMatrix:
    """Sparse demand matrix over node pairs (s, t), s != t, values > 0."""

    num_nodes: int
    demand: Mapping[Pair, Fraction] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean: dict[Pair, Fraction] = {}
        for (s, t), value in self.demand.items():
            value = Fraction(value)
            if not (0 <= s < self.num_nodes and 0 <= t < self.num_nodes):
                raise ModelError(f"demand pair ({s}, {t}) out of range")
            if s == t:
                raise ModelError(f"demand from node {s} to itself")
            if value < 0:
                raise ModelError(f"negative demand for pair ({s}, {t})")
            if value > 0:
                clean[(s, t)] = value
        object.__setattr__(self, "demand", clean)

    def value(self, s: int, t: int) -> Fraction:
        return self.demand.get((s, t), Fraction(0))

    def items(self) -> Iterator[tuple[Pair, Fraction]]:
        """Positive entries in deterministic (s, t) order."""
        for pair in sorted(self.demand):
            yield pair, self.demand[pair]

    @property
    def total(self) -> Fraction:
        return sum(self.demand.values(), Fraction(0))

    def __len__(self) -> int:
        return len(self.demand)


def worst_case_matrix(topo: Topology) -> TrafficMatrix:
    """One demand per arc: T(u, v) = capacity of the edge u-v.

    Routability of this single matrix decides routability of every matrix
    the full network can carry, so it is the only matrix the optimization
    models ever need.
    """
    demand: dict[Pair, Fraction] = {}
    for e in topo.edges:
        demand[(e.u, e.v)] = e.capacity
        demand[(e.v, e.u)] = e.capacity
    return TrafficMatrix(topo.num_nodes, demand)


def scale(matrix: TrafficMatrix, rho: Fraction | float | int | str) -> TrafficMatrix:
    """Multiply every demand by a positive rational factor."""
    try:
        factor = Fraction(rho)
    except (ValueError, ZeroDivisionError, TypeError):
        raise UsageError(f"bad scale factor {rho!r}") from None
    if factor <= 0:
        raise UsageError(f"scale factor must be positive, got {factor}")
    return TrafficMatrix(
        matrix.num_nodes,
        {pair: value * factor for pair, value in matrix.demand.items()},
    )


def _random_simple_path(
    rng: random.Random,
    topo: Topology,
    residual: dict[Pair, Fraction],
    s: int,
    t: int,
) -> list[Pair] | None:
    """Randomized DFS over arcs with positive residual capacity."""
    stack = [(s, [s])]
    while stack:
        node, path = stack.pop()
        if node == t:
            return list(zip(path, path[1:]))
        nbrs = [w for w, _ in topo.neighbors(node)]
        rng.shuffle(nbrs)
        for w in nbrs:
            if w in path or residual[(node, w)] <= 0:
                continue
            stack.append((w, path + [w]))
    return None


def sample_routable_matrix(topo: Topology, seed: int) -> TrafficMatrix:
    """Random matrix that the full topology can route, by construction.

    Draws a number of commodities, routes each along a random simple path
    through the remaining capacity, and books a random fraction of the
    path's bottleneck.  Residual capacities stay nonnegative throughout,
    so the union of the booked paths is a witness routing.
    """
    n = topo.num_nodes
    if n < 2 or topo.num_edges == 0:
        raise UsageError("sampling needs a topology with at least one edge")
    rng = random.Random(seed)
    residual: dict[Pair, Fraction] = {}
    for e in topo.edges:
        residual[(e.u, e.v)] = e.capacity
        residual[(e.v, e.u)] = e.capacity
    demand: dict[Pair, Fraction] = {}
    commodities = rng.randint(1, n * (n - 1) // 2)
    for _ in range(commodities):
        s = rng.randrange(n)
        t = rng.randrange(n - 1)
        if t >= s:
            t += 1
        path = _random_simple_path(rng, topo, residual, s, t)
        if path is None:
            continue
        bottleneck = min(residual[a] for a in path)
        value = bottleneck * Fraction(rng.randint(1, 1000), 1000)
        for a in path:
            residual[a] -= value
        demand[(s, t)] = demand.get((s, t), Fraction(0)) + value
    return TrafficMatrix(n, demand)
