"""Seeded random instances shared by the unit and acceptance suites."""

from __future__ import annotations

import random
from fractions import Fraction

from toca.topology import BidirectedEdge, Node, Topology


def build(
    name: str,
    n: int,
    pairs: list[tuple[int, int]],
    *,
    capacity=1,
    connections=1,
    weight=1,
) -> Topology:
    """Hand-rolled instance.  Scalar attributes broadcast over all edges;
    sequences give one value per edge, in `pairs` order."""

    def pick(attr, i):
        return attr[i] if isinstance(attr, (list, tuple)) else attr

    edges = tuple(
        BidirectedEdge(
            id=i,
            u=min(u, v),
            v=max(u, v),
            capacity=Fraction(pick(capacity, i)),
            weight=pick(weight, i),
            connections=pick(connections, i),
        )
        for i, (u, v) in enumerate(pairs)
    )
    nodes = tuple(Node(id=i, label=f"n{i}", x=float(i), y=0.0) for i in range(n))
    return Topology(name, nodes, edges)


def random_topology(
    seed: int,
    *,
    min_nodes: int = 4,
    max_nodes: int = 8,
    max_edges: int = 14,
    capacity: tuple[int, int] = (1, 10),
    connections: tuple[int, int] = (1, 5),
) -> Topology:
    """Random connected bidirected instance.

    A random spanning tree keeps the graph connected; leftover node pairs
    are added until the drawn edge budget is spent.
    """
    rng = random.Random(seed)
    n = rng.randint(min_nodes, max_nodes)
    m = rng.randint(n - 1, min(max_edges, n * (n - 1) // 2))

    order = list(range(n))
    rng.shuffle(order)
    pairs = set()
    for i in range(1, n):
        u, v = order[i], order[rng.randrange(i)]
        pairs.add((min(u, v), max(u, v)))
    rest = [
        (u, v)
        for u in range(n)
        for v in range(u + 1, n)
        if (u, v) not in pairs
    ]
    rng.shuffle(rest)
    while len(pairs) < m and rest:
        pairs.add(rest.pop())

    edges = tuple(
        BidirectedEdge(
            id=i,
            u=u,
            v=v,
            capacity=Fraction(rng.randint(*capacity)),
            weight=rng.randint(1, 4),
            connections=rng.randint(*connections),
        )
        for i, (u, v) in enumerate(sorted(pairs))
    )
    nodes = tuple(Node(id=i, label=f"n{i}", x=float(i), y=0.0) for i in range(n))
    return Topology(f"rand{seed}", nodes, edges)


def uniform_topology(
    seed: int,
    *,
    min_nodes: int = 4,
    max_nodes: int = 8,
    max_edges: int = 14,
) -> Topology:
    """Random connected instance with one shared capacity and connection
    count across all edges (the closed-form regime)."""
    rng = random.Random(seed ^ 0x5EED)
    conns = rng.randint(1, 5)
    cap = rng.randint(1, 10)
    base = random_topology(
        seed,
        min_nodes=min_nodes,
        max_nodes=max_nodes,
        max_edges=max_edges,
        capacity=(cap, cap),
        connections=(conns, conns),
    )
    return Topology(f"uni{seed}", base.nodes, base.edges)
