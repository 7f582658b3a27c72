"""Topology model and text formats.

A topology is an undirected graph whose edges ("bidirected edges") carry a
capacity per direction, a routing weight, and a number of parallel
connections.  Graph and demand files follow the plain-text layout used by
the Repetita dataset:

    NODES <n>
    label x y
    <n node lines>

    EDGES <m>
    label src dest weight bw delay
    <m arc lines, one per direction>

Arcs must come in symmetric pairs (same bandwidth and weight in both
directions); each pair becomes one bidirected edge.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ModelError, ParseError, UsageError
from .traffic import TrafficMatrix

NodeId = int
EdgeId = int
Arc = tuple[NodeId, NodeId]


@dataclass(frozen=True)
class Node:
    id: NodeId
    label: str
    x: float = 0.0
    y: float = 0.0


@dataclass(frozen=True)
class BidirectedEdge:
    """Undirected edge u-v (u < v) with per-direction capacity.

    `capacity` is the total rate available in each direction when all
    `connections` parallel connections are active; one connection thus
    contributes `capacity / connections` per direction.
    """

    id: EdgeId
    u: NodeId
    v: NodeId
    capacity: Fraction
    weight: int
    connections: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "capacity", Fraction(self.capacity))
        if self.u >= self.v:
            raise ModelError(f"edge {self.id}: endpoints must satisfy u < v")
        if self.capacity <= 0:
            raise ModelError(f"edge {self.id}: capacity must be positive")
        if not isinstance(self.weight, int) or self.weight < 1:
            raise ModelError(f"edge {self.id}: weight must be a positive integer")
        if not isinstance(self.connections, int) or self.connections < 1:
            raise ModelError(f"edge {self.id}: connections must be a positive integer")

    @property
    def ccap(self) -> Fraction:
        """Capacity contributed by a single connection, per direction."""
        return self.capacity / self.connections


@dataclass(frozen=True)
class Topology:
    """Immutable graph.  Node and edge ids are dense and index-aligned.

    Connectivity is not a construction invariant: reducing a topology by an
    activation may disconnect it.  Parsers reject disconnected inputs via
    `require_connected`.
    """

    name: str
    nodes: tuple[Node, ...]
    edges: tuple[BidirectedEdge, ...]
    _pair_to_edge: dict[Arc, EdgeId] = field(
        init=False, repr=False, compare=False, default_factory=dict
    )
    _adj: tuple[tuple[tuple[NodeId, EdgeId], ...], ...] = field(
        init=False, repr=False, compare=False, default=()
    )

    def __post_init__(self) -> None:
        n = len(self.nodes)
        for i, node in enumerate(self.nodes):
            if node.id != i:
                raise ModelError(f"node ids must be dense, got {node.id} at index {i}")
        pair_to_edge: dict[Arc, EdgeId] = {}
        adj: list[list[tuple[NodeId, EdgeId]]] = [[] for _ in range(n)]
        for i, e in enumerate(self.edges):
            if e.id != i:
                raise ModelError(f"edge ids must be dense, got {e.id} at index {i}")
            if e.v >= n:
                raise ModelError(f"edge {i}: endpoint {e.v} out of range")
            if (e.u, e.v) in pair_to_edge:
                raise ModelError(f"edge {i}: duplicate edge {e.u}-{e.v}")
            pair_to_edge[(e.u, e.v)] = i
            adj[e.u].append((e.v, i))
            adj[e.v].append((e.u, i))
        object.__setattr__(self, "_pair_to_edge", pair_to_edge)
        object.__setattr__(self, "_adj", tuple(tuple(a) for a in adj))

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def arcs(self) -> list[Arc]:
        """Directed arcs; edge e yields arc 2e as (u, v) and arc 2e+1 as (v, u)."""
        out: list[Arc] = []
        for e in self.edges:
            out.append((e.u, e.v))
            out.append((e.v, e.u))
        return out

    def edge_between(self, a: NodeId, b: NodeId) -> BidirectedEdge | None:
        eid = self._pair_to_edge.get((a, b) if a < b else (b, a))
        return None if eid is None else self.edges[eid]

    def neighbors(self, v: NodeId) -> tuple[tuple[NodeId, EdgeId], ...]:
        return self._adj[v]

    def is_connected(self) -> bool:
        if self.num_nodes <= 1:
            return True
        seen = [False] * self.num_nodes
        seen[0] = True
        queue = deque([0])
        count = 1
        while queue:
            v = queue.popleft()
            for w, _ in self._adj[v]:
                if not seen[w]:
                    seen[w] = True
                    count += 1
                    queue.append(w)
        return count == self.num_nodes

    def require_connected(self) -> None:
        if not self.is_connected():
            raise ModelError(f"topology {self.name!r} is not connected")


@dataclass(frozen=True)
class ActivationSolution:
    """Number of active connections per edge, indexed by edge id."""

    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def validate(self, topo: Topology) -> None:
        if len(self.counts) != topo.num_edges:
            raise UsageError(
                f"activation has {len(self.counts)} entries, "
                f"topology {topo.name!r} has {topo.num_edges} edges"
            )
        for e, x in zip(topo.edges, self.counts):
            if not isinstance(x, int) or x < 0 or x > e.connections:
                raise ModelError(
                    f"edge {e.u}-{e.v}: activation {x} outside [0, {e.connections}]"
                )


def full_activation(topo: Topology) -> ActivationSolution:
    return ActivationSolution(tuple(e.connections for e in topo.edges))


def reduce(topo: Topology, act: ActivationSolution) -> Topology:
    """Topology induced by an activation: drop edges with x_e = 0, set the
    remaining capacities to x_e * ccap(e).  The result may be disconnected."""
    act.validate(topo)
    edges = []
    for e, x in zip(topo.edges, act.counts):
        if x == 0:
            continue
        edges.append(
            BidirectedEdge(
                id=len(edges),
                u=e.u,
                v=e.v,
                capacity=e.ccap * x,
                weight=e.weight,
                connections=x,
            )
        )
    return Topology(f"{topo.name}/reduced", topo.nodes, tuple(edges))


def _nonblank_lines(text: str) -> list[tuple[int, str]]:
    return [
        (i, line.strip())
        for i, line in enumerate(text.splitlines(), 1)
        if line.strip()
    ]


def _parse_count(lines: list[tuple[int, str]], pos: int, keyword: str) -> tuple[int, int]:
    if pos >= len(lines):
        raise ParseError(f"expected '{keyword} <count>' section")
    lineno, line = lines[pos]
    parts = line.split()
    if len(parts) != 2 or parts[0] != keyword:
        raise ParseError(f"expected '{keyword} <count>', got {line!r}", lineno)
    try:
        count = int(parts[1])
    except ValueError:
        raise ParseError(f"bad {keyword} count {parts[1]!r}", lineno) from None
    if count < 0:
        raise ParseError(f"bad {keyword} count {count}", lineno)
    return count, pos + 1


def _skip_header(lines: list[tuple[int, str]], pos: int, section: str) -> int:
    if pos >= len(lines) or not lines[pos][1].startswith("label"):
        lineno = lines[pos][0] if pos < len(lines) else None
        raise ParseError(f"expected {section} header line starting with 'label'", lineno)
    return pos + 1


def _positive_rational(token: str, what: str, lineno: int) -> Fraction:
    try:
        value = Fraction(token)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad {what} {token!r}", lineno) from None
    if value <= 0:
        raise ParseError(f"{what} must be positive, got {token}", lineno)
    return value


def parse_topology(text: str, name: str = "topology", connections: int = 5) -> Topology:
    """Parse a graph file.  Every edge gets `connections` connections.

    Rejects self-loops, duplicate arcs, arcs without a symmetric partner,
    and asymmetric bandwidth or weight; the parsed graph must be connected.
    """
    if not isinstance(connections, int) or connections < 1:
        raise UsageError(f"connections must be a positive integer, got {connections}")
    lines = _nonblank_lines(text)
    n, pos = _parse_count(lines, 0, "NODES")
    pos = _skip_header(lines, pos, "node")
    nodes = []
    for i in range(n):
        if pos >= len(lines):
            raise ParseError(f"expected {n} node lines, found {i}")
        lineno, line = lines[pos]
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"expected 'label x y', got {line!r}", lineno)
        try:
            x, y = float(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(f"bad node coordinates in {line!r}", lineno) from None
        nodes.append(Node(id=i, label=parts[0], x=x, y=y))
        pos += 1

    m, pos = _parse_count(lines, pos, "EDGES")
    pos = _skip_header(lines, pos, "edge")
    arcs: dict[Arc, tuple[int, Fraction, int]] = {}
    pair_order: list[Arc] = []
    for i in range(m):
        if pos >= len(lines):
            raise ParseError(f"expected {m} edge lines, found {i}")
        lineno, line = lines[pos]
        parts = line.split()
        if len(parts) != 6:
            raise ParseError(
                f"expected 'label src dest weight bw delay', got {line!r}", lineno
            )
        try:
            src, dest, weight = int(parts[1]), int(parts[2]), int(parts[3])
            float(parts[5])  # delay: validated, then ignored
        except ValueError:
            raise ParseError(f"bad edge fields in {line!r}", lineno) from None
        if not 0 <= src < n or not 0 <= dest < n:
            raise ParseError(f"edge endpoint out of range in {line!r}", lineno)
        if src == dest:
            raise ModelError(f"line {lineno}: self-loop at node {src}")
        if weight < 1:
            raise ParseError(f"weight must be a positive integer, got {weight}", lineno)
        bw = _positive_rational(parts[4], "bandwidth", lineno)
        if (src, dest) in arcs:
            raise ModelError(f"line {lineno}: duplicate arc {src}->{dest}")
        arcs[(src, dest)] = (weight, bw, lineno)
        pair = (src, dest) if src < dest else (dest, src)
        if pair not in pair_order:
            pair_order.append(pair)
        pos += 1
    if pos != len(lines):
        raise ParseError("unexpected trailing content", lines[pos][0])

    edges = []
    for u, v in pair_order:
        fwd, rev = arcs.get((u, v)), arcs.get((v, u))
        if fwd is None or rev is None:
            have = (u, v) if fwd is not None else (v, u)
            raise ModelError(f"arc {have[0]}->{have[1]} has no reverse arc")
        if fwd[1] != rev[1]:
            raise ModelError(f"edge {u}-{v}: asymmetric bandwidth {fwd[1]} vs {rev[1]}")
        if fwd[0] != rev[0]:
            raise ModelError(f"edge {u}-{v}: asymmetric weight {fwd[0]} vs {rev[0]}")
        edges.append(
            BidirectedEdge(
                id=len(edges),
                u=u,
                v=v,
                capacity=fwd[1],
                weight=fwd[0],
                connections=connections,
            )
        )
    topo = Topology(name, tuple(nodes), tuple(edges))
    topo.require_connected()
    return topo


def parse_demands(text: str, topo: Topology) -> TrafficMatrix:
    """Parse a demand file:

        DEMANDS <k>
        label src dest bw
        <k demand lines>

    Demands for the same pair accumulate; zero-value demands are dropped.
    """
    lines = _nonblank_lines(text)
    k, pos = _parse_count(lines, 0, "DEMANDS")
    pos = _skip_header(lines, pos, "demand")
    demand: dict[tuple[NodeId, NodeId], Fraction] = {}
    for i in range(k):
        if pos >= len(lines):
            raise ParseError(f"expected {k} demand lines, found {i}")
        lineno, line = lines[pos]
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"expected 'label src dest bw', got {line!r}", lineno)
        try:
            src, dest = int(parts[1]), int(parts[2])
            value = Fraction(parts[3])
        except (ValueError, ZeroDivisionError):
            raise ParseError(f"bad demand fields in {line!r}", lineno) from None
        if not 0 <= src < topo.num_nodes or not 0 <= dest < topo.num_nodes:
            raise ParseError(f"demand endpoint out of range in {line!r}", lineno)
        if value < 0:
            raise ParseError(f"demand value must be nonnegative, got {parts[3]}", lineno)
        if src == dest:
            if value > 0:
                raise ParseError(f"positive demand from node {src} to itself", lineno)
        elif value > 0:
            demand[(src, dest)] = demand.get((src, dest), Fraction(0)) + value
        pos += 1
    if pos != len(lines):
        raise ParseError("unexpected trailing content", lines[pos][0])
    return TrafficMatrix(topo.num_nodes, demand)


def format_activation(topo: Topology, act: ActivationSolution) -> str:
    """Activation file: one 'u v count' line per edge, sorted by (u, v)."""
    act.validate(topo)
    rows = sorted((e.u, e.v, act.counts[e.id]) for e in topo.edges)
    return "".join(f"{u} {v} {x}\n" for u, v, x in rows)


def parse_activation(text: str, topo: Topology) -> ActivationSolution:
    counts: list[int | None] = [None] * topo.num_edges
    for lineno, line in _nonblank_lines(text):
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"expected 'u v count', got {line!r}", lineno)
        try:
            u, v, x = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise ParseError(f"bad activation fields in {line!r}", lineno) from None
        edge = (
            topo.edge_between(u, v)
            if 0 <= u < topo.num_nodes and 0 <= v < topo.num_nodes
            else None
        )
        if edge is None:
            raise ModelError(f"line {lineno}: {u}-{v} is not an edge of {topo.name!r}")
        if counts[edge.id] is not None:
            raise ParseError(f"duplicate activation for edge {u}-{v}", lineno)
        if x < 0 or x > edge.connections:
            raise ModelError(
                f"line {lineno}: activation {x} outside [0, {edge.connections}]"
            )
        counts[edge.id] = x
    missing = [e for e, x in zip(topo.edges, counts) if x is None]
    if missing:
        raise ModelError(
            f"activation missing for edge {missing[0].u}-{missing[0].v}"
        )
    return ActivationSolution(tuple(counts))  # type: ignore[arg-type]
