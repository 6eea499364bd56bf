"""Weighted directed causal concept graphs and hop-bounded queries.

The graph maps integer node ids to concept terms and stores one weighted
directed edge per ordered (cause, effect) pair. Graphs are immutable after
construction, so every query below is a pure function and safe to call from
multiple workers.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

__all__ = [
    "DIRECTED",
    "UNDIRECTED",
    "CausalGraph",
    "ReachabilitySpec",
    "GraphParseError",
    "GraphIntegrityError",
    "UnknownNodeError",
    "load_graph",
    "write_graph_tsv",
    "khop_reachable",
    "degree",
    "is_edge_node",
    "bottleneck_weight",
    "bottleneck_table",
]

DIRECTED = "directed"
UNDIRECTED = "undirected"

NODES_HEADER = ("id", "term")
EDGES_HEADER = ("src", "dst", "weight")


class GraphParseError(ValueError):
    """A nodes/edges table row that cannot be parsed."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class GraphIntegrityError(ValueError):
    """Structurally invalid graph data (dangling edge, duplicate, bad weight)."""


class UnknownNodeError(KeyError):
    """A node id that does not exist in the graph."""

    def __init__(self, node: int):
        super().__init__(f"unknown node id {node}")
        self.node = node


class CausalGraph:
    """Directed cause -> effect concept graph with positive edge weights.

    ``out_edges[u]`` maps each successor ``v`` to the weight of edge u -> v;
    ``in_edges`` is its exact transpose. Both carry an (possibly empty) entry
    for every node. Instances are immutable by convention: mutate nothing
    after ``__init__``.
    """

    __slots__ = ("nodes", "out_edges", "in_edges")

    def __init__(self, nodes: dict[int, str], edges: Iterable[tuple[int, int, float]]):
        checked: dict[int, str] = {}
        for node_id, term in nodes.items():
            if not isinstance(node_id, int) or node_id < 0:
                raise GraphIntegrityError(f"node id {node_id!r} is not a non-negative integer")
            if not term:
                raise GraphIntegrityError(f"node {node_id} has an empty term")
            checked[node_id] = term
        out: dict[int, dict[int, float]] = {n: {} for n in checked}
        inn: dict[int, dict[int, float]] = {n: {} for n in checked}
        for src, dst, weight in edges:
            if src not in checked:
                raise GraphIntegrityError(f"edge ({src}, {dst}) references unknown node id {src}")
            if dst not in checked:
                raise GraphIntegrityError(f"edge ({src}, {dst}) references unknown node id {dst}")
            if src == dst:
                raise GraphIntegrityError(f"self-loop on node {src} is not allowed")
            weight = float(weight)
            if not math.isfinite(weight) or weight <= 0.0:
                raise GraphIntegrityError(f"edge ({src}, {dst}) has non-positive or non-finite weight {weight!r}")
            if dst in out[src]:
                raise GraphIntegrityError(f"duplicate edge ({src}, {dst})")
            out[src][dst] = weight
            inn[dst][src] = weight
        self.nodes = checked
        self.out_edges = out
        self.in_edges = inn

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self.out_edges.values())

    def __contains__(self, node: int) -> bool:
        return node in self.nodes

    def term(self, node: int) -> str:
        _require_node(self, node)
        return self.nodes[node]

    def edges(self) -> Iterator[tuple[int, int, float]]:
        """Yield (src, dst, weight) in sorted order."""
        for src in sorted(self.out_edges):
            for dst in sorted(self.out_edges[src]):
                yield src, dst, self.out_edges[src][dst]

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"CausalGraph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"


@dataclass(frozen=True)
class ReachabilitySpec:
    """Parameters for hop-bounded reachability queries.

    ``max_hops`` defaults to 3: longer causal chains are treated as having
    lost their causal meaning. ``excluded_node``, when set, is deleted from
    the graph before the query runs.
    """

    max_hops: int = 3
    direction: str = DIRECTED
    excluded_node: int | None = None

    def __post_init__(self) -> None:
        if self.max_hops < 1:
            raise ValueError(f"max_hops must be >= 1, got {self.max_hops}")
        if self.direction not in (DIRECTED, UNDIRECTED):
            raise ValueError(f"direction must be {DIRECTED!r} or {UNDIRECTED!r}, got {self.direction!r}")

    def without_exclusion(self) -> "ReachabilitySpec":
        if self.excluded_node is None:
            return self
        return ReachabilitySpec(self.max_hops, self.direction, None)


def _require_node(g: CausalGraph, node: int) -> None:
    if node not in g.nodes:
        raise UnknownNodeError(node)


def _neighbor_items(g: CausalGraph, u: int, direction: str) -> Iterator[tuple[int, float]]:
    yield from g.out_edges[u].items()
    if direction == UNDIRECTED:
        yield from g.in_edges[u].items()


def _check_spec_nodes(g: CausalGraph, start: int, spec: ReachabilitySpec) -> int | None:
    _require_node(g, start)
    excluded = spec.excluded_node
    if excluded is not None:
        _require_node(g, excluded)
        if excluded == start:
            raise ValueError(f"excluded node {excluded} equals the query start node")
    return excluded


def khop_reachable(g: CausalGraph, start: int, spec: ReachabilitySpec = ReachabilitySpec()) -> set[int]:
    """All nodes y != start with a path start ~> y of length <= max_hops.

    Directed mode follows cause -> effect orientation; undirected mode
    ignores it. The excluded node (if any) is removed from the graph before
    searching. The start node is never a member of the result, even when a
    cycle leads back to it.
    """
    excluded = _check_spec_nodes(g, start, spec)
    seen = {start}
    frontier = {start}
    result: set[int] = set()
    for _ in range(spec.max_hops):
        nxt: set[int] = set()
        for u in frontier:
            for v, _w in _neighbor_items(g, u, spec.direction):
                if v != excluded and v not in seen:
                    seen.add(v)
                    nxt.add(v)
        if not nxt:
            break
        result |= nxt
        frontier = nxt
    return result


def degree(g: CausalGraph, node: int) -> tuple[int, int]:
    """Exact (in_degree, out_degree) of ``node``."""
    _require_node(g, node)
    return len(g.in_edges[node]), len(g.out_edges[node])


def is_edge_node(g: CausalGraph, node: int) -> bool:
    """True iff the node has exactly one incident edge (peripheral concept).

    An isolated node has zero incident edges and is not an edge node.
    """
    in_deg, out_deg = degree(g, node)
    return in_deg + out_deg == 1


def bottleneck_table(
    g: CausalGraph, x: int, spec: ReachabilitySpec = ReachabilitySpec()
) -> dict[int, float]:
    """Widest-path weights from x to every node reachable within the hop bound.

    For each target, the value is the maximum over connecting paths of the
    minimum edge weight along the path. One dynamic-programming pass over
    walk lengths serves all targets; removing a cycle from a walk never
    lowers its bottleneck, so walks and simple paths give the same optimum.
    """
    excluded = _check_spec_nodes(g, x, spec)
    best: dict[int, float] = {x: math.inf}
    for _ in range(spec.max_hops):
        new = dict(best)
        for u, bottleneck_u in best.items():
            for v, w in _neighbor_items(g, u, spec.direction):
                if v == excluded:
                    continue
                candidate = w if w < bottleneck_u else bottleneck_u
                if candidate > new.get(v, -math.inf):
                    new[v] = candidate
        if new == best:
            break
        best = new
    del best[x]
    return best


def bottleneck_weight(
    g: CausalGraph, x: int, y: int, spec: ReachabilitySpec = ReachabilitySpec()
) -> float | None:
    """Widest-path weight from x to y within the hop bound.

    A causal chain is only as strong as its weakest link, and the strongest
    available chain gets the credit. Returns None when y is unreachable.
    """
    _require_node(g, y)
    if x == y:
        raise ValueError("bottleneck_weight requires two distinct nodes")
    if y == spec.excluded_node:
        raise ValueError(f"target node {y} is the excluded node")
    return bottleneck_table(g, x, spec).get(y)


def _iter_lines(source: str | os.PathLike | IO[str] | Iterable[str]) -> tuple[Iterator[str], bool]:
    """Return (line iterator, needs_close) for a path or readable stream."""
    if isinstance(source, (str, os.PathLike)):
        handle = open(source, "r", encoding="utf-8")
        return iter(handle), True
    return iter(source), False


def _parse_table(
    source, header: tuple[str, ...], what: str
) -> Iterator[tuple[int, list[str]]]:
    lines, needs_close = _iter_lines(source)
    try:
        line_no = 0
        saw_header = False
        for raw in lines:
            line_no += 1
            line = raw.rstrip("\n").rstrip("\r")
            if not saw_header:
                cols = tuple(line.split("\t"))
                if cols != header:
                    raise GraphParseError(
                        f"{what} header must be {chr(9).join(header)!r}, got {line!r}", line_no
                    )
                saw_header = True
                continue
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != len(header):
                raise GraphParseError(
                    f"expected {len(header)} tab-separated fields, got {len(fields)}", line_no
                )
            yield line_no, fields
        if not saw_header:
            raise GraphParseError(f"{what} table is empty (missing header)", 1)
    finally:
        if needs_close:
            lines.close()  # type: ignore[attr-defined]


def _parse_id(text: str, line_no: int, column: str) -> int:
    try:
        value = int(text, 10)
    except ValueError:
        raise GraphParseError(f"{column} {text!r} is not a base-10 integer", line_no) from None
    if value < 0:
        raise GraphParseError(f"{column} {text!r} is negative", line_no)
    return value


def load_graph(nodes_source, edges_source) -> CausalGraph:
    """Load a graph from nodes and edges TSV tables (paths or streams).

    The nodes table has header ``id<TAB>term``; the edges table has header
    ``src<TAB>dst<TAB>weight``. Terms may contain spaces but not tabs.
    Malformed rows raise :class:`GraphParseError` with the line number;
    structural problems raise :class:`GraphIntegrityError`.
    """
    nodes: dict[int, str] = {}
    for line_no, (id_text, term) in _parse_table(nodes_source, NODES_HEADER, "nodes"):
        node_id = _parse_id(id_text, line_no, "node id")
        if node_id in nodes:
            raise GraphIntegrityError(f"duplicate node id {node_id}")
        if not term.strip():
            raise GraphParseError(f"node {node_id} has an empty term", line_no)
        nodes[node_id] = term

    edges: list[tuple[int, int, float]] = []
    for line_no, (src_text, dst_text, w_text) in _parse_table(edges_source, EDGES_HEADER, "edges"):
        src = _parse_id(src_text, line_no, "edge src")
        dst = _parse_id(dst_text, line_no, "edge dst")
        try:
            weight = float(w_text)
        except ValueError:
            raise GraphParseError(f"weight {w_text!r} is not a decimal literal", line_no) from None
        edges.append((src, dst, weight))
    return CausalGraph(nodes, edges)


def write_graph_tsv(g: CausalGraph, nodes_dest, edges_dest) -> None:
    """Write a graph back to the nodes/edges TSV formats read by load_graph."""

    def _write(dest, lines: Iterable[str]) -> None:
        if isinstance(dest, (str, os.PathLike)):
            with open(dest, "w", encoding="utf-8") as handle:
                handle.writelines(lines)
        else:
            dest.writelines(lines)

    node_lines = ["id\tterm\n"]
    node_lines += [f"{node_id}\t{g.nodes[node_id]}\n" for node_id in sorted(g.nodes)]
    _write(nodes_dest, node_lines)

    edge_lines = ["src\tdst\tweight\n"]
    edge_lines += [f"{src}\t{dst}\t{w!r}\n" for src, dst, w in g.edges()]
    _write(edges_dest, edge_lines)
