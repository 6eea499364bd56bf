"""Shared fixtures and small independent oracles used across the suite."""

from collections import deque

import pytest

from ivgraph import CausalGraph

# Canonical demo graph: node 368 instruments exactly five causal pairs;
# 2179 feeds back into 368 and is therefore excluded as an outcome.
DEMO_NODES = {
    368: "crude oil",
    1402: "operating profit",
    1308: "ebitda",
    2000: "marketable securities",
    322: "firm size",
    2179: "economic exposure",
    1630: "corporate governance",
}
DEMO_EDGES = [
    (368, 1402, 1.0),
    (368, 1308, 1.0),
    (1402, 2000, 1.0),
    (1402, 322, 1.0),
    (1308, 2000, 1.0),
    (1308, 322, 1.0),
    (1308, 2179, 1.0),
    (1308, 1630, 1.0),
    (2179, 368, 1.0),
]

EXPECTED_368_TRIPLES = {
    (368, 1402, 2000),
    (368, 1402, 322),
    (368, 1308, 2000),
    (368, 1308, 322),
    (368, 1308, 1630),
}


@pytest.fixture
def demo_graph() -> CausalGraph:
    return CausalGraph(dict(DEMO_NODES), list(DEMO_EDGES))


def write_demo_fixture(tmp_path):
    """Write the worked-example graph as nodes/edges TSV files."""
    nodes_path = tmp_path / "nodes.tsv"
    edges_path = tmp_path / "edges.tsv"
    nodes_path.write_text(
        "id\tterm\n" + "".join(f"{i}\t{t}\n" for i, t in sorted(DEMO_NODES.items())),
        encoding="utf-8",
    )
    edges_path.write_text(
        "src\tdst\tweight\n" + "".join(f"{u}\t{v}\t{w}\n" for u, v, w in DEMO_EDGES),
        encoding="utf-8",
    )
    return nodes_path, edges_path


def bfs_reach(g: CausalGraph, start: int, max_hops: int, directed: bool = True, skip=None) -> set[int]:
    """Plain hop-bounded BFS, written independently of the package queries."""
    seen = {start}
    queue = deque([(start, 0)])
    out: set[int] = set()
    while queue:
        node, dist = queue.popleft()
        if dist == max_hops:
            continue
        nbrs = set(g.out_edges[node])
        if not directed:
            nbrs |= set(g.in_edges[node])
        for nxt in nbrs:
            if nxt == skip or nxt in seen:
                continue
            seen.add(nxt)
            out.add(nxt)
            queue.append((nxt, dist + 1))
    return out


def enumerate_paths(g: CausalGraph, x: int, y: int, max_hops: int, directed: bool = True, skip=None):
    """Edge-weight lists of all simple paths x -> y of length <= max_hops.

    Exhaustive DFS; in undirected mode a step may use either orientation and
    parallel reciprocal edges collapse to the heavier one (never worse for a
    bottleneck).
    """
    paths = []

    def step_options(node):
        nbrs = dict(g.out_edges[node])
        if not directed:
            for u, w in g.in_edges[node].items():
                nbrs[u] = max(w, nbrs[u]) if u in nbrs else w
        return nbrs

    def walk(node, visited, weights):
        if node == y and weights:
            paths.append(list(weights))
            return
        if len(weights) == max_hops:
            return
        for nxt, w in step_options(node).items():
            if nxt == skip or nxt in visited:
                continue
            walk(nxt, visited | {nxt}, weights + [w])

    walk(x, {x}, [])
    return paths
