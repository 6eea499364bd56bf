"""Synthetic test assets: random graphs, a brute-force mining oracle,
separable classification corpora, and confounded panels with known effects.

Every generator is a pure function of its seed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .graph import DIRECTED, UNDIRECTED, CausalGraph, ReachabilitySpec
from .mining import A_REMOVED, LITERAL, EXCLUSION_MODES

__all__ = [
    "ScmParams",
    "gen_random_graph",
    "brute_force_iv_oracle",
    "gen_classification_corpus",
    "gen_scm_panel",
]

ORACLE_MAX_NODES = 300


def gen_random_graph(
    n_nodes: int,
    edge_prob: float,
    weight_range: tuple[float, float] = (0.5, 9.5),
    seed: int = 0,
) -> CausalGraph:
    """Erdos-Renyi style directed graph with uniform edge weights.

    Every ordered pair (u, v), u != v, receives an edge independently with
    probability ``edge_prob``; weights are uniform over ``weight_range``.
    Node terms are "n<id>".
    """
    if n_nodes < 1:
        raise ValueError(f"n_nodes must be >= 1, got {n_nodes}")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError(f"edge_prob must be in [0, 1], got {edge_prob}")
    lo, hi = weight_range
    if lo <= 0 or hi < lo:
        raise ValueError(f"weight_range must be positive and ordered, got {weight_range}")
    rng = np.random.default_rng(seed)
    nodes = {i: f"n{i}" for i in range(n_nodes)}
    edges = []
    for u in range(n_nodes):
        for v in range(n_nodes):
            if u == v:
                continue
            if rng.random() < edge_prob:
                edges.append((u, v, float(rng.uniform(lo, hi))))
    return CausalGraph(nodes, edges)


def _oracle_adjacency(g: CausalGraph, direction: str) -> dict[int, set[int]]:
    if direction == DIRECTED:
        return {u: set(nbrs) for u, nbrs in g.out_edges.items()}
    if direction == UNDIRECTED:
        return {u: set(g.out_edges[u]) | set(g.in_edges[u]) for u in g.nodes}
    raise ValueError(f"unknown direction {direction!r}")


def _oracle_bfs(adj: dict[int, set[int]], start: int, max_hops: int, skip: int | None = None) -> set[int]:
    """Self-contained hop-bounded BFS; start itself is never a member."""
    seen = {start}
    queue = deque([(start, 0)])
    reached: set[int] = set()
    while queue:
        node, dist = queue.popleft()
        if dist == max_hops:
            continue
        for nxt in adj[node]:
            if nxt == skip or nxt in seen:
                continue
            seen.add(nxt)
            reached.add(nxt)
            queue.append((nxt, dist + 1))
    return reached


def brute_force_iv_oracle(
    g: CausalGraph,
    spec: ReachabilitySpec = ReachabilitySpec(),
    exclusion_mode: str = A_REMOVED,
) -> list[tuple[int, int, int]]:
    """Reference enumeration: test every ordered distinct (z, a, b) triple.

    Uses its own BFS routines so it shares no traversal code with the miner.
    Output order matches the miner (ascending by (z, a, b)).
    """
    if exclusion_mode not in EXCLUSION_MODES:
        raise ValueError(f"exclusion_mode must be one of {EXCLUSION_MODES}, got {exclusion_mode!r}")
    if g.n_nodes > ORACLE_MAX_NODES:
        raise ValueError(f"oracle refuses graphs above {ORACLE_MAX_NODES} nodes (got {g.n_nodes})")
    adj = _oracle_adjacency(g, spec.direction)
    nodes = sorted(g.nodes)
    k = spec.max_hops
    found: list[tuple[int, int, int]] = []

    if exclusion_mode == LITERAL:
        reach = {v: _oracle_bfs(adj, v, k) for v in nodes}
        for z in nodes:
            for a in nodes:
                if a == z or a not in reach[z]:
                    continue
                for b in nodes:
                    if b in (z, a) or b not in reach[a]:
                        continue
                    if z in reach[b] or b in reach[z]:
                        continue
                    found.append((z, a, b))
        return found

    back_reach_cache: dict[tuple[int, int], set[int]] = {}
    for z in nodes:
        for a in nodes:
            if a == z or a not in adj[z]:
                continue
            for b in nodes:
                if b in (z, a) or b not in adj[a]:
                    continue
                key = (a, b)
                if key not in back_reach_cache:
                    back_reach_cache[key] = _oracle_bfs(adj, b, k, skip=a)
                if z not in back_reach_cache[key]:
                    found.append((z, a, b))
    return found


def gen_classification_corpus(
    n_docs: int,
    vocab: list[str],
    markers: dict[str, list[str]],
    noise_rate: float,
    seed: int = 0,
    tokens_per_doc: int = 60,
    markers_per_doc: int = 8,
) -> list[tuple[str, str, str]]:
    """Two-class synthetic corpus with class-marker terms.

    Each document draws background words from ``vocab`` (marker terms are
    excluded from the background) plus ``markers_per_doc`` marker slots;
    every slot picks a wrong-class marker with probability ``noise_rate``.
    A zero noise rate therefore leaves every document with only its own
    class markers, and small rates keep the classes separable in
    marker-count feature space.
    """
    if n_docs < 2:
        raise ValueError(f"n_docs must be >= 2, got {n_docs}")
    if not 0.0 <= noise_rate < 0.5:
        raise ValueError(f"noise_rate must be in [0, 0.5), got {noise_rate}")
    if len(markers) != 2:
        raise ValueError(f"exactly two marker classes are required, got {len(markers)}")
    labels = sorted(markers)
    sets = {label: list(markers[label]) for label in labels}
    if not sets[labels[0]] or not sets[labels[1]]:
        raise ValueError("both marker sets must be non-empty")
    if set(sets[labels[0]]) & set(sets[labels[1]]):
        raise ValueError("marker sets must be disjoint")
    all_markers = set(sets[labels[0]]) | set(sets[labels[1]])
    background = [w for w in vocab if w not in all_markers]
    if not background:
        raise ValueError("vocab must contain non-marker background words")

    rng = np.random.default_rng(seed)
    docs: list[tuple[str, str, str]] = []
    for i in range(n_docs):
        label = labels[i % 2]
        other = labels[1 - i % 2]
        tokens = [background[j] for j in rng.integers(0, len(background), size=tokens_per_doc)]
        for _ in range(markers_per_doc):
            pool = sets[other] if rng.random() < noise_rate else sets[label]
            tokens.append(pool[int(rng.integers(0, len(pool)))])
        perm = rng.permutation(len(tokens))
        text = " ".join(tokens[j] for j in perm)
        docs.append((f"doc{i:04d}", text, label))
    return docs


@dataclass(frozen=True)
class ScmParams:
    """Structural coefficients for a confounded instrument panel.

    The data-generating process draws the instrument and an unobserved
    confounder from standard normals, then sets
    ``a = pi*z + alpha*u + nu`` and ``b = beta*a + gamma*u + eps``.
    The confounder column is never emitted. Optional industry/year factors
    add one shared intercept per level to both the treatment and the
    outcome, so fixed-effect recovery is testable.
    """

    pi: float
    alpha: float
    beta: float
    gamma: float
    sigma_nu: float = 1.0
    sigma_eps: float = 1.0
    n: int = 10_000
    seed: int = 0
    n_industries: int = 0
    n_years: int = 0
    group_sigma: float = 0.5

    def __post_init__(self) -> None:
        if self.n < 10:
            raise ValueError(f"n must be >= 10, got {self.n}")
        if self.sigma_nu <= 0 or self.sigma_eps <= 0:
            raise ValueError("noise standard deviations must be > 0")
        for count, what in ((self.n_industries, "n_industries"), (self.n_years, "n_years")):
            if count != 0 and count < 2:
                raise ValueError(f"{what} must be 0 (disabled) or >= 2, got {count}")
        if (self.n_industries or self.n_years) and self.group_sigma <= 0:
            raise ValueError("group_sigma must be > 0 when group factors are enabled")


def gen_scm_panel(params: ScmParams) -> pd.DataFrame:
    """Panel with columns z, a, b and optional industry/year factor columns."""
    rng = np.random.default_rng(params.seed)
    z = rng.standard_normal(params.n)
    u = rng.standard_normal(params.n)
    nu = rng.normal(0.0, params.sigma_nu, params.n)
    eps = rng.normal(0.0, params.sigma_eps, params.n)
    a = params.pi * z + params.alpha * u + nu
    b_extra = np.zeros(params.n)
    a_extra = np.zeros(params.n)
    columns: dict[str, object] = {}
    if params.n_industries:
        effects = rng.normal(0.0, params.group_sigma, params.n_industries)
        assign = rng.integers(0, params.n_industries, params.n)
        a_extra += effects[assign]
        b_extra += effects[assign]
        columns["industry"] = [f"ind{j}" for j in assign]
    if params.n_years:
        effects = rng.normal(0.0, params.group_sigma, params.n_years)
        assign = rng.integers(0, params.n_years, params.n)
        a_extra += effects[assign]
        b_extra += effects[assign]
        columns["year"] = [f"y{j}" for j in assign]
    a = a + a_extra
    b = params.beta * a + params.gamma * u + eps + b_extra
    frame = pd.DataFrame({"z": z, "a": a, "b": b})
    for name, values in columns.items():
        frame[name] = values
    return frame
