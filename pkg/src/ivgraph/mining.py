"""Instrumental-variable pattern mining over causal concept graphs.

Enumerates (Z, A, B) triples in which Z is a candidate instrument for the
treatment A and outcome B, scores each triple with a 0-3 quality rubric,
summarizes per-instrument pattern counts, and compares the instrument sets
found in two subgraphs.
"""

from __future__ import annotations

import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import IO, Iterable, Sequence

from .graph import (
    DIRECTED,
    CausalGraph,
    ReachabilitySpec,
    UnknownNodeError,
    bottleneck_table,
    is_edge_node,
    khop_reachable,
)

__all__ = [
    "A_REMOVED",
    "LITERAL",
    "DEFAULT_WEIGHT_THRESHOLD",
    "QUALITY_LOW",
    "QUALITY_MIDDLE",
    "QUALITY_HIGH",
    "IvTriple",
    "MiningStats",
    "QualityPartition",
    "OverlapReport",
    "enumerate_iv_triples",
    "score_triple",
    "score_triples",
    "summarize",
    "quality_partition",
    "compare_subgraphs",
    "write_triples_tsv",
    "read_triples_tsv",
]

A_REMOVED = "a_removed"
LITERAL = "literal"
EXCLUSION_MODES = (A_REMOVED, LITERAL)

DEFAULT_WEIGHT_THRESHOLD = 5.0

QUALITY_LOW = "low"
QUALITY_MIDDLE = "middle"
QUALITY_HIGH = "high"

TRIPLES_HEADER = (
    "z", "a", "b",
    "z_term", "a_term", "b_term",
    "edge_node", "w_za", "w_ab", "score", "quality",
)


@dataclass(frozen=True)
class IvTriple:
    """One scored (Z, A, B) instrument pattern.

    ``score`` adds one point for each of: Z is an edge node, the Z~>A
    association weight reaches the threshold, the A~>B association weight
    reaches the threshold. Quality is high at 3 points, middle at 1-2,
    low at 0. Absent weights contribute nothing.
    """

    z: int
    a: int
    b: int
    z_is_edge_node: bool = False
    w_za: float | None = None
    w_ab: float | None = None
    score: int = 0
    quality: str = QUALITY_LOW

    def __post_init__(self) -> None:
        if len({self.z, self.a, self.b}) != 3:
            raise ValueError(f"triple nodes must be pairwise distinct, got ({self.z}, {self.a}, {self.b})")
        if self.quality != _quality_for_score(self.score):
            raise ValueError(f"score {self.score} is inconsistent with quality {self.quality!r}")

    def key(self) -> tuple[int, int, int]:
        return (self.z, self.a, self.b)


def _quality_for_score(score: int) -> str:
    if score == 3:
        return QUALITY_HIGH
    if score in (1, 2):
        return QUALITY_MIDDLE
    if score == 0:
        return QUALITY_LOW
    raise ValueError(f"score must be in 0..3, got {score}")


@dataclass(frozen=True)
class MiningStats:
    """Pattern totals plus the per-instrument triple-count distribution.

    Every node is an instrument candidate, so nodes with zero triples
    contribute zeros to the distribution and ``per_z_mean * n_nodes``
    equals ``n_zab_triples``. The spread is the population standard
    deviation.
    """

    n_nodes: int
    n_za_pairs: int
    n_zab_triples: int
    per_z_min: int
    per_z_mean: float
    per_z_std: float
    per_z_max: int

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "n_za_pairs": self.n_za_pairs,
            "n_zab_triples": self.n_zab_triples,
            "per_z": {
                "min": self.per_z_min,
                "mean": self.per_z_mean,
                "std": self.per_z_std,
                "max": self.per_z_max,
            },
        }


@dataclass(frozen=True)
class QualityPartition:
    """Triple counts by rubric class, plus edge-node tallies.

    ``n_edge_node_triples`` counts triples whose Z is an edge node;
    ``n_edge_node_z`` counts the distinct edge-node Z ids behind them.
    """

    n_low: int
    n_middle: int
    n_high: int
    n_edge_node_triples: int
    n_edge_node_z: int

    @property
    def total(self) -> int:
        return self.n_low + self.n_middle + self.n_high

    def to_dict(self) -> dict:
        return {
            "n_low": self.n_low,
            "n_middle": self.n_middle,
            "n_high": self.n_high,
            "n_total": self.total,
            "n_edge_node_triples": self.n_edge_node_triples,
            "n_edge_node_z": self.n_edge_node_z,
        }


@dataclass(frozen=True)
class OverlapReport:
    """Partition of two instrument (Z) node sets into exclusive/shared parts."""

    exclusive_left: frozenset[int]
    exclusive_right: frozenset[int]
    shared: frozenset[int]

    def to_dict(self) -> dict:
        return {
            "exclusive_left": sorted(self.exclusive_left),
            "exclusive_right": sorted(self.exclusive_right),
            "shared": sorted(self.shared),
            "n_exclusive_left": len(self.exclusive_left),
            "n_exclusive_right": len(self.exclusive_right),
            "n_shared": len(self.shared),
        }


def _check_mode(exclusion_mode: str) -> None:
    if exclusion_mode not in EXCLUSION_MODES:
        raise ValueError(f"exclusion_mode must be one of {EXCLUSION_MODES}, got {exclusion_mode!r}")


def _chain_neighbors(g: CausalGraph, node: int, direction: str, incoming: bool) -> list[int]:
    if direction == DIRECTED:
        table = g.in_edges if incoming else g.out_edges
        return list(table[node])
    return list(set(g.out_edges[node]) | set(g.in_edges[node]))


def _mine_chain_for_a(g: CausalGraph, a: int, spec: ReachabilitySpec) -> list[tuple[int, int, int]]:
    """Default-mode triples with treatment node ``a``.

    Candidates are direct causal chains z -> a -> b. The exclusion test
    deletes ``a`` and rejects the triple when b still reaches z within the
    hop bound: an outcome that can feed back into the instrument other than
    through the treatment disqualifies the pattern.
    """
    instruments = _chain_neighbors(g, a, spec.direction, incoming=True)
    outcomes = _chain_neighbors(g, a, spec.direction, incoming=False)
    if not instruments or not outcomes:
        return []
    found: list[tuple[int, int, int]] = []
    removed = replace(spec, excluded_node=a)
    for b in outcomes:
        back_reach = khop_reachable(g, b, removed)
        for z in instruments:
            if z != b and z not in back_reach:
                found.append((z, a, b))
    return found


def _mine_literal_for_z(
    g: CausalGraph, z: int, reach: dict[int, set[int]]
) -> list[tuple[int, int, int]]:
    """Strict-mode triples for instrument ``z``.

    Candidate treatments and outcomes come from the k-hop reach sets, and
    both non-reachability tests run on the intact graph. Because the chain
    z ~> a ~> b itself makes b reachable from z whenever the two legs fit
    inside the hop bound, this variant rejects every short chain; it is kept
    for fidelity experiments and is not the default.
    """
    found: list[tuple[int, int, int]] = []
    reach_z = reach[z]
    for a in reach_z:
        for b in reach[a]:
            if b == z or b == a:
                continue
            if z in reach[b] or b in reach_z:
                continue
            found.append((z, a, b))
    return found


def _chunks(items: list, n_chunks: int) -> list[list]:
    size = max(1, math.ceil(len(items) / max(1, n_chunks)))
    return [items[i : i + size] for i in range(0, len(items), size)]


def enumerate_iv_triples(
    g: CausalGraph,
    spec: ReachabilitySpec = ReachabilitySpec(),
    exclusion_mode: str = A_REMOVED,
    threshold: float = DEFAULT_WEIGHT_THRESHOLD,
    workers: int = 1,
) -> list[IvTriple]:
    """Enumerate and score all IV triples of the graph.

    In ``a_removed`` mode (default) a triple is a direct causal chain
    z -> a -> b whose outcome b cannot reach z within ``spec.max_hops``
    once node a is deleted. In ``literal`` mode candidates come from k-hop
    reach sets and both non-reachability tests (z to b, b to z) run on the
    full graph. Output is sorted ascending by (z, a, b) and is identical
    for any worker count.
    """
    _check_mode(exclusion_mode)
    if g.n_nodes == 0:
        raise ValueError("cannot mine an empty graph")
    if spec.excluded_node is not None:
        raise ValueError("mining uses its own node exclusion; spec.excluded_node must be None")

    if exclusion_mode == A_REMOVED:
        targets = sorted(g.nodes)
        work = lambda a: _mine_chain_for_a(g, a, spec)  # noqa: E731
    else:
        reach = {v: khop_reachable(g, v, spec) for v in g.nodes}
        targets = sorted(g.nodes)
        work = lambda z: _mine_literal_for_z(g, z, reach)  # noqa: E731

    keys: list[tuple[int, int, int]] = []
    if workers > 1 and len(targets) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for batch in pool.map(lambda chunk: [t for n in chunk for t in work(n)], _chunks(targets, workers)):
                keys.extend(batch)
    else:
        for node in targets:
            keys.extend(work(node))
    keys.sort()
    scorer = _Scorer(g, spec, threshold)
    return [scorer.score(key) for key in keys]


class _Scorer:
    """Rubric scorer with per-source widest-path tables cached across triples."""

    def __init__(self, g: CausalGraph, spec: ReachabilitySpec, threshold: float):
        self.g = g
        self.plain = spec.without_exclusion()
        self.threshold = threshold
        self._tables: dict[int, dict[int, float]] = {}
        self._edge_node: dict[int, bool] = {}

    def _table(self, source: int) -> dict[int, float]:
        table = self._tables.get(source)
        if table is None:
            table = bottleneck_table(self.g, source, self.plain)
            self._tables[source] = table
        return table

    def score(self, triple: tuple[int, int, int]) -> IvTriple:
        z, a, b = triple
        for node in triple:
            if node not in self.g:
                raise UnknownNodeError(node)
        w_za = self._table(z).get(a)
        w_ab = self._table(a).get(b)
        edge_node = self._edge_node.get(z)
        if edge_node is None:
            edge_node = is_edge_node(self.g, z)
            self._edge_node[z] = edge_node
        score = int(edge_node)
        score += int(w_za is not None and w_za >= self.threshold)
        score += int(w_ab is not None and w_ab >= self.threshold)
        return IvTriple(
            z=z, a=a, b=b,
            z_is_edge_node=edge_node,
            w_za=w_za, w_ab=w_ab,
            score=score, quality=_quality_for_score(score),
        )


def score_triple(
    g: CausalGraph,
    triple: tuple[int, int, int],
    spec: ReachabilitySpec = ReachabilitySpec(),
    threshold: float = DEFAULT_WEIGHT_THRESHOLD,
) -> IvTriple:
    """Attach rubric components to a mined (z, a, b) triple.

    Association weights are widest-path weights computed on the full graph
    (no node exclusion): the rubric grades how strongly the concepts are
    tied, not the exclusion test.
    """
    return _Scorer(g, spec, threshold).score(triple)


def score_triples(
    g: CausalGraph,
    keys: Sequence[tuple[int, int, int]],
    spec: ReachabilitySpec = ReachabilitySpec(),
    threshold: float = DEFAULT_WEIGHT_THRESHOLD,
) -> list[IvTriple]:
    """Score many (z, a, b) keys with shared widest-path caches."""
    scorer = _Scorer(g, spec, threshold)
    return [scorer.score(key) for key in keys]


def count_za_pairs(
    g: CausalGraph,
    spec: ReachabilitySpec = ReachabilitySpec(),
    exclusion_mode: str = A_REMOVED,
) -> int:
    """Distinct ordered (z, a) candidate pairs for the given mode.

    Default mode pairs are direct z -> a chain legs; literal mode counts
    pairs with a inside z's k-hop reach set.
    """
    _check_mode(exclusion_mode)
    if exclusion_mode == A_REMOVED:
        return sum(len(_chain_neighbors(g, z, spec.direction, incoming=False)) for z in g.nodes)
    return sum(len(khop_reachable(g, z, spec)) for z in g.nodes)


def summarize(
    triples: Sequence[IvTriple],
    g: CausalGraph,
    spec: ReachabilitySpec = ReachabilitySpec(),
    exclusion_mode: str = A_REMOVED,
) -> MiningStats:
    """Mining totals and the distribution of triple counts per instrument.

    Every graph node counts as an instrument candidate, including nodes
    that produced no triples.
    """
    per_z = Counter(t.z for t in triples)
    counts = [per_z.get(node, 0) for node in g.nodes]
    if not counts:
        raise ValueError("cannot summarize over an empty graph")
    n = len(counts)
    mean = sum(counts) / n
    std = math.sqrt(sum((c - mean) ** 2 for c in counts) / n)
    return MiningStats(
        n_nodes=g.n_nodes,
        n_za_pairs=count_za_pairs(g, spec, exclusion_mode),
        n_zab_triples=len(triples),
        per_z_min=min(counts),
        per_z_mean=mean,
        per_z_std=std,
        per_z_max=max(counts),
    )


def quality_partition(triples: Sequence[IvTriple]) -> QualityPartition:
    """Count triples per rubric class; the classes partition the input."""
    by_quality = Counter(t.quality for t in triples)
    edge_triples = [t for t in triples if t.z_is_edge_node]
    return QualityPartition(
        n_low=by_quality.get(QUALITY_LOW, 0),
        n_middle=by_quality.get(QUALITY_MIDDLE, 0),
        n_high=by_quality.get(QUALITY_HIGH, 0),
        n_edge_node_triples=len(edge_triples),
        n_edge_node_z=len({t.z for t in edge_triples}),
    )


def compare_subgraphs(
    triples_left: Sequence[IvTriple], triples_right: Sequence[IvTriple]
) -> OverlapReport:
    """Partition the distinct instrument (Z) ids of two mined triple lists."""
    left = {t.z for t in triples_left}
    right = {t.z for t in triples_right}
    return OverlapReport(
        exclusive_left=frozenset(left - right),
        exclusive_right=frozenset(right - left),
        shared=frozenset(left & right),
    )


def _format_weight(w: float | None) -> str:
    return "NA" if w is None else repr(float(w))


def write_triples_tsv(triples: Sequence[IvTriple], g: CausalGraph, dest) -> None:
    """Write scored triples as TSV with concept terms resolved from the graph."""
    lines = ["\t".join(TRIPLES_HEADER) + "\n"]
    for t in triples:
        lines.append(
            "\t".join(
                (
                    str(t.z), str(t.a), str(t.b),
                    g.term(t.z), g.term(t.a), g.term(t.b),
                    "true" if t.z_is_edge_node else "false",
                    _format_weight(t.w_za), _format_weight(t.w_ab),
                    str(t.score), t.quality,
                )
            )
            + "\n"
        )
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8") as handle:
            handle.writelines(lines)
    else:
        dest.writelines(lines)


def read_triples_tsv(source: str | os.PathLike | IO[str] | Iterable[str]) -> list[IvTriple]:
    """Parse a triples TSV produced by :func:`write_triples_tsv`."""

    def _parse(lines: Iterable[str]) -> list[IvTriple]:
        triples: list[IvTriple] = []
        header_seen = False
        for line_no, raw in enumerate(lines, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not header_seen:
                if tuple(line.split("\t")) != TRIPLES_HEADER:
                    raise ValueError(f"line {line_no}: bad triples header {line!r}")
                header_seen = True
                continue
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != len(TRIPLES_HEADER):
                raise ValueError(f"line {line_no}: expected {len(TRIPLES_HEADER)} fields, got {len(fields)}")
            z, a, b = (int(fields[i]) for i in (0, 1, 2))
            edge_node = fields[6] == "true"
            w_za = None if fields[7] == "NA" else float(fields[7])
            w_ab = None if fields[8] == "NA" else float(fields[8])
            score = int(fields[9])
            triples.append(
                IvTriple(z=z, a=a, b=b, z_is_edge_node=edge_node,
                         w_za=w_za, w_ab=w_ab, score=score, quality=fields[10])
            )
        if not header_seen:
            raise ValueError("triples table is empty (missing header)")
        return triples

    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as handle:
            return _parse(handle)
    return _parse(source)
