"""Weighted term-frequency features over a document corpus.

Builds a documents x concepts matrix where each cell is the term frequency
of a concept in the cleaned document times the concept's weight. Concept
lists come either from a similarity table (term, score) or from the nodes
of a causal graph, optionally weighted by their strongest incident edge.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from ._stopwords import ENGLISH_STOPWORDS
from .graph import CausalGraph

__all__ = [
    "SOURCE_SIMILARITY",
    "SOURCE_GRAPH_WEIGHTED",
    "SOURCE_GRAPH_UNWEIGHTED",
    "ENGLISH_STOPWORDS",
    "ConceptList",
    "FeatureMatrix",
    "build_concept_list_from_similarity",
    "build_concept_list_from_graph",
    "preprocess_document",
    "term_frequency",
    "build_feature_matrix",
    "split_train_validation",
    "load_stopwords",
    "read_corpus_dir",
]

logger = logging.getLogger(__name__)

SOURCE_SIMILARITY = "similarity"
SOURCE_GRAPH_WEIGHTED = "graph_weighted"
SOURCE_GRAPH_UNWEIGHTED = "graph_unweighted"
_SOURCE_KINDS = (SOURCE_SIMILARITY, SOURCE_GRAPH_WEIGHTED, SOURCE_GRAPH_UNWEIGHTED)

_NON_ALNUM = re.compile(r"[^0-9a-z]+")

LABEL_COLUMN = "label"


def _canonical_term(term: str) -> str:
    """Lowercase, strip punctuation/symbols, collapse whitespace."""
    return " ".join(_NON_ALNUM.sub(" ", term.lower()).split())


@dataclass(frozen=True)
class ConceptList:
    """Ordered (term, weight) entries used as feature columns.

    Terms are stored in canonical form (lowercased, punctuation stripped)
    and must be unique; weights are finite and non-negative. An unweighted
    graph list carries weight 1.0 everywhere.
    """

    entries: tuple[tuple[str, float], ...]
    source_kind: str

    def __post_init__(self) -> None:
        if self.source_kind not in _SOURCE_KINDS:
            raise ValueError(f"source_kind must be one of {_SOURCE_KINDS}, got {self.source_kind!r}")
        seen: set[str] = set()
        for term, weight in self.entries:
            if not term:
                raise ValueError("concept terms must be non-empty after normalization")
            if term != _canonical_term(term):
                raise ValueError(f"concept term {term!r} is not in canonical form")
            if term in seen:
                raise ValueError(f"duplicate concept term {term!r} after normalization")
            seen.add(term)
            if not math.isfinite(weight) or weight < 0.0:
                raise ValueError(f"concept {term!r} has invalid weight {weight!r}")
            if self.source_kind == SOURCE_GRAPH_UNWEIGHTED and weight != 1.0:
                raise ValueError("unweighted concept lists must carry weight 1.0")
        if not self.entries:
            logger.warning("concept list is empty; feature matrices will have no columns")

    def terms(self) -> list[str]:
        return [term for term, _ in self.entries]

    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.entries], dtype=float)

    def __len__(self) -> int:
        return len(self.entries)


def _iter_rows(source, n_cols: int, header: tuple[str, ...], what: str):
    def _gen(lines: Iterable[str]):
        header_seen = False
        for line_no, raw in enumerate(lines, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not header_seen:
                if tuple(line.split("\t")) != header:
                    raise ValueError(f"{what} line {line_no}: header must be {header}, got {line!r}")
                header_seen = True
                continue
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != n_cols:
                raise ValueError(f"{what} line {line_no}: expected {n_cols} fields, got {len(fields)}")
            yield line_no, fields
        if not header_seen:
            raise ValueError(f"{what} table is empty (missing header)")

    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as handle:
            yield from _gen(handle)
    else:
        yield from _gen(source)


def build_concept_list_from_similarity(table, threshold: float) -> ConceptList:
    """Keep (term, score) rows with score >= threshold; weight = score.

    Scores must lie in [-1, 1]. An empty result is allowed (a warning is
    logged), so an over-strict threshold does not abort a pipeline.
    """
    entries: list[tuple[str, float]] = []
    for line_no, (term, score_text) in _iter_rows(table, 2, ("term", "score"), "similarity"):
        try:
            score = float(score_text)
        except ValueError:
            raise ValueError(f"similarity line {line_no}: score {score_text!r} is not a number") from None
        if not -1.0 <= score <= 1.0:
            raise ValueError(f"similarity line {line_no}: score {score} outside [-1, 1]")
        if score >= threshold:
            entries.append((_canonical_term(term), score))
    if not entries:
        logger.warning("similarity threshold %s kept no concepts", threshold)
    return ConceptList(tuple(entries), SOURCE_SIMILARITY)


def build_concept_list_from_graph(g: CausalGraph, weighted: bool) -> ConceptList:
    """One concept per graph node, in ascending node-id order.

    Weighted mode assigns each concept its strongest incident edge weight
    (the concept's strongest causal association) and drops isolated nodes;
    unweighted mode keeps every node at weight 1.0.
    """
    entries: list[tuple[str, float]] = []
    for node_id in sorted(g.nodes):
        term = _canonical_term(g.nodes[node_id])
        if weighted:
            incident = list(g.out_edges[node_id].values()) + list(g.in_edges[node_id].values())
            if not incident:
                continue
            entries.append((term, max(incident)))
        else:
            entries.append((term, 1.0))
    kind = SOURCE_GRAPH_WEIGHTED if weighted else SOURCE_GRAPH_UNWEIGHTED
    return ConceptList(tuple(entries), kind)


def preprocess_document(text: str, stopwords: frozenset[str] | set[str] = ENGLISH_STOPWORDS) -> list[str]:
    """Lowercase, strip punctuation/symbols, tokenize, drop stopwords."""
    tokens = _NON_ALNUM.sub(" ", text.lower()).split()
    return [t for t in tokens if t not in stopwords]


def term_frequency(tokens: Sequence[str], term: str) -> int:
    """Occurrences of ``term`` in the token sequence.

    Multiword terms count non-overlapping left-to-right n-gram matches;
    single-word terms count token equality. The term must be normalized
    the same way as the tokens.
    """
    pattern = term.split()
    if not pattern:
        return 0
    if len(pattern) == 1:
        needle = pattern[0]
        return sum(1 for t in tokens if t == needle)
    tokens = list(tokens)
    count = 0
    i = 0
    limit = len(tokens) - len(pattern)
    while i <= limit:
        if tokens[i : i + len(pattern)] == pattern:
            count += 1
            i += len(pattern)
        else:
            i += 1
    return count


@dataclass
class FeatureMatrix:
    """Documents x concepts matrix of weighted term frequencies."""

    doc_ids: list[str]
    terms: list[str]
    values: np.ndarray
    labels: list[str] | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.doc_ids), len(self.terms)):
            raise ValueError(
                f"matrix shape {self.values.shape} does not match "
                f"{len(self.doc_ids)} documents x {len(self.terms)} concepts"
            )
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise ValueError("duplicate document ids")
        if self.values.size and self.values.min() < 0:
            raise ValueError("feature values must be non-negative")
        if self.labels is not None and len(self.labels) != len(self.doc_ids):
            raise ValueError("labels length does not match document count")

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    @property
    def n_concepts(self) -> int:
        return len(self.terms)

    def subset(self, row_indices: Sequence[int]) -> "FeatureMatrix":
        ids = [self.doc_ids[i] for i in row_indices]
        labels = [self.labels[i] for i in row_indices] if self.labels is not None else None
        return FeatureMatrix(ids, list(self.terms), self.values[list(row_indices)], labels)

    def write_csv(self, dest) -> None:
        """CSV with an ``id`` first column and optional trailing ``label``."""

        def _write(handle: IO[str]) -> None:
            writer = csv.writer(handle, lineterminator="\n")
            header = ["id", *self.terms]
            if self.labels is not None:
                header.append(LABEL_COLUMN)
            writer.writerow(header)
            for i, doc_id in enumerate(self.doc_ids):
                row = [doc_id, *(repr(v) for v in self.values[i].tolist())]
                if self.labels is not None:
                    row.append(self.labels[i])
                writer.writerow(row)

        if isinstance(dest, (str, os.PathLike)):
            with open(dest, "w", encoding="utf-8", newline="") as handle:
                _write(handle)
        else:
            _write(dest)

    @classmethod
    def read_csv(cls, source) -> "FeatureMatrix":
        def _read(handle) -> "FeatureMatrix":
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                raise ValueError("feature CSV is empty") from None
            if not header or header[0] != "id":
                raise ValueError("feature CSV must start with an 'id' column")
            labeled = len(header) > 1 and header[-1] == LABEL_COLUMN
            terms = header[1 : -1 if labeled else len(header)]
            ids: list[str] = []
            labels: list[str] | None = [] if labeled else None
            rows: list[list[float]] = []
            for row in reader:
                if not row:
                    continue
                expected = 1 + len(terms) + (1 if labeled else 0)
                if len(row) != expected:
                    raise ValueError(f"feature CSV row for id {row[0]!r} has {len(row)} fields, expected {expected}")
                ids.append(row[0])
                end = -1 if labeled else len(row)
                rows.append([float(v) for v in row[1:end]])
                if labeled:
                    labels.append(row[-1])  # type: ignore[union-attr]
            values = np.array(rows, dtype=float) if rows else np.zeros((0, len(terms)))
            return cls(ids, terms, values, labels)

        if isinstance(source, (str, os.PathLike)):
            with open(source, "r", encoding="utf-8", newline="") as handle:
                return _read(handle)
        return _read(source)


def build_feature_matrix(
    docs: Sequence[tuple],
    concepts: ConceptList,
    stopwords: frozenset[str] | set[str] = ENGLISH_STOPWORDS,
    workers: int = 1,
) -> FeatureMatrix:
    """Weighted term-frequency matrix over the given documents.

    ``docs`` holds (id, text) or (id, text, label) tuples; labels must be
    present on all documents or none. Row order follows input order and
    column order follows the concept list. Concept terms are re-tokenized
    with the same stopword set as the documents so multiword concepts that
    contain stopwords still match.
    """
    if len(concepts) == 0:
        raise ValueError("concept list is empty")
    ids: list[str] = []
    texts: list[str] = []
    labels: list[str] = []
    n_labeled = 0
    for doc in docs:
        if len(doc) not in (2, 3):
            raise ValueError(f"document entries must be (id, text[, label]), got {doc!r}")
        ids.append(str(doc[0]))
        texts.append(doc[1])
        if len(doc) == 3 and doc[2] is not None:
            labels.append(str(doc[2]))
            n_labeled += 1
    if n_labeled and n_labeled != len(ids):
        raise ValueError("either all documents or none must carry a label")
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValueError(f"duplicate document ids: {dupes}")

    term_patterns = [" ".join(preprocess_document(term, stopwords)) for term, _ in concepts.entries]
    weights = concepts.weights()

    def _row(text: str) -> np.ndarray:
        tokens = preprocess_document(text, stopwords)
        counts = np.array([term_frequency(tokens, p) for p in term_patterns], dtype=float)
        return counts * weights

    if workers > 1 and len(texts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_row, texts))
    else:
        rows = [_row(t) for t in texts]
    values = np.vstack(rows) if rows else np.zeros((0, len(concepts)))
    return FeatureMatrix(ids, concepts.terms(), values, labels if n_labeled else None)


def split_train_validation(
    matrix: FeatureMatrix, train_fraction: float = 0.8, seed: int = 0
) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Seeded shuffle, then split with floor(n * train_fraction) training rows.

    The floor never exceeds the requested fraction. Rows must be labeled.
    """
    if matrix.labels is None:
        raise ValueError("cannot split an unlabeled feature matrix")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(matrix.n_docs)
    n_train = int(math.floor(matrix.n_docs * train_fraction))
    return matrix.subset(order[:n_train].tolist()), matrix.subset(order[n_train:].tolist())


def load_stopwords(path) -> frozenset[str]:
    """Read one stopword per line (blank lines and '#' comments ignored)."""
    words = set()
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            word = line.strip().lower()
            if word and not word.startswith("#"):
                words.add(word)
    return frozenset(words)


def read_corpus_dir(corpus_dir) -> list[tuple]:
    """Read a directory of .txt documents plus an optional labels.tsv.

    Document ids are file stems, ordered by id. When labels.tsv (header
    ``id<TAB>label``) is present every document must be covered.
    """
    root = Path(corpus_dir)
    if not root.is_dir():
        raise ValueError(f"corpus directory {root} does not exist")
    txt_files = sorted(root.glob("*.txt"), key=lambda p: p.stem)
    if not txt_files:
        raise ValueError(f"corpus directory {root} contains no .txt documents")
    labels_path = root / "labels.tsv"
    labels: dict[str, str] | None = None
    if labels_path.exists():
        labels = {}
        for _line_no, (doc_id, label) in _iter_rows(labels_path, 2, ("id", "label"), "labels"):
            if doc_id in labels:
                raise ValueError(f"duplicate label row for document {doc_id!r}")
            labels[doc_id] = label
    docs: list[tuple] = []
    for path in txt_files:
        text = path.read_text(encoding="utf-8")
        if labels is None:
            docs.append((path.stem, text))
        else:
            if path.stem not in labels:
                raise ValueError(f"labels.tsv is missing document {path.stem!r}")
            docs.append((path.stem, text, labels[path.stem]))
    return docs
