"""Command-line interface: mine, compare, features, classify, tsls, synth.

Every subcommand is deterministic for fixed inputs and seed; all randomness
flows from --seed. Exit codes: 0 success, 2 usage/input error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .features import (
    ENGLISH_STOPWORDS,
    FeatureMatrix,
    build_concept_list_from_graph,
    build_concept_list_from_similarity,
    build_feature_matrix,
    load_stopwords,
    read_corpus_dir,
    split_train_validation,
)
from .forest import ForestParams, evaluate, predict, save_model, train_forest
from .graph import (
    DIRECTED,
    UNDIRECTED,
    GraphIntegrityError,
    GraphParseError,
    ReachabilitySpec,
    UnknownNodeError,
    load_graph,
    write_graph_tsv,
)
from .mining import (
    A_REMOVED,
    DEFAULT_WEIGHT_THRESHOLD,
    LITERAL,
    compare_subgraphs,
    enumerate_iv_triples,
    quality_partition,
    read_triples_tsv,
    score_triples,
    summarize,
    write_triples_tsv,
)
from .regression import (
    ROBUST_HC1,
    ROBUST_NONE,
    DegenerateDataError,
    RegressionSpec,
    SingularMatrixError,
    format_tsls_text,
    tsls_from_panel,
)
from .synth import ScmParams, brute_force_iv_oracle, gen_classification_corpus, gen_random_graph, gen_scm_panel

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

FORMAT_VERSION = 1

DEFAULT_VOCAB = [
    "revenue", "asset", "liability", "equity", "margin", "cash", "flow",
    "capital", "expense", "growth", "market", "quarter", "fiscal", "report",
    "board", "auditor", "risk", "hedge", "rate", "bond", "index", "sector",
    "earnings", "guidance", "forecast", "segment", "operations", "supply",
]
DEFAULT_MARKERS = {
    "shareholder": ["dividend", "buyback", "payout", "valuation"],
    "stakeholder": ["community", "sustainability", "employee", "environment"],
}


def _write_json(payload: dict, dest: str | None) -> None:
    payload = {"tool_version": __version__, "format_version": FORMAT_VERSION, **payload}
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if dest is None or dest == "-":
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text, encoding="utf-8")


def _write_text(text: str, dest: str | None) -> None:
    if dest is None or dest == "-":
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text, encoding="utf-8")


def _reach_spec(args: argparse.Namespace) -> ReachabilitySpec:
    return ReachabilitySpec(max_hops=args.hops, direction=args.direction)


def cmd_mine(args: argparse.Namespace) -> int:
    g = load_graph(args.nodes, args.edges)
    spec = _reach_spec(args)
    if args.oracle:
        keys = brute_force_iv_oracle(g, spec, args.exclusion)
        triples = score_triples(g, keys, spec, args.weight_threshold)
    else:
        triples = enumerate_iv_triples(
            g, spec, exclusion_mode=args.exclusion,
            threshold=args.weight_threshold, workers=args.workers,
        )
    if args.out_triples and args.out_triples != "-":
        write_triples_tsv(triples, g, args.out_triples)
    else:
        write_triples_tsv(triples, g, sys.stdout)
    if args.out_stats:
        stats = summarize(triples, g, spec, args.exclusion)
        _write_json(stats.to_dict(), args.out_stats)
    if args.out_quality:
        _write_json(quality_partition(triples).to_dict(), args.out_quality)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    left = read_triples_tsv(args.left)
    right = read_triples_tsv(args.right)
    _write_json(compare_subgraphs(left, right).to_dict(), args.out)
    return EXIT_OK


def _concepts_from_args(args: argparse.Namespace):
    if args.similarity_table:
        if args.nodes or args.edges:
            raise ValueError("give either --similarity-table or --nodes/--edges, not both")
        return build_concept_list_from_similarity(args.similarity_table, args.similarity_threshold)
    if not (args.nodes and args.edges):
        raise ValueError("concept source required: --similarity-table or --nodes and --edges")
    g = load_graph(args.nodes, args.edges)
    return build_concept_list_from_graph(g, weighted=not args.unweighted)


def cmd_features(args: argparse.Namespace) -> int:
    concepts = _concepts_from_args(args)
    stopwords = load_stopwords(args.stopwords) if args.stopwords else ENGLISH_STOPWORDS
    docs = read_corpus_dir(args.corpus)
    matrix = build_feature_matrix(docs, concepts, stopwords, workers=args.workers)
    if args.out and args.out != "-":
        matrix.write_csv(args.out)
    else:
        matrix.write_csv(sys.stdout)
    return EXIT_OK


def cmd_classify(args: argparse.Namespace) -> int:
    matrix = FeatureMatrix.read_csv(args.features)
    if matrix.labels is None:
        raise ValueError("feature matrix has no label column; classification needs labels")
    train, validation = split_train_validation(matrix, args.train_fraction, args.seed)
    params = ForestParams(
        n_trees=args.trees,
        max_depth=args.max_depth,
        min_samples_split=args.min_samples_split,
        features_per_split=_parse_features_per_split(args.features_per_split),
        seed=args.seed,
    )
    model = train_forest(train, params)
    predictions = predict(model, validation)
    positive = args.positive_label or model.class_labels[1]
    metrics = evaluate(validation.labels, predictions, positive)
    _write_json(
        {
            "metrics": metrics.to_dict(),
            "n_train": train.n_docs,
            "n_validation": validation.n_docs,
            "params": params.to_dict(),
        },
        args.out_metrics,
    )
    if args.out_model:
        save_model(model, args.out_model)
    return EXIT_OK


def _parse_features_per_split(value: str):
    if value in ("sqrt", "all"):
        return value
    return int(value)


def _regression_spec_from_args(args: argparse.Namespace) -> RegressionSpec:
    if args.spec:
        payload = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        return RegressionSpec.from_dict(payload)
    if not (args.outcome and args.endogenous and args.instruments):
        raise ValueError("either --spec or --outcome/--endogenous/--instruments are required")
    return RegressionSpec(
        outcome=args.outcome,
        endogenous=args.endogenous,
        instruments=tuple(args.instruments),
        controls=tuple(args.controls or ()),
        fixed_effects=tuple(args.fixed_effects or ()),
        robust=args.robust,
    )


def cmd_tsls(args: argparse.Namespace) -> int:
    spec = _regression_spec_from_args(args)
    panel = pd.read_csv(args.panel)
    result = tsls_from_panel(panel, spec)
    if args.format == "json":
        _write_json(result.to_dict(), args.out)
    else:
        _write_text(format_tsls_text(result), args.out)
    if args.out_json:
        _write_json(result.to_dict(), args.out_json)
    return EXIT_OK


def cmd_synth_graph(args: argparse.Namespace) -> int:
    g = gen_random_graph(args.n, args.edge_prob, (args.weight_min, args.weight_max), args.seed)
    write_graph_tsv(g, args.out_nodes, args.out_edges)
    return EXIT_OK


def cmd_synth_panel(args: argparse.Namespace) -> int:
    params = ScmParams(
        pi=args.pi, alpha=args.alpha, beta=args.beta, gamma=args.gamma,
        sigma_nu=args.sigma_nu, sigma_eps=args.sigma_eps,
        n=args.n, seed=args.seed,
        n_industries=args.industries, n_years=args.years, group_sigma=args.group_sigma,
    )
    panel = gen_scm_panel(params)
    panel.to_csv(args.out, index=False)
    return EXIT_OK


def cmd_synth_corpus(args: argparse.Namespace) -> int:
    docs = gen_classification_corpus(
        n_docs=args.docs, vocab=DEFAULT_VOCAB, markers=DEFAULT_MARKERS,
        noise_rate=args.noise, seed=args.seed,
        tokens_per_doc=args.tokens_per_doc, markers_per_doc=args.markers_per_doc,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    label_lines = ["id\tlabel\n"]
    for doc_id, text, label in docs:
        (out_dir / f"{doc_id}.txt").write_text(text + "\n", encoding="utf-8")
        label_lines.append(f"{doc_id}\t{label}\n")
    (out_dir / "labels.tsv").write_text("".join(label_lines), encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ivgraph",
        description="Mine instrumental-variable patterns from causal knowledge graphs "
        "and validate causal chains with 2SLS.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    shared.add_argument("--hops", type=int, default=3, help="reachability hop bound")
    shared.add_argument("--direction", choices=[DIRECTED, UNDIRECTED], default=DIRECTED)
    shared.add_argument(
        "--exclusion", choices=[A_REMOVED, LITERAL], default=A_REMOVED,
        metavar="{a-removed,literal}",
        type=lambda v: v.replace("-", "_"),
        help="exclusion-test mode: a-removed (default) or literal",
    )
    shared.add_argument("--weight-threshold", type=float, default=DEFAULT_WEIGHT_THRESHOLD)
    shared.add_argument("--format", choices=["tsv", "json", "text"], default="text")
    shared.add_argument("--workers", type=int, default=1)

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", parents=[shared], help="enumerate and score IV triples from a graph")
    p.add_argument("nodes", help="nodes TSV (id<TAB>term)")
    p.add_argument("edges", help="edges TSV (src<TAB>dst<TAB>weight)")
    p.add_argument("--out-triples", default="-", help="triples TSV output path (default stdout)")
    p.add_argument("--out-stats", help="mining stats JSON output path")
    p.add_argument("--out-quality", help="quality partition JSON output path")
    p.add_argument("--oracle", action="store_true", help="use the brute-force oracle enumerator (debug)")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("compare", parents=[shared], help="compare instrument sets of two triples files")
    p.add_argument("left", help="triples TSV")
    p.add_argument("right", help="triples TSV")
    p.add_argument("--out", help="overlap JSON output path (default stdout)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("features", parents=[shared], help="build a weighted term-frequency matrix")
    p.add_argument("corpus", help="directory of .txt documents (optional labels.tsv)")
    p.add_argument("--similarity-table", help="concept TSV (term<TAB>score)")
    p.add_argument("--similarity-threshold", type=float, default=0.55)
    p.add_argument("--nodes", help="graph nodes TSV (concept source)")
    p.add_argument("--edges", help="graph edges TSV (concept source)")
    p.add_argument("--unweighted", action="store_true", help="graph concepts at weight 1.0")
    p.add_argument("--stopwords", help="custom stopword file (one word per line)")
    p.add_argument("--out", default="-", help="feature CSV output path (default stdout)")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("classify", parents=[shared], help="train/evaluate a random forest on features")
    p.add_argument("features", help="labeled feature CSV")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--min-samples-split", type=int, default=2)
    p.add_argument("--features-per-split", default="sqrt", help="sqrt, all, or a fixed count")
    p.add_argument("--positive-label", help="label treated as positive (default: larger label)")
    p.add_argument("--out-metrics", help="metrics JSON output path (default stdout)")
    p.add_argument("--out-model", help="model JSON output path")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("tsls", parents=[shared], help="fit 2SLS with fixed effects and diagnostics")
    p.add_argument("panel", help="panel CSV")
    p.add_argument("--spec", help="JSON file with outcome/endogenous/instruments/controls/fixed_effects/robust")
    p.add_argument("--outcome")
    p.add_argument("--endogenous")
    p.add_argument("--instruments", nargs="+")
    p.add_argument("--controls", nargs="*", default=[])
    p.add_argument("--fixed-effects", nargs="*", default=[])
    p.add_argument("--robust", choices=[ROBUST_NONE, ROBUST_HC1], default=ROBUST_HC1)
    p.add_argument("--out", help="report output path (default stdout; text or json per --format)")
    p.add_argument("--out-json", help="also write the JSON result here")
    p.set_defaults(func=cmd_tsls)

    # No shared parent on the group parser itself: a subparser re-applies its
    # own defaults and would silently reset flags given before the kind.
    p = sub.add_parser("synth", help="generate synthetic fixtures")
    synth_sub = p.add_subparsers(dest="synth_kind", required=True)

    sp = synth_sub.add_parser("graph", parents=[shared], help="random weighted directed graph")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--edge-prob", type=float, required=True)
    sp.add_argument("--weight-min", type=float, default=0.5)
    sp.add_argument("--weight-max", type=float, default=9.5)
    sp.add_argument("--out-nodes", required=True)
    sp.add_argument("--out-edges", required=True)
    sp.set_defaults(func=cmd_synth_graph)

    sp = synth_sub.add_parser("panel", parents=[shared], help="confounded instrument panel")
    sp.add_argument("--pi", type=float, default=1.0)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--beta", type=float, default=2.0)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--sigma-nu", type=float, default=1.0)
    sp.add_argument("--sigma-eps", type=float, default=1.0)
    sp.add_argument("--n", type=int, default=10_000)
    sp.add_argument("--industries", type=int, default=0)
    sp.add_argument("--years", type=int, default=0)
    sp.add_argument("--group-sigma", type=float, default=0.5)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth_panel)

    sp = synth_sub.add_parser("corpus", parents=[shared], help="labeled two-class document corpus")
    sp.add_argument("--docs", type=int, default=400)
    sp.add_argument("--noise", type=float, default=0.05)
    sp.add_argument("--tokens-per-doc", type=int, default=60)
    sp.add_argument("--markers-per-doc", type=int, default=8)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_synth_corpus)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (SingularMatrixError, DegenerateDataError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (
        GraphParseError,
        GraphIntegrityError,
        UnknownNodeError,
        ValueError,
        KeyError,
        OSError,
        json.JSONDecodeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
