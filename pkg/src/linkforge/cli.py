"""Command-line surface for ingestion, indexing, linking, and evaluation.

Subcommands: ingest, split, index-fuzzy, index-ref, link, eval, pairs,
synonyms, bench. All randomness is controlled by --seed; the encoder is
either a deterministic stub ("stub:<seed>[:dim]") or an HTTP endpoint,
defaulting to the LINKFORGE_ENCODER environment variable. Exit codes:
0 success, 1 validation error, 2 I/O error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import ctxlink, evalkit, fuzzy, hybrid
from .corpus import Corpus, MentionRecord, ROLE_QUERY
from .ctxlink import LinkError, LinkResult, ReferenceIndex
from .embed import CrossHead, StubEncoder, sample_pairs, write_pairs_jsonl
from .normalize import NormalizerConfig
from .remote import RemoteEncoder

__all__ = ["main"]

ENV_ENCODER = "LINKFORGE_ENCODER"
DEFAULT_ENCODER = "stub:0"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the CLI contract reserves 2 for I/O errors
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _resolve_encoder(spec: str):
    if spec.startswith("stub:"):
        parts = spec.split(":")
        try:
            seed = int(parts[1])
            dim = int(parts[2]) if len(parts) > 2 else 64
        except (IndexError, ValueError):
            raise UsageError(f"bad stub encoder spec {spec!r}; expected stub:<seed>[:dim]")
        return StubEncoder(seed=seed, dimension=dim)
    if spec.startswith(("http://", "https://")):
        return RemoteEncoder(spec)
    raise UsageError(f"encoder must be stub:<seed> or an http(s) URL, got {spec!r}")


def _load_head(path: str | None, dimension: int, seed: int) -> CrossHead:
    if path is None:
        return CrossHead.seeded(dimension, seed)
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    weights = np.array(obj["weights"], dtype=np.float64)
    if len(weights) != dimension:
        raise UsageError(
            f"head dimension {len(weights)} does not match encoder dimension {dimension}"
        )
    return CrossHead(weights=weights, bias=float(obj.get("bias", 0.0)))


@dataclass
class _Query:
    surface: str
    sentence: str | None
    span: tuple[int, int] | None
    entity_id: str | None


def _read_queries(path: str) -> list[_Query]:
    out = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if "surface" not in obj:
                raise UsageError(f"{path}:{lineno}: query line needs a 'surface' key")
            span = None
            if "span_start" in obj and "span_end" in obj:
                span = (int(obj["span_start"]), int(obj["span_end"]))
            out.append(
                _Query(
                    surface=str(obj["surface"]),
                    sentence=obj.get("sentence"),
                    span=span,
                    entity_id=obj.get("entity_id"),
                )
            )
    return out


class _Linkers:
    """Shared construction of the four linking methods from CLI options."""

    def __init__(self, args: argparse.Namespace, corpus: Corpus | None) -> None:
        self.method = args.method
        self.corpus = corpus
        self.normalizer = NormalizerConfig.default(args.language)
        self.top_k = args.top_k
        self.fuzzy_index = None
        self.ref_index: ReferenceIndex | None = None
        self.encoder = None
        self.head = None

        needs_fuzzy = self.method in ("heuristic", "hybrid")
        needs_ref = self.method in ("bi", "cross", "hybrid")
        if needs_fuzzy:
            if getattr(args, "fuzzy_index", None):
                self.fuzzy_index = fuzzy.load_index(args.fuzzy_index)
            elif corpus is not None:
                self.fuzzy_index = fuzzy.build_index(
                    corpus.entities.values(), self.normalizer, max_edit=args.max_edit
                )
            else:
                raise UsageError(f"method {self.method} needs --fuzzy-index or --corpus")
        if needs_ref:
            self.encoder = _resolve_encoder(args.encoder)
            if getattr(args, "ref_index", None):
                self.ref_index = ctxlink.deserialize_index(args.ref_index)
            elif corpus is not None:
                self.ref_index = ctxlink.build_reference_index(corpus, self.encoder, mode=args.mode)
            else:
                raise UsageError(f"method {self.method} needs --ref-index or --corpus")
        if self.method in ("cross", "hybrid"):
            self.head = _load_head(getattr(args, "head", None), self.encoder.dimension, args.seed)
        cross_all = bool(getattr(args, "cross_all", False))
        self.hybrid_config = hybrid.HybridConfig(
            contextual_method="cross" if self.method == "cross" else getattr(args, "contextual", "bi"),
            top_k=self.top_k,
            cross_head=self.head,
            rerank_k=getattr(args, "rerank_k", 64),
            cross_all_references=cross_all,
            restrict_to_ties=bool(getattr(args, "restrict_ties", False)),
        ) if self.method in ("hybrid", "cross") else None

    def link_mention(self, surface: str, sentence: str | None, span: tuple[int, int] | None) -> LinkResult:
        method = self.method
        if method == "heuristic":
            return hybrid.heuristic_result(surface, self.fuzzy_index, self.normalizer, self.top_k)
        if sentence is None or span is None:
            raise UsageError(f"method {method} needs sentence and span on every query line")
        if method == "bi":
            return ctxlink.link_bi(sentence, span, self.ref_index, self.encoder, top_k=self.top_k)
        if method == "cross":
            if self.corpus is None:
                raise UsageError("method cross needs --corpus for candidate reference records")
            candidates = hybrid.cross_candidate_records(
                self.corpus, sentence, span, self.ref_index, self.encoder, self.hybrid_config
            )
            result = ctxlink.link_cross(sentence, span, candidates, self.encoder, self.head)
            return LinkResult(ranked=result.ranked[: self.top_k])
        if method == "hybrid":
            return hybrid.link_hybrid(
                surface,
                sentence,
                span,
                self.fuzzy_index,
                self.ref_index,
                self.encoder,
                self.hybrid_config,
                self.normalizer,
                corpus=self.corpus,
            )
        raise UsageError(f"unknown method {method!r}")

    def link_record(self, record: MentionRecord) -> LinkResult:
        return self.link_mention(record.surface, record.sentence, record.span)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="seed controlling all randomness")
    parser.add_argument("--language", default="de", choices=("de", "en"),
                        help="normalizer resource language")


def _add_linker_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--method", required=True, choices=("heuristic", "bi", "cross", "hybrid"))
    parser.add_argument("--corpus", help="corpus JSONL (entities and reference records)")
    parser.add_argument("--entities", help="extra entities JSONL for zero-mention entities")
    parser.add_argument("--fuzzy-index", help="prebuilt fuzzy index file")
    parser.add_argument("--ref-index", help="prebuilt reference index file")
    parser.add_argument("--encoder", default=os.environ.get(ENV_ENCODER, DEFAULT_ENCODER),
                        help="stub:<seed>[:dim] or http(s) endpoint")
    parser.add_argument("--head", help="cross-encoder head JSON ({weights, bias})")
    parser.add_argument("--max-edit", type=int, default=2, dest="max_edit")
    parser.add_argument("--top-k", type=int, default=10, dest="top_k")
    parser.add_argument("--mode", default="exact", choices=("exact", "approximate"),
                        help="reference index mode when built on the fly")
    parser.add_argument("--contextual", default="bi", choices=("bi", "cross"),
                        help="hybrid fallback method")
    parser.add_argument("--rerank-k", type=int, default=64, dest="rerank_k",
                        help="bi-encoder shortlist size for cross reranking")
    parser.add_argument("--cross-all", action="store_true", dest="cross_all",
                        help="score all references with the cross-encoder instead of reranking")
    parser.add_argument("--restrict-ties", action="store_true", dest="restrict_ties",
                        help="limit the hybrid fallback to the heuristic tie set (variant mode)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="linkforge", description=__doc__)
    parser.add_argument("--config", help="optional key=value config file; flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and normalize a corpus JSONL")
    p.add_argument("--corpus", required=True)
    p.add_argument("--entities")
    p.add_argument("--out", required=True)
    p.add_argument("--out-entities", dest="out_entities")
    _add_common(p)

    p = sub.add_parser("split", help="split a corpus (disjoint entities or reference/query roles)")
    p.add_argument("--corpus", required=True)
    p.add_argument("--entities")
    p.add_argument("--fractions", help="train,validation,test fractions, e.g. 0.8,0.1,0.1")
    p.add_argument("--out-train", dest="out_train")
    p.add_argument("--out-validation", dest="out_validation")
    p.add_argument("--out-test", dest="out_test")
    p.add_argument("--ref-fraction", type=float, dest="ref_fraction",
                   help="per-entity reference share, e.g. 0.5")
    p.add_argument("--out")
    p.add_argument("--force", action="store_true", help="re-split even if roles are assigned")
    _add_common(p)

    p = sub.add_parser("index-fuzzy", help="build and save the heuristic delete index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--entities")
    p.add_argument("--out", required=True)
    p.add_argument("--max-edit", type=int, default=2, dest="max_edit")
    _add_common(p)

    p = sub.add_parser("index-ref", help="build and save the reference embedding index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--encoder", default=os.environ.get(ENV_ENCODER, DEFAULT_ENCODER))
    p.add_argument("--mode", default="exact", choices=("exact", "approximate"))
    p.add_argument("--trees", type=int)
    p.add_argument("--leaf-size", type=int, dest="leaf_size")
    p.add_argument("--search-k", type=int, dest="search_k")
    _add_common(p)

    p = sub.add_parser("link", help="link mentions from a queries JSONL")
    p.add_argument("--queries", required=True)
    p.add_argument("--out", required=True)
    _add_linker_options(p)
    _add_common(p)

    p = sub.add_parser("eval", help="top-1 accuracy over a corpus's query-role records")
    p.add_argument("--out", help="write the JSON report here")
    _add_linker_options(p)
    _add_common(p)

    p = sub.add_parser("pairs", help="export training pair samples as JSONL")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--negatives-per-positive", type=int, default=1, dest="negatives_per_positive")
    p.add_argument("--gamma", type=float, default=0.5, help="margin handed to the trainer")
    p.add_argument("--meta-out", dest="meta_out", help="write sampling metadata JSON here")
    _add_common(p)

    p = sub.add_parser("synonyms", help="rank synonym suggestions for one entity")
    p.add_argument("--entity", required=True, help="query entity id")
    p.add_argument("--out", required=True)
    _add_linker_options(p)
    _add_common(p)

    p = sub.add_parser("bench", help="compare bi vs cross per-query latency")
    p.add_argument("--corpus", required=True)
    p.add_argument("--encoder", default=os.environ.get(ENV_ENCODER, DEFAULT_ENCODER))
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--query-limit", type=int, dest="query_limit")
    p.add_argument("--out")
    _add_common(p)
    return parser


_CONFIG_KEYS = {
    "encoder": str,
    "seed": int,
    "max_edit": int,
    "top_k": int,
    "gamma": float,
    "language": str,
    "mode": str,
}


def _apply_config_file(argv: list[str], parser: _Parser) -> None:
    if "--config" not in argv:
        return
    path = argv[argv.index("--config") + 1]
    defaults = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        defaults[key] = _CONFIG_KEYS[key](value)
    for sub_action in parser._subparsers._group_actions:  # type: ignore[union-attr]
        for sub in sub_action.choices.values():
            known = {a.dest for a in sub._actions}
            sub.set_defaults(**{k: v for k, v in defaults.items() if k in known})


def _load_corpus_arg(args: argparse.Namespace) -> Corpus | None:
    if not getattr(args, "corpus", None):
        return None
    return corpus_mod.ingest_jsonl(args.corpus, entities_path=getattr(args, "entities", None))


def _cmd_ingest(args: argparse.Namespace) -> int:
    loaded = corpus_mod.ingest_jsonl(args.corpus, entities_path=args.entities)
    corpus_mod.write_jsonl(loaded, args.out, entities_path=args.out_entities)
    report = loaded.ingest_report
    print(
        f"ingested {len(loaded.records)} records, {len(loaded.entities)} entities; "
        f"rejected {len(report.rejected)}, duplicates {report.duplicates}"
    )
    for lineno, reason in report.rejected:
        print(f"  line {lineno}: {reason}", file=sys.stderr)
    return 0


def _cmd_split(args: argparse.Namespace) -> int:
    loaded = corpus_mod.ingest_jsonl(args.corpus, entities_path=args.entities)
    if (args.fractions is None) == (args.ref_fraction is None):
        raise UsageError("split needs exactly one of --fractions or --ref-fraction")
    if args.fractions is not None:
        parts = tuple(float(x) for x in args.fractions.split(","))
        if len(parts) != 3:
            raise UsageError("--fractions needs three comma-separated numbers")
        outs = (args.out_train, args.out_validation, args.out_test)
        if any(o is None for o in outs):
            raise UsageError("--fractions needs --out-train, --out-validation, and --out-test")
        for split, out in zip(corpus_mod.split_entities(loaded, parts, args.seed), outs):
            corpus_mod.write_jsonl(split, out)
            print(f"{split.split_tag}: {len(split.entities)} entities, {len(split.records)} records")
        return 0
    if args.out is None:
        raise UsageError("--ref-fraction needs --out")
    tagged = corpus_mod.split_reference_query(loaded, args.ref_fraction, args.seed, force=args.force)
    corpus_mod.write_jsonl(tagged, args.out)
    n_ref = sum(1 for r in tagged.records if r.role == corpus_mod.ROLE_REFERENCE)
    print(f"tagged {n_ref} reference / {len(tagged.records) - n_ref} query records")
    return 0


def _cmd_index_fuzzy(args: argparse.Namespace) -> int:
    loaded = corpus_mod.ingest_jsonl(args.corpus, entities_path=args.entities)
    config = NormalizerConfig.default(args.language)
    index = fuzzy.build_index(loaded.entities.values(), config, max_edit=args.max_edit)
    fuzzy.save_index(index, args.out)
    print(f"indexed {len(loaded.entities)} entities ({len(index)} variants) -> {args.out}")
    return 0


def _cmd_index_ref(args: argparse.Namespace) -> int:
    loaded = corpus_mod.ingest_jsonl(args.corpus)
    encoder = _resolve_encoder(args.encoder)
    ann_params = {"seed": args.seed}
    for key in ("trees", "leaf_size", "search_k"):
        value = getattr(args, key, None)
        if value is not None:
            ann_params[key] = value
    index = ctxlink.build_reference_index(loaded, encoder, mode=args.mode, ann_params=ann_params)
    ctxlink.serialize_index(index, args.out)
    print(f"indexed {len(index)} reference records -> {args.out}")
    if index.unlinkable:
        print(f"unlinkable entities (no reference): {', '.join(index.unlinkable)}", file=sys.stderr)
    return 0


def _cmd_link(args: argparse.Namespace) -> int:
    corpus = _load_corpus_arg(args)
    linkers = _Linkers(args, corpus)
    queries = _read_queries(args.queries)
    with open(args.out, "w", encoding="utf-8") as handle:
        for i, query in enumerate(queries):
            result = linkers.link_mention(query.surface, query.sentence, query.span)
            obj = {"query": i, "surface": query.surface, **result.to_obj()}
            handle.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")
    print(f"linked {len(queries)} queries -> {args.out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    corpus = _load_corpus_arg(args)
    if corpus is None:
        raise UsageError("eval needs --corpus")
    linkers = _Linkers(args, corpus)
    queries = [r for r in corpus.records if r.role == ROLE_QUERY]
    if not queries:
        raise UsageError("corpus has no query-role records; run split --ref-fraction first")
    linkable = None
    if linkers.ref_index is not None and linkers.method in ("bi", "cross"):
        linkable = set(corpus.entities) - set(linkers.ref_index.unlinkable)
    report = evalkit.evaluate_top1(linkers.link_record, queries, linkable_entities=linkable)
    print(evalkit.render_accuracy_table({args.method: report}))
    print(f"accuracy {100.0 * report.top1_accuracy:.2f} over {report.query_count} queries "
          f"({report.excluded_count} excluded)")
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    return 0


def _cmd_pairs(args: argparse.Namespace) -> int:
    loaded = corpus_mod.ingest_jsonl(args.corpus)
    pairs = sample_pairs(loaded, negatives_per_positive=args.negatives_per_positive, seed=args.seed)
    write_pairs_jsonl(pairs, args.out)
    n_pos = sum(1 for p in pairs if p.label == 1)
    print(f"wrote {n_pos} positive / {len(pairs) - n_pos} negative pairs -> {args.out}")
    if args.meta_out:
        meta = {
            "gamma": args.gamma,
            "negatives_per_positive": args.negatives_per_positive,
            "seed": args.seed,
            "corpus": args.corpus,
        }
        Path(args.meta_out).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", "utf-8")
    return 0


def _cmd_synonyms(args: argparse.Namespace) -> int:
    corpus = _load_corpus_arg(args)
    if corpus is None:
        raise UsageError("synonyms needs --corpus")
    if args.entity not in corpus.entities:
        raise UsageError(f"entity {args.entity!r} not in corpus")
    linkers = _Linkers(args, corpus)
    suggestions = evalkit.discover_synonyms(
        corpus.entities[args.entity], corpus, linkers.link_mention
    )
    with open(args.out, "w", encoding="utf-8") as handle:
        for s in suggestions:
            obj = {"noun": s.noun, "distance": s.distance, "record_ref": s.record_ref, "known": s.known}
            handle.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")
    print(f"found {len(suggestions)} suggestions -> {args.out}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    loaded = corpus_mod.ingest_jsonl(args.corpus)
    encoder = _resolve_encoder(args.encoder)
    ref_index = ctxlink.build_reference_index(loaded, encoder)
    head = CrossHead.seeded(encoder.dimension, args.seed)
    queries = [r for r in loaded.records if r.role == ROLE_QUERY]
    if not queries:
        raise UsageError("corpus has no query-role records to time")
    if args.query_limit:
        queries = queries[: args.query_limit]
    by_id = loaded.by_record_id()
    reference_records = [by_id[ref] for ref in ref_index.record_refs]

    def bi_linker(rec: MentionRecord) -> LinkResult:
        return ctxlink.link_bi(rec.sentence, rec.span, ref_index, encoder)

    def cross_linker(rec: MentionRecord) -> LinkResult:
        return ctxlink.link_cross(rec.sentence, rec.span, reference_records, encoder, head)

    comparison = evalkit.time_linkers(bi_linker, cross_linker, queries, repetitions=args.repetitions)
    text = json.dumps(comparison.to_obj(), sort_keys=True, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "split": _cmd_split,
    "index-fuzzy": _cmd_index_fuzzy,
    "index-ref": _cmd_index_ref,
    "link": _cmd_link,
    "eval": _cmd_eval,
    "pairs": _cmd_pairs,
    "synonyms": _cmd_synonyms,
    "bench": _cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        _apply_config_file(argv, parser)
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (LinkError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
