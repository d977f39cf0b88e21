"""Command-line entry point: ``litsieve {review,fetch,filter,eval,bibtex}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .bench import compare_providers, emit_plot_data, write_bench_csv
from .bibtex import make_bibliography, render_bibliography
from .config import InputQuery, load_config
from .embeddings import ProviderDescriptor
from .errors import LitSieveError
from .pipeline import build_pipeline, read_papers, run_pipeline, write_papers, write_scores

logger = logging.getLogger("litsieve")


def _common(p: argparse.ArgumentParser, query: bool = True) -> None:
    p.add_argument("--config", type=Path, help="YAML/JSON config file")
    p.add_argument("--output-dir", type=Path)
    p.add_argument("--cache-dir", type=Path)
    p.add_argument("--no-cache", action="store_true", help="disable the on-disk cache")
    p.add_argument("--offline", action="store_true",
                   help="no network: serve fixtures (see --fixtures) and cache only")
    p.add_argument("--fixtures", type=Path, help="fixture directory for --offline runs")
    p.add_argument("-v", "--verbose", action="store_true")
    if query:
        p.add_argument("--title")
        p.add_argument("--abstract-file", type=Path)
        p.add_argument("--abstract", help="abstract text (alternative to --abstract-file)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="litsieve", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("review", help="run the full pipeline")
    _common(p)
    p.add_argument("--provider")
    p.add_argument("--iqr-multiplier", type=float)
    p.add_argument("--max-per-keyword", type=int)
    p.add_argument("--no-pdf", action="store_true", help="summarize from abstracts only")

    p = sub.add_parser("fetch", help="generate keywords (or take --keyword) and fetch papers.json")
    _common(p)
    p.add_argument("--keyword", action="append", default=[],
                   help="search keyword; repeatable. Skips keyword generation")
    p.add_argument("--max-per-keyword", type=int)

    p = sub.add_parser("filter", help="score a corpus and apply the IQR threshold")
    _common(p)
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--provider")
    p.add_argument("--iqr-multiplier", type=float)

    p = sub.add_parser("eval", help="compare embedding providers on one corpus")
    _common(p)
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--providers", default="tfidf,minilm,specter2")
    p.add_argument("--iqr-multiplier", type=float)

    p = sub.add_parser("bibtex", help="write refs.bib for a corpus")
    _common(p, query=False)
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--ids", help="comma-separated arXiv ids to include (default: all)")
    return parser


def _query(args) -> InputQuery:
    if not args.title:
        raise SystemExit("error: --title is required")
    if args.abstract_file:
        abstract = args.abstract_file.read_text(encoding="utf-8")
    elif args.abstract is not None:
        abstract = args.abstract
    else:
        raise SystemExit("error: --abstract-file (or --abstract) is required")
    try:
        return InputQuery(args.title, abstract)
    except ValueError as exc:
        raise SystemExit(f"error: {exc}")


def _config(args):
    overrides = {
        "output_dir": args.output_dir,
        "cache_dir": args.cache_dir,
        "provider_id": getattr(args, "provider", None),
        "iqr_multiplier": getattr(args, "iqr_multiplier", None),
        "max_per_keyword": getattr(args, "max_per_keyword", None),
    }
    if getattr(args, "no_pdf", False):
        overrides["fetch_pdfs"] = False
    return load_config(args.config, overrides=overrides)


def _pipeline(args, cfg):
    return build_pipeline(cfg, offline=args.offline, fixtures=args.fixtures,
                          use_cache=not args.no_cache)


def cmd_review(args) -> int:
    query = _query(args)
    cfg = _config(args)
    t0 = time.perf_counter()
    bundle = run_pipeline(query, cfg, offline=args.offline, fixtures=args.fixtures,
                          use_cache=not args.no_cache)
    print(f"{len(bundle.corpus)} candidates, {len(bundle.retained)} retained "
          f"(threshold {bundle.stats.threshold:.4f}); outputs in {cfg.output_dir} "
          f"[{time.perf_counter() - t0:.1f}s]")
    return 0


def cmd_fetch(args) -> int:
    cfg = _config(args)
    pipe = _pipeline(args, cfg)
    with pipe.http:
        keywords = args.keyword or pipe.keywords(_query(args))
        corpus = pipe.dedup(pipe.fetch(keywords))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "keywords.json").write_text(json.dumps(keywords, indent=2) + "\n", encoding="utf-8")
    path = write_papers(corpus, out)
    print(f"{len(corpus)} unique papers from {len(keywords)} keywords -> {path}")
    return 0


def cmd_filter(args) -> int:
    query = _query(args)
    cfg = _config(args)
    corpus = read_papers(args.corpus)
    pipe = _pipeline(args, cfg)
    with pipe.http:
        scored = pipe.score(query, corpus)
    stats, kept = pipe.filter(scored)
    write_scores(scored, stats, Path(cfg.output_dir), cfg.provider_id, cfg.iqr_multiplier)
    print(f"{len(kept)}/{len(scored)} retained at threshold {stats.threshold:.4f}")
    return 0


def cmd_eval(args) -> int:
    query = _query(args)
    cfg = _config(args)
    corpus = read_papers(args.corpus)
    descriptors = []
    for pid in [p.strip() for p in args.providers.split(",") if p.strip()]:
        try:
            descriptors.append(ProviderDescriptor.resolve(pid, cfg.embedding_api_url))
        except ValueError as exc:
            raise SystemExit(f"error: {exc}")
    pipe = _pipeline(args, cfg)
    with pipe.http:
        rows, scores = compare_providers(query, corpus, descriptors, cfg.iqr_multiplier,
                                         pipe.remote)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_bench_csv(rows, out / "bench.csv")
    emit_plot_data(rows, scores, out)
    for r in rows:
        if r.failed:
            print(f"{r.provider_id:10s} FAILED: {r.error}")
        else:
            print(f"{r.provider_id:10s} threshold={r.threshold:.3f} skew={r.skewness:.3f} "
                  f"range=[{r.min:.3f}, {r.max:.3f}] retained={r.retained_count}/{r.n}")
    return 0


def cmd_bibtex(args) -> int:
    cfg = _config(args)
    corpus = read_papers(args.corpus)
    if args.ids:
        wanted = {i.strip() for i in args.ids.split(",")}
        corpus = [p for p in corpus if p.arxiv_id in wanted]
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "refs.bib").write_text(render_bibliography(make_bibliography(corpus)), encoding="utf-8")
    print(f"{len(corpus)} entries -> {out / 'refs.bib'}")
    return 0


COMMANDS = {"review": cmd_review, "fetch": cmd_fetch, "filter": cmd_filter,
            "eval": cmd_eval, "bibtex": cmd_bibtex}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except LitSieveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
