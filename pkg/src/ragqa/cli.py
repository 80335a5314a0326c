"""Command-line entry point: crawl, ingest, index, query, eval, iaa.

Exit codes: 0 success, 1 usage error, 2 data error, 3 provider error.
Provider auth (when the configured endpoints require it) comes from the
RAGQA_API_TOKEN environment variable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .annotation import compute_iaa, read_iaa_pairs, read_qa_pairs
from .crawler import DEFAULT_BANNED_TITLES, CrawlSpec, crawl
from .errors import DataError, ProviderError
from .ingest import load_documents, write_corpus
from .metrics import render_report_table
from .pipeline import Pipeline, build_indexes, load_config

USAGE_EXIT = 1
DATA_EXIT = 2
PROVIDER_EXIT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage failures exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _add_config_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="pipeline config JSON file")
    sub.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        dest="overrides",
        help="override a config key (dotted path, JSON value)",
    )
    sub.add_argument(
        "--offline",
        action="store_true",
        help="use the bundled deterministic providers instead of HTTP",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ragqa", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    p_crawl = commands.add_parser("crawl", help="BFS-crawl seed sites into a corpus")
    p_crawl.add_argument("spec", nargs="?", help="crawl spec JSON file")
    p_crawl.add_argument("--seed", action="append", default=[], help="seed URL")
    p_crawl.add_argument("--include-keyword", action="append", default=[])
    p_crawl.add_argument("--exclude-keyword", action="append", default=[])
    p_crawl.add_argument("--max-pages", type=int)
    p_crawl.add_argument("--max-depth", type=int)
    p_crawl.add_argument("--per-host-delay-ms", type=int)
    p_crawl.add_argument("--min-content-chars", type=int)
    p_crawl.add_argument("--banned-title", action="append", default=[])
    p_crawl.add_argument("--category")
    p_crawl.add_argument("--no-robots", action="store_true")
    p_crawl.add_argument("--out", default="corpus.jsonl")
    p_crawl.set_defaults(func=cmd_crawl)

    p_ingest = commands.add_parser("ingest", help="load local files into a corpus")
    p_ingest.add_argument("paths", nargs="+")
    p_ingest.add_argument("--category", default="other")
    p_ingest.add_argument("--out", default="corpus.jsonl")
    p_ingest.set_defaults(func=cmd_ingest)

    p_index = commands.add_parser("index", help="build lexical + vector indexes")
    p_index.add_argument("corpus")
    _add_config_args(p_index)
    p_index.set_defaults(func=cmd_index)

    p_query = commands.add_parser("query", help="answer one question")
    p_query.add_argument("question")
    _add_config_args(p_query)
    p_query.add_argument("--json", action="store_true", help="machine-readable output")
    p_query.set_defaults(func=cmd_query)

    p_eval = commands.add_parser("eval", help="evaluate a QA set end to end")
    p_eval.add_argument("qa_path")
    _add_config_args(p_eval)
    p_eval.add_argument("--out", default="report", help="report path prefix")
    p_eval.set_defaults(func=cmd_eval)

    p_iaa = commands.add_parser("iaa", help="inter-annotator agreement of answer pairs")
    p_iaa.add_argument("pairs_path")
    p_iaa.set_defaults(func=cmd_iaa)

    return parser


def _crawl_spec_from_args(args) -> CrawlSpec:
    spec_dict: dict = {}
    if args.spec:
        try:
            spec_dict = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read crawl spec {args.spec}: {exc}") from exc
    if args.seed:
        spec_dict["seeds"] = list(spec_dict.get("seeds", [])) + args.seed
    if args.include_keyword:
        spec_dict["include_keywords"] = args.include_keyword
    if args.exclude_keyword:
        spec_dict["exclude_keywords"] = args.exclude_keyword
    if args.banned_title:
        spec_dict["banned_titles"] = args.banned_title
    for flag, key in (
        ("max_pages", "max_pages"),
        ("max_depth", "max_depth"),
        ("per_host_delay_ms", "per_host_delay_ms"),
        ("min_content_chars", "min_content_chars"),
        ("category", "category"),
    ):
        value = getattr(args, flag)
        if value is not None:
            spec_dict[key] = value
    if args.no_robots:
        spec_dict["respect_robots"] = False
    known = CrawlSpec.__dataclass_fields__
    unknown = set(spec_dict) - set(known)
    if unknown:
        raise DataError(f"unknown crawl spec fields: {sorted(unknown)}")
    for key in ("seeds", "include_keywords", "exclude_keywords", "banned_titles"):
        if key in spec_dict:
            spec_dict[key] = tuple(spec_dict[key])
    if "banned_titles" not in spec_dict:
        spec_dict["banned_titles"] = DEFAULT_BANNED_TITLES
    return CrawlSpec(**spec_dict)


def cmd_crawl(args) -> int:
    spec = _crawl_spec_from_args(args)
    documents, report = crawl(spec)
    write_corpus(documents, args.out)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_ingest(args) -> int:
    documents, report = load_documents(args.paths, default_category=args.category)
    write_corpus(documents, args.out)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_index(args) -> int:
    cfg = load_config(args.config, args.overrides)
    manifest = build_indexes(args.corpus, cfg, offline=args.offline)
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return 0


def cmd_query(args) -> int:
    cfg = load_config(args.config, args.overrides)
    pipeline = Pipeline(cfg, offline=args.offline)
    answer, hits = pipeline.answer(args.question)
    if args.json:
        print(
            json.dumps(
                {
                    "answer": answer.text,
                    "mode": answer.mode,
                    "provenance": list(answer.provenance),
                    "contexts": [
                        {
                            "chunk_id": h.chunk_id,
                            "score": h.score,
                            "rank": h.rank,
                            "stage": h.stage,
                            "text": pipeline.chunk(h.chunk_id).text,
                        }
                        for h in hits
                    ],
                },
                ensure_ascii=False,
            )
        )
        return 0
    print(f"answer: {answer.text}")
    print(f"mode: {answer.mode}")
    if hits:
        print("contexts:")
        for h in hits:
            text = pipeline.chunk(h.chunk_id).text
            preview = text[:160] + ("..." if len(text) > 160 else "")
            print(f"  {h.rank}. [{h.stage}] score={h.score:.6f} chunk={h.chunk_id}")
            print(f"     {preview}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config, args.overrides)
    qa_pairs = read_qa_pairs(args.qa_path)
    if not qa_pairs:
        raise DataError(f"no qa pairs in {args.qa_path}")
    pipeline = Pipeline(cfg, offline=args.offline)
    report = pipeline.evaluate(qa_pairs)
    json_path = Path(f"{args.out}.json")
    table_path = Path(f"{args.out}.txt")
    json_path.write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    table = render_report_table(report)
    table_path.write_text(table + "\n", encoding="utf-8")
    print(table)
    return 0


def cmd_iaa(args) -> int:
    pairs = read_iaa_pairs(args.pairs_path)
    print(json.dumps({"iaa": compute_iaa(pairs), "pairs": len(pairs)}))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return PROVIDER_EXIT


if __name__ == "__main__":
    sys.exit(main())
