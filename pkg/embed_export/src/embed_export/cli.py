"""embed-export command line.

Two subcommands: ``corpus`` encodes every question in a JSONL corpus,
``queries`` encodes an ad-hoc query file. Both emit the interchange format
plus, for corpora, a manifest sidecar.
"""

import argparse
import sys

from . import __version__
from .exporter import (
    DEFAULT_BATCH_SIZE,
    ExportError,
    SbertEncoder,
    encode_queries,
    export_embeddings,
    manifest_path,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ERROR = 3
EXIT_IO = 4

DEFAULT_MODEL = "sentence-transformers/all-MiniLM-L6-v2"


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="Encode FAQ questions into the embedding interchange format.")
    parser.add_argument("--version", action="version",
                        version=f"embed-export {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    corpus = sub.add_parser("corpus", help="encode every corpus question")
    corpus.add_argument("--corpus", required=True, help="JSONL corpus path")
    corpus.add_argument("--model", default=DEFAULT_MODEL,
                        help="sentence encoder checkpoint id or local path")
    corpus.add_argument("--out", required=True, help="interchange file to write")
    corpus.add_argument("--batch-size", type=int, default=DEFAULT_BATCH_SIZE)

    queries = sub.add_parser("queries", help="encode an ad-hoc query set")
    queries.add_argument("--queries-file", required=True,
                         help="one query per line, 'id<TAB>text' or bare text")
    queries.add_argument("--model", default=DEFAULT_MODEL)
    queries.add_argument("--out", required=True)
    queries.add_argument("--batch-size", type=int, default=DEFAULT_BATCH_SIZE)
    return parser


def _read_queries(path) -> list[tuple[str, str]]:
    queries: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "\t" in line:
                query_id, text = line.split("\t", 1)
            else:
                query_id, text = f"q{len(queries) + 1}", line
            queries.append((query_id.strip(), text.strip()))
    if not queries:
        raise ExportError(f"{path}: no queries found")
    return queries


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        encoder = SbertEncoder(args.model, batch_size=args.batch_size)
        if args.command == "corpus":
            manifest = export_embeddings(args.corpus, encoder, args.out,
                                         batch_size=args.batch_size)
            print(f"encoded {manifest.count} questions (dim={manifest.dim}, "
                  f"model={manifest.model}) into {args.out}")
            print(f"manifest: {manifest_path(args.out)}")
        else:
            count = encode_queries(_read_queries(args.queries_file), encoder,
                                   args.out, batch_size=args.batch_size)
            print(f"encoded {count} queries into {args.out}")
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
