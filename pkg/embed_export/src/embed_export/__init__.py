"""Batch encoding of FAQ corpus questions into the embedding interchange file.

The output is consumed by the retrieval engine purely through the file
format: a JSON header line {"dim": D, "provider": tag} followed by one
{"id", "vector"} record per document. This package never imports the engine.
"""

from .exporter import (
    Encoder,
    ExportError,
    ExportManifest,
    SbertEncoder,
    encode_queries,
    export_embeddings,
    load_corpus_questions,
    read_manifest,
)

__version__ = "0.1.0"

__all__ = [
    "Encoder",
    "ExportError",
    "ExportManifest",
    "SbertEncoder",
    "encode_queries",
    "export_embeddings",
    "load_corpus_questions",
    "read_manifest",
    "__version__",
]
