"""faqrank: hybrid lexical/semantic FAQ retrieval with an evaluation kit."""

__version__ = "0.1.0"

from .corpus import CorpusStats, FaqDoc, compute_stats, load_corpus, write_corpus
from .errors import ValidationError
from .textproc import TokenStream, tokenize
from .tfidf import SparseVec, Vocabulary, fit, score_tfidf, vectorize
from .bm25 import Bm25Index, build_bm25, rank_bm25, score_bm25
from .dense import (
    EmbeddingMatrix,
    EmbeddingProvider,
    HashProvider,
    hash_embed,
    knn_dense,
    load_embeddings,
    matrix_from_provider,
    write_embeddings,
)
from .ranking import FusedEntry, FusedResult, RankedList
from .fusion import (
    FusionParams,
    HybridIndex,
    build_index,
    damping,
    fuse_rrf,
    hybrid_score,
    retrieve,
)
from .evalkit import (
    MetricReport,
    Qrels,
    RunFile,
    format_run_lines,
    grid_search,
    metrics,
    parse_qrels,
    parse_run,
)
from .store import load_index, save_index

__all__ = [
    "__version__",
    "Bm25Index", "CorpusStats", "EmbeddingMatrix", "EmbeddingProvider", "FaqDoc",
    "FusedEntry", "FusedResult", "FusionParams", "HashProvider", "HybridIndex",
    "MetricReport", "Qrels", "RankedList", "RunFile", "SparseVec", "TokenStream",
    "ValidationError", "Vocabulary",
    "build_bm25", "build_index", "compute_stats", "damping", "fit",
    "format_run_lines", "fuse_rrf", "grid_search", "hash_embed", "hybrid_score",
    "knn_dense", "load_corpus", "load_embeddings", "load_index",
    "matrix_from_provider", "metrics", "parse_qrels", "parse_run", "rank_bm25",
    "retrieve", "save_index", "score_bm25", "score_tfidf", "tokenize",
    "vectorize", "write_corpus", "write_embeddings",
]
