"""Dense question embeddings: interchange file loading, providers, exact KNN.

The engine never runs a neural encoder itself. Document vectors arrive through
an interchange file (typically produced by the embed_export tool) or from the
built-in hashing fallback provider, and queries are embedded either by that
fallback or by vectors supplied alongside the query.

Interchange file format (JSON Lines, UTF-8):

    {"dim": 384, "provider": "some-encoder-tag"}        <- header, first line
    {"id": "faq-1", "vector": [0.12, -0.03, ...]}       <- one line per doc

Vectors are re-normalized to unit length on load, so modest decimal rounding
in the file is harmless; a dimension mismatch or non-finite value is fatal.

Search is exhaustive cosine KNN. At the corpus scales this engine targets
(thousands of docs) a matrix-vector product is faster and simpler than any
approximate index, and it is exact, which the rest of the pipeline's
determinism guarantees rely on.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass

import numpy as np

from .corpus import FaqDoc
from .errors import ValidationError
from .ranking import RankedList, sort_pairs
from .textproc import tokenize

_HASH_TAG = re.compile(r"^hashproj-(\d+)$")


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Unit-normalized question embeddings, one row per doc in corpus order."""

    doc_ids: tuple[str, ...]
    matrix: np.ndarray  # shape (n_docs, dim), float64, rows L2-normalized
    provider: str

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return int(self.matrix.shape[0])

    def row(self, i: int) -> np.ndarray:
        return self.matrix[i]


def _normalize_rows(matrix: np.ndarray, where: str) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1)
    zero = np.nonzero(norms == 0.0)[0]
    if zero.size:
        raise ValidationError(f"{where}: vector for row {int(zero[0])} has zero norm")
    return matrix / norms[:, None]


def load_embeddings(path, corpus: list[FaqDoc]) -> EmbeddingMatrix:
    """Read an interchange file and align its rows to the corpus order.

    Extra ids in the file are ignored; a missing corpus id is an error.
    """
    header = None
    vectors: dict[str, list[float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{where}: malformed record ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise ValidationError(f"{where}: record must be a JSON object")
            if header is None:
                if set(record) != {"dim", "provider"}:
                    raise ValidationError(f"{where}: first record must be a header with dim and provider")
                if not isinstance(record["dim"], int) or record["dim"] < 1:
                    raise ValidationError(f"{where}: dim must be a positive integer")
                if not isinstance(record["provider"], str) or not record["provider"]:
                    raise ValidationError(f"{where}: provider must be a nonempty string")
                header = record
                continue
            if set(record) != {"id", "vector"}:
                raise ValidationError(f"{where}: embedding record must have exactly id and vector")
            doc_id, vector = record["id"], record["vector"]
            if not isinstance(doc_id, str) or not doc_id:
                raise ValidationError(f"{where}: id must be a nonempty string")
            if doc_id in vectors:
                raise ValidationError(f"{where}: duplicate id {doc_id!r}")
            if not isinstance(vector, list) or len(vector) != header["dim"]:
                raise ValidationError(
                    f"{where}: vector for {doc_id!r} has length "
                    f"{len(vector) if isinstance(vector, list) else 'N/A'}, header says {header['dim']}"
                )
            values = [float(x) for x in vector]
            if not all(np.isfinite(values)):
                raise ValidationError(f"{where}: vector for {doc_id!r} contains a non-finite value")
            vectors[doc_id] = values
    if header is None:
        raise ValidationError(f"{path}: no header record found")
    missing = [doc.id for doc in corpus if doc.id not in vectors]
    if missing:
        raise ValidationError(f"{path}: missing embedding for doc id {missing[0]!r}"
                              + (f" (and {len(missing) - 1} more)" if len(missing) > 1 else ""))
    matrix = np.array([vectors[doc.id] for doc in corpus], dtype=np.float64)
    matrix = _normalize_rows(matrix, str(path))
    return EmbeddingMatrix(doc_ids=tuple(d.id for d in corpus), matrix=matrix,
                           provider=header["provider"])


def matrix_from_provider(provider: "EmbeddingProvider", corpus: list[FaqDoc]) -> EmbeddingMatrix:
    """Embed every question with the given provider."""
    rows = np.array([provider.embed(doc.question) for doc in corpus], dtype=np.float64)
    rows = _normalize_rows(rows, provider.tag)
    return EmbeddingMatrix(doc_ids=tuple(d.id for d in corpus), matrix=rows, provider=provider.tag)


def write_embeddings(path, matrix: EmbeddingMatrix) -> None:
    """Write the interchange format. Inverse of load_embeddings up to rounding."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"dim": matrix.dim, "provider": matrix.provider},
                            sort_keys=True, separators=(",", ":")))
        fh.write("\n")
        for i, doc_id in enumerate(matrix.doc_ids):
            record = {"id": doc_id, "vector": [float(x) for x in matrix.matrix[i]]}
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


# --- providers --------------------------------------------------------------

class EmbeddingProvider:
    """Anything that deterministically turns text into a fixed-dim vector."""

    tag: str
    dim: int

    def embed(self, text: str) -> np.ndarray:
        raise NotImplementedError


def hash_embed(text: str, dim: int) -> np.ndarray:
    """Deterministic hashed projection, the model-free fallback.

    Every token and adjacent token bigram hashes to one signed coordinate;
    the signed counts are summed and unit-normalized. Empty (or token-free)
    text maps to the first basis vector. This is plumbing for tests and smoke
    runs, not a semantic embedding, and its provider tag says so.
    """
    if dim < 8:
        raise ValidationError(f"hash_embed needs dim >= 8, got {dim}")
    tokens = list(tokenize(text))
    vec = np.zeros(dim, dtype=np.float64)
    features = tokens + [a + "\x1f" + b for a, b in zip(tokens, tokens[1:])]
    if not features:
        vec[0] = 1.0
        return vec
    for feature in features:
        digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=9).digest()
        coord = int.from_bytes(digest[:8], "big") % dim
        sign = 1.0 if digest[8] & 1 else -1.0
        vec[coord] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        # signed counts can cancel exactly; fall back to the basis vector
        vec[:] = 0.0
        vec[0] = 1.0
        return vec
    return vec / norm


class HashProvider(EmbeddingProvider):
    """hash_embed wrapped in the provider interface, tagged hashproj-<dim>."""

    def __init__(self, dim: int):
        if dim < 8:
            raise ValidationError(f"hash provider needs dim >= 8, got {dim}")
        self.dim = dim
        self.tag = f"hashproj-{dim}"

    def embed(self, text: str) -> np.ndarray:
        return hash_embed(text, self.dim)


def provider_from_tag(tag: str) -> EmbeddingProvider | None:
    """Reconstruct a built-in provider from its tag, None for external ones."""
    match = _HASH_TAG.match(tag)
    if match:
        return HashProvider(int(match.group(1)))
    return None


# --- search ------------------------------------------------------------------

def knn_dense(matrix: EmbeddingMatrix, query_vec: np.ndarray, top_n: int,
              query_id: str = "") -> RankedList:
    """Exact exhaustive cosine KNN; ties by ascending doc id."""
    if top_n < 1:
        raise ValidationError(f"top_n must be >= 1, got {top_n}")
    scores = cosine_scores(matrix, query_vec)
    pairs = sort_pairs({matrix.doc_ids[i]: float(scores[i]) for i in range(len(matrix))})
    return RankedList(query_id=query_id, pairs=tuple(pairs[:top_n]), ranker="sbert")


def cosine_scores(matrix: EmbeddingMatrix, query_vec: np.ndarray) -> np.ndarray:
    """Cosine of the query against every row; a zero query scores 0 everywhere."""
    q = np.asarray(query_vec, dtype=np.float64)
    if q.shape != (matrix.dim,):
        raise ValidationError(f"query vector has shape {q.shape}, expected ({matrix.dim},)")
    if not np.all(np.isfinite(q)):
        raise ValidationError("query vector contains a non-finite value")
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        return np.zeros(len(matrix), dtype=np.float64)
    return matrix.matrix @ (q / norm)
