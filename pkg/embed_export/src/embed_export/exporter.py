"""Question encoding and interchange-file serialization.

Only the question field of each document is encoded; answers are carried in
the corpus but never reach the encoder. Emitted vectors are unit-normalized,
so downstream cosine scores reduce to dot products. A manifest sidecar
records what produced the file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from typing import Protocol, runtime_checkable

import numpy as np

DEFAULT_BATCH_SIZE = 32
NORM_TOLERANCE = 1e-6


class ExportError(Exception):
    """Raised for anything the caller can fix: bad corpus, bad model, bad vectors."""


@runtime_checkable
class Encoder(Protocol):
    """Anything that turns a batch of texts into a 2-d float array."""

    model_id: str

    def encode(self, texts: list[str]) -> np.ndarray: ...


class SbertEncoder:
    """Wrapper over a sentence-transformers checkpoint.

    The import and the model load both happen lazily so that corpus handling
    and the stub-driven tests never touch torch.
    """

    def __init__(self, model_id: str, batch_size: int = DEFAULT_BATCH_SIZE):
        self.model_id = model_id
        self.batch_size = batch_size
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ExportError(f"sentence-transformers is not installed: {exc}") from exc
        try:
            self._model = SentenceTransformer(model_id)
        except Exception as exc:
            raise ExportError(f"could not load model {model_id!r}: {exc}") from exc

    def encode(self, texts: list[str]) -> np.ndarray:
        # encode() runs the model in eval mode with no dropout, so repeated
        # calls on the same inputs are deterministic.
        return np.asarray(self._model.encode(
            texts, batch_size=self.batch_size, convert_to_numpy=True,
            show_progress_bar=False))


@dataclass(frozen=True)
class ExportManifest:
    model: str
    dim: int
    corpus_sha256: str
    count: int
    normalized: bool

    def validate(self) -> None:
        if self.count < 1:
            raise ExportError("manifest: record count must be positive")
        if self.dim < 1:
            raise ExportError("manifest: dim must be positive")


def load_corpus_questions(path) -> list[tuple[str, str]]:
    """Read (id, question) pairs from a JSONL corpus, preserving file order.

    Extra record fields (answer, category, source) are ignored; this tool
    consumes only what it encodes.
    """
    pairs: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{where}: malformed JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise ExportError(f"{where}: expected an object")
            doc_id = record.get("id")
            question = record.get("question")
            if not isinstance(doc_id, str) or not doc_id:
                raise ExportError(f"{where}: missing or empty id")
            if not isinstance(question, str) or not question:
                raise ExportError(f"{where}: doc {doc_id!r}: missing or empty question")
            if doc_id in seen:
                raise ExportError(f"{where}: duplicate id {doc_id!r}")
            seen.add(doc_id)
            pairs.append((doc_id, question))
    if not pairs:
        raise ExportError(f"{path}: corpus is empty")
    return pairs


def _corpus_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _encode_pairs(pairs: list[tuple[str, str]], encoder: Encoder,
                  batch_size: int) -> np.ndarray:
    rows: list[np.ndarray] = []
    dim: int | None = None
    for start in range(0, len(pairs), batch_size):
        batch = pairs[start:start + batch_size]
        try:
            encoded = np.asarray(encoder.encode([text for _, text in batch]),
                                 dtype=np.float64)
        except ExportError:
            raise
        except Exception as exc:
            raise ExportError(
                f"encoding failed on the batch starting at doc {batch[0][0]!r}: {exc}"
            ) from exc
        if encoded.ndim != 2 or encoded.shape[0] != len(batch):
            raise ExportError(
                f"encoder returned shape {encoded.shape} for a batch of {len(batch)}")
        if dim is None:
            dim = int(encoded.shape[1])
        elif int(encoded.shape[1]) != dim:
            raise ExportError(
                f"encoder changed dimension from {dim} to {encoded.shape[1]}")
        for (doc_id, _), row in zip(batch, encoded):
            if not np.all(np.isfinite(row)):
                raise ExportError(f"doc {doc_id!r}: encoder produced a non-finite value")
            norm = float(np.linalg.norm(row))
            if norm == 0.0:
                raise ExportError(f"doc {doc_id!r}: encoder produced a zero vector")
            rows.append(row / norm)
    return np.vstack(rows)


def _write_interchange(path, ids: list[str], matrix: np.ndarray, provider: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"dim": int(matrix.shape[1]), "provider": provider}
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
        for doc_id, row in zip(ids, matrix):
            record = {"id": doc_id, "vector": [float(x) for x in row]}
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")


def manifest_path(out_path) -> str:
    return f"{out_path}.manifest.json"


def export_embeddings(corpus_path, encoder: Encoder, out_path,
                      batch_size: int = DEFAULT_BATCH_SIZE) -> ExportManifest:
    """Encode every corpus question and write the interchange file.

    Returns the manifest, which is also written next to the output as
    ``<out-path>.manifest.json``.
    """
    if batch_size < 1:
        raise ExportError(f"batch size must be positive, got {batch_size}")
    pairs = load_corpus_questions(corpus_path)
    matrix = _encode_pairs(pairs, encoder, batch_size)
    _write_interchange(out_path, [doc_id for doc_id, _ in pairs], matrix,
                       provider=encoder.model_id)
    manifest = ExportManifest(
        model=encoder.model_id,
        dim=int(matrix.shape[1]),
        corpus_sha256=_corpus_sha256(corpus_path),
        count=len(pairs),
        normalized=True,
    )
    manifest.validate()
    with open(manifest_path(out_path), "w", encoding="utf-8") as fh:
        json.dump(asdict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def encode_queries(queries: list[tuple[str, str]], encoder: Encoder, out_path,
                   batch_size: int = DEFAULT_BATCH_SIZE) -> int:
    """Encode ad-hoc (query-id, text) pairs into the same interchange format.

    The engine's query-embeddings flag reads exactly this file, keyed by
    query id. Returns the number of records written.
    """
    if not queries:
        raise ExportError("no queries to encode")
    seen: set[str] = set()
    for query_id, text in queries:
        if not query_id or not text:
            raise ExportError(f"query {query_id!r}: id and text must be nonempty")
        if query_id in seen:
            raise ExportError(f"duplicate query id {query_id!r}")
        seen.add(query_id)
    matrix = _encode_pairs(queries, encoder, batch_size)
    _write_interchange(out_path, [query_id for query_id, _ in queries], matrix,
                       provider=encoder.model_id)
    return len(queries)


def read_manifest(path) -> ExportManifest:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        manifest = ExportManifest(**raw)
    except TypeError as exc:
        raise ExportError(f"{path}: bad manifest ({exc})") from None
    manifest.validate()
    return manifest
