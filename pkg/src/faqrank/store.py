"""Index directory persistence with a checksummed manifest.

Layout of an index directory:

    manifest.json      format/engine versions, params, provider, checksums
    corpus.jsonl       corpus snapshot (corpus file format)
    embeddings.jsonl   dense matrix (embedding interchange format)
    tfidf.json         vocabulary with idf plus per-field document vectors
    bm25.json          per-field postings and length statistics

All artifacts are canonical JSON: sorted keys, compact separators, floats via
repr, no timestamps. Rebuilding from identical inputs therefore produces
byte-identical files, and the manifest's sha256 checksums catch any
modification on open. The manifest is written last and is the only file not
covered by a checksum.
"""

from __future__ import annotations

import hashlib
import json
import math
import os

import numpy as np

from . import __version__
from .bm25 import Bm25Index, FieldStats
from .corpus import corpus_line, load_corpus
from .dense import load_embeddings, write_embeddings
from .errors import ValidationError
from .fusion import HybridIndex
from .tfidf import FieldVectors, SparseVec, Vocabulary

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
ARTIFACTS = ("corpus.jsonl", "embeddings.jsonl", "tfidf.json", "bm25.json")
LOCK = ".build.lock"


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _vec_pairs(vec: SparseVec) -> list:
    return [[int(i), float(w)] for i, w in zip(vec.indices, vec.weights)]


def _tfidf_payload(index: HybridIndex) -> dict:
    vocab = index.vocab
    terms = sorted(vocab.index, key=vocab.index.get)
    return {
        "format_version": FORMAT_VERSION,
        "vocab": [[t, float(vocab.idf[vocab.index[t]])] for t in terms],
        "question": [_vec_pairs(v) for v in index.question_vecs.vecs],
        "answer": [_vec_pairs(v) for v in index.answer_vecs.vecs],
    }


def _bm25_payload(index: Bm25Index) -> dict:
    fields = {}
    for name, stats in index.fields.items():
        fields[name] = {
            "avgdl": float(stats.avgdl),
            "doc_len": [int(x) for x in stats.doc_len],
            "postings": {
                term: [[int(r), int(tf)] for r, tf in zip(rows, tfs)]
                for term, (rows, tfs, _) in stats.postings.items()
            },
        }
    return {
        "format_version": FORMAT_VERSION,
        "k1": float(index.k1),
        "b": float(index.b),
        "fields": fields,
    }


def save_index(out_dir, index: HybridIndex) -> None:
    """Write all artifacts plus the manifest. Exclusive via a lock file."""
    os.makedirs(out_dir, exist_ok=True)
    lock_path = os.path.join(out_dir, LOCK)
    try:
        lock_fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ValidationError(
            f"{out_dir}: another build holds {LOCK} (remove it if that build is dead)") from None
    try:
        with open(os.path.join(out_dir, "corpus.jsonl"), "w", encoding="utf-8") as fh:
            for doc in index.docs:
                fh.write(corpus_line(doc))
                fh.write("\n")
        write_embeddings(os.path.join(out_dir, "embeddings.jsonl"), index.embeddings)
        with open(os.path.join(out_dir, "tfidf.json"), "w", encoding="utf-8") as fh:
            fh.write(_dumps(_tfidf_payload(index)))
            fh.write("\n")
        with open(os.path.join(out_dir, "bm25.json"), "w", encoding="utf-8") as fh:
            fh.write(_dumps(_bm25_payload(index.bm25)))
            fh.write("\n")
        manifest = {
            "format_version": FORMAT_VERSION,
            "engine_version": __version__,
            "n_docs": len(index),
            "dim": index.embeddings.dim,
            "provider": index.embeddings.provider,
            "bm25": {"k1": float(index.bm25.k1), "b": float(index.bm25.b)},
            "checksums": {name: _sha256(os.path.join(out_dir, name)) for name in ARTIFACTS},
        }
        with open(os.path.join(out_dir, MANIFEST), "w", encoding="utf-8") as fh:
            fh.write(_dumps(manifest))
            fh.write("\n")
    finally:
        os.close(lock_fd)
        os.unlink(lock_path)


def _load_manifest(index_dir) -> dict:
    path = os.path.join(index_dir, MANIFEST)
    if not os.path.exists(path):
        raise ValidationError(f"{index_dir}: not an index directory ({MANIFEST} missing)")
    with open(path, encoding="utf-8") as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: malformed manifest ({exc.msg})") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValidationError(
            f"{path}: format_version {manifest.get('format_version')!r}, engine expects {FORMAT_VERSION}")
    if manifest.get("engine_version") != __version__:
        raise ValidationError(
            f"{path}: built by engine {manifest.get('engine_version')!r}, this is {__version__}; rebuild the index")
    for name in ARTIFACTS:
        recorded = manifest.get("checksums", {}).get(name)
        if recorded is None:
            raise ValidationError(f"{path}: checksum for {name} missing")
        actual = _sha256(os.path.join(index_dir, name))
        if actual != recorded:
            raise ValidationError(f"{index_dir}/{name}: checksum mismatch, artifact modified or corrupt")
    return manifest


def _load_tfidf(path, n_docs: int) -> tuple[Vocabulary, FieldVectors, FieldVectors]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported tfidf format version")
    vocab = Vocabulary(
        index={term: i for i, (term, _) in enumerate(payload["vocab"])},
        idf=tuple(idf for _, idf in payload["vocab"]),
    )

    def vectors(rows) -> FieldVectors:
        if len(rows) != n_docs:
            raise ValidationError(f"{path}: expected {n_docs} vectors, found {len(rows)}")
        out = []
        for pairs in rows:
            indices = tuple(int(i) for i, _ in pairs)
            weights = tuple(float(w) for _, w in pairs)
            out.append(SparseVec(indices, weights, 1.0 if indices else 0.0))
        return FieldVectors(out)

    return vocab, vectors(payload["question"]), vectors(payload["answer"])


def _load_bm25(path, doc_ids: tuple[str, ...]) -> Bm25Index:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported bm25 format version")
    k1 = float(payload["k1"])
    b = float(payload["b"])
    fields = {}
    for name, data in payload["fields"].items():
        doc_len = np.array(data["doc_len"], dtype=np.float64)
        avgdl = float(data["avgdl"])
        n = len(doc_ids)
        postings = {}
        df = {}
        for term, entries in data["postings"].items():
            rows = np.array([r for r, _ in entries], dtype=np.intp)
            tfs = np.array([tf for _, tf in entries], dtype=np.float64)
            df[term] = len(entries)
            idf = math.log(1.0 + (n - df[term] + 0.5) / (df[term] + 0.5))
            if avgdl > 0.0:
                denom = tfs + k1 * (1.0 - b + b * doc_len[rows] / avgdl)
                contrib = idf * tfs * (k1 + 1.0) / denom
            else:
                contrib = np.zeros_like(tfs)
            postings[term] = (rows, tfs, contrib)
        fields[name] = FieldStats(postings=postings, doc_len=doc_len, avgdl=avgdl, df=df)
    return Bm25Index(doc_ids=doc_ids, fields=fields, n_docs=len(doc_ids), k1=k1, b=b)


def load_index(index_dir) -> HybridIndex:
    """Open an index directory, verifying versions and checksums."""
    manifest = _load_manifest(index_dir)
    docs = load_corpus(os.path.join(index_dir, "corpus.jsonl"))
    if len(docs) != manifest["n_docs"]:
        raise ValidationError(f"{index_dir}: corpus snapshot has {len(docs)} docs, manifest says {manifest['n_docs']}")
    embeddings = load_embeddings(os.path.join(index_dir, "embeddings.jsonl"), docs)
    if embeddings.provider != manifest["provider"]:
        raise ValidationError(f"{index_dir}: embedding provider differs from manifest")
    if embeddings.dim != manifest["dim"]:
        raise ValidationError(f"{index_dir}: embedding dim differs from manifest")
    doc_ids = tuple(d.id for d in docs)
    vocab, question_vecs, answer_vecs = _load_tfidf(os.path.join(index_dir, "tfidf.json"), len(docs))
    bm25 = _load_bm25(os.path.join(index_dir, "bm25.json"), doc_ids)
    return HybridIndex(
        docs=tuple(docs), vocab=vocab,
        question_vecs=question_vecs, answer_vecs=answer_vecs,
        bm25=bm25, embeddings=embeddings,
        row_of={d.id: i for i, d in enumerate(docs)},
    )
