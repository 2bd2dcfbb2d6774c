"""Okapi BM25 over question and answer fields with a shared field weight.

Per field, with n docs and df(t) the number of docs whose field contains t:

    idf(t)          = ln(1 + (n - df(t) + 0.5) / (df(t) + 0.5))
    contrib(t, doc) = idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
    score           = w * question_score + (1 - w) * answer_score

Each field keeps its own average length: questions and answers differ in
length by more than an order of magnitude, and a shared avgdl would distort
the length normalization. Repeated query tokens contribute once per
occurrence. The chosen idf is nonnegative, so scores are nonnegative and
dropping zero-score docs from rankings is safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import FaqDoc
from .errors import ValidationError
from .ranking import RankedList, sort_pairs
from .textproc import TokenStream, tokenize

FIELDS = ("question", "answer")


@dataclass(frozen=True)
class FieldStats:
    """Inverted postings and length statistics for one field.

    postings maps a term to three parallel arrays over the docs containing it,
    ordered by ascending doc id: row numbers, term frequencies, and the fully
    precomputed per-doc score contributions (idf and saturation folded in,
    both are build-time constants).
    """

    postings: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]
    doc_len: np.ndarray
    avgdl: float
    df: dict[str, int]

    def scores(self, query: TokenStream) -> np.ndarray:
        total = np.zeros(len(self.doc_len), dtype=np.float64)
        for term in query:
            hit = self.postings.get(term)
            if hit is not None:
                rows, _, contrib = hit
                total[rows] += contrib
        return total


@dataclass(frozen=True)
class Bm25Index:
    doc_ids: tuple[str, ...]
    fields: dict[str, FieldStats]
    n_docs: int
    k1: float
    b: float

    def row_of(self, doc_id: str) -> int:
        try:
            return self._row_index[doc_id]
        except AttributeError:
            object.__setattr__(self, "_row_index", {d: i for i, d in enumerate(self.doc_ids)})
            return self._row_index[doc_id]


def _build_field(texts: list[str], doc_ids: tuple[str, ...], k1: float, b: float) -> FieldStats:
    doc_len = np.array([len(tokenize(t)) for t in texts], dtype=np.float64)
    n = len(texts)
    avgdl = float(doc_len.sum() / n)
    by_term: dict[str, list[tuple[str, int, int]]] = {}
    for row, text in enumerate(texts):
        counts: dict[str, int] = {}
        for token in tokenize(text):
            counts[token] = counts.get(token, 0) + 1
        for term, tf in counts.items():
            by_term.setdefault(term, []).append((doc_ids[row], row, tf))

    postings: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    df: dict[str, int] = {}
    for term, entries in by_term.items():
        entries.sort()  # ascending doc id
        df[term] = len(entries)
        idf = math.log(1.0 + (n - df[term] + 0.5) / (df[term] + 0.5))
        rows = np.array([row for _, row, _ in entries], dtype=np.intp)
        tfs = np.array([tf for _, _, tf in entries], dtype=np.float64)
        if avgdl > 0.0:
            denom = tfs + k1 * (1.0 - b + b * doc_len[rows] / avgdl)
            contrib = idf * tfs * (k1 + 1.0) / denom
        else:
            contrib = np.zeros_like(tfs)
        postings[term] = (rows, tfs, contrib)
    return FieldStats(postings=postings, doc_len=doc_len, avgdl=avgdl, df=df)


def build_bm25(corpus: list[FaqDoc], k1: float = 1.2, b: float = 0.75) -> Bm25Index:
    if not corpus:
        raise ValidationError("cannot build a BM25 index on an empty corpus")
    if k1 <= 0.0:
        raise ValidationError(f"k1 must be positive, got {k1}")
    if not 0.0 <= b <= 1.0:
        raise ValidationError(f"b must be in [0, 1], got {b}")
    doc_ids = tuple(doc.id for doc in corpus)
    fields = {
        "question": _build_field([d.question for d in corpus], doc_ids, k1, b),
        "answer": _build_field([d.answer for d in corpus], doc_ids, k1, b),
    }
    return Bm25Index(doc_ids=doc_ids, fields=fields, n_docs=len(corpus), k1=k1, b=b)


def score_bm25(index: Bm25Index, query: TokenStream, doc_id: str, w: float) -> float:
    """w-weighted two-field BM25 for one document."""
    if not 0.0 <= w <= 1.0:
        raise ValidationError(f"w must be in [0, 1], got {w}")
    try:
        row = index.row_of(doc_id)
    except KeyError:
        raise ValidationError(f"unknown doc id {doc_id!r}") from None
    per_field = {}
    for name, stats in index.fields.items():
        score = 0.0
        for term in query:
            hit = stats.postings.get(term)
            if hit is None:
                continue
            rows, _, contrib = hit
            # rows are ordered by doc id, not row number, so scan rather than bisect
            matches = np.nonzero(rows == row)[0]
            if matches.size:
                score += float(contrib[matches[0]])
        per_field[name] = score
    return w * per_field["question"] + (1.0 - w) * per_field["answer"]


def combined_scores(index: Bm25Index, query: TokenStream, w: float) -> np.ndarray:
    """w-weighted scores for every document at once."""
    return w * index.fields["question"].scores(query) + (1.0 - w) * index.fields["answer"].scores(query)


def rank_bm25(index: Bm25Index, query: TokenStream, w: float, top_n: int,
              query_id: str = "") -> RankedList:
    """Descending score, ties by ascending doc id, zero-score docs excluded."""
    if top_n < 1:
        raise ValidationError(f"top_n must be >= 1, got {top_n}")
    if not 0.0 <= w <= 1.0:
        raise ValidationError(f"w must be in [0, 1], got {w}")
    scores = combined_scores(index, query, w)
    pairs = sort_pairs({index.doc_ids[i]: float(scores[i]) for i in range(index.n_docs)},
                       drop_zero=True)
    return RankedList(query_id=query_id, pairs=tuple(pairs[:top_n]), ranker="bm25")
