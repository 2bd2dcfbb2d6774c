"""TF-IDF vectorization of question and answer fields and the weighted cosine.

One vocabulary is fitted over the question+answer concatenation of every doc,
with the smoothed inverse document frequency

    idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1

Vectors use raw term counts times idf and are L2-normalized at construction,
so the cosine of two stored vectors is their dot product. The query-document
score mixes the two fields with a single weight:

    w * cos(query, question_vec) + (1 - w) * cos(query, answer_vec)

The cosine of an all-zero vector (empty or fully out-of-vocabulary text) is
defined as 0, which makes unanswered docs contribute nothing on the answer
side instead of failing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import FaqDoc
from .errors import ValidationError
from .ranking import RankedList, sort_pairs
from .textproc import TokenStream, tokenize


@dataclass(frozen=True)
class Vocabulary:
    """Term to dense index mapping plus per-term idf (indexed by term index)."""

    index: dict[str, int]
    idf: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.index)


@dataclass(frozen=True)
class SparseVec:
    """L2-normalized sparse vector: strictly increasing indices, norm 1 or 0."""

    indices: tuple[int, ...]
    weights: tuple[float, ...]
    norm: float

    def dot(self, other: "SparseVec") -> float:
        i = j = 0
        total = 0.0
        si, sw = self.indices, self.weights
        oi, ow = other.indices, other.weights
        while i < len(si) and j < len(oi):
            if si[i] == oi[j]:
                total += sw[i] * ow[j]
                i += 1
                j += 1
            elif si[i] < oi[j]:
                i += 1
            else:
                j += 1
        return total


def cosine(u: SparseVec, v: SparseVec) -> float:
    if u.norm == 0.0 or v.norm == 0.0:
        return 0.0
    return u.dot(v) / (u.norm * v.norm)


def fit(corpus: list[FaqDoc]) -> Vocabulary:
    """Fit the shared vocabulary; terms are indexed in sorted order."""
    if not corpus:
        raise ValidationError("cannot fit a vocabulary on an empty corpus")
    df: dict[str, int] = {}
    for doc in corpus:
        seen = set(tokenize(doc.question)) | set(tokenize(doc.answer))
        for term in seen:
            df[term] = df.get(term, 0) + 1
    if not df:
        raise ValidationError("corpus has zero tokens, nothing to index")
    n = len(corpus)
    terms = sorted(df)
    idf = tuple(math.log((1 + n) / (1 + df[t])) + 1.0 for t in terms)
    return Vocabulary(index={t: i for i, t in enumerate(terms)}, idf=idf)


def vectorize(vocab: Vocabulary, tokens: TokenStream) -> SparseVec:
    """tf * idf with raw counts, L2-normalized; out-of-vocabulary terms dropped."""
    counts: dict[int, int] = {}
    for t in tokens:
        idx = vocab.index.get(t)
        if idx is not None:
            counts[idx] = counts.get(idx, 0) + 1
    if not counts:
        return SparseVec((), (), 0.0)
    indices = tuple(sorted(counts))
    raw = [counts[i] * vocab.idf[i] for i in indices]
    norm = math.sqrt(sum(x * x for x in raw))
    return SparseVec(indices, tuple(x / norm for x in raw), 1.0)


def score_tfidf(query: SparseVec, doc_q: SparseVec, doc_a: SparseVec, w: float) -> float:
    """w * cos(query, doc_q) + (1 - w) * cos(query, doc_a)."""
    if not 0.0 <= w <= 1.0:
        raise ValidationError(f"w must be in [0, 1], got {w}")
    return w * cosine(query, doc_q) + (1.0 - w) * cosine(query, doc_a)


class FieldVectors:
    """All documents' vectors for one field, with an inverted view for scoring.

    The inverted structure maps each term index to the rows containing it and
    their stored weights, so scoring a query against every document costs one
    pass over the query's postings instead of one pass per document.
    """

    def __init__(self, vecs: list[SparseVec]):
        self.vecs = list(vecs)
        postings: dict[int, tuple[list[int], list[float]]] = {}
        for row, vec in enumerate(self.vecs):
            for idx, weight in zip(vec.indices, vec.weights):
                rows, weights = postings.setdefault(idx, ([], []))
                rows.append(row)
                weights.append(weight)
        self._postings = {
            idx: (np.asarray(rows, dtype=np.intp), np.asarray(weights, dtype=np.float64))
            for idx, (rows, weights) in postings.items()
        }

    def __len__(self) -> int:
        return len(self.vecs)

    def cosines(self, query: SparseVec) -> np.ndarray:
        """Cosine of the query against every document in this field."""
        scores = np.zeros(len(self.vecs), dtype=np.float64)
        for idx, q_weight in zip(query.indices, query.weights):
            hit = self._postings.get(idx)
            if hit is not None:
                rows, weights = hit
                scores[rows] += q_weight * weights
        return scores


def rank_tfidf(question: FieldVectors, answer: FieldVectors, doc_ids: list[str],
               query: SparseVec, w: float, top_n: int,
               query_id: str = "") -> RankedList:
    """Field-weighted cosine ranking; zero-score docs excluded, ties by doc id."""
    if top_n < 1:
        raise ValidationError(f"top_n must be >= 1, got {top_n}")
    if not 0.0 <= w <= 1.0:
        raise ValidationError(f"w must be in [0, 1], got {w}")
    combined = w * question.cosines(query) + (1.0 - w) * answer.cosines(query)
    pairs = sort_pairs({doc_ids[i]: float(combined[i]) for i in range(len(doc_ids))},
                       drop_zero=True)
    return RankedList(query_id=query_id, pairs=tuple(pairs[:top_n]), ranker="tfidf")
