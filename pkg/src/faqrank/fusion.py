"""Score fusion: the damped dense+lexical combination and reciprocal rank fusion.

The initial ranking scores every candidate with

    F = [alpha + (1 - alpha) * zeta] * F_dense + [(1 - alpha) * (1 - zeta)] * F_tfidf
    zeta = exp((1 - len(Q)) / beta)

where F_dense is the cosine between query and question embeddings and F_tfidf
is the field-weighted lexical cosine. The two bracketed coefficients always
sum to 1. Taken literally, zeta pushes all weight onto the dense leg for
one-token queries; damping_mode selects between that literal reading
(``as_written``, the default) and the swapped variant (``prose_intent``) in
which short keyword queries lean on the lexical leg instead. Both modes are
legitimate: the formula and its surrounding description genuinely disagree,
so the engine implements the formula and offers the described behavior as a
config escape hatch.

The final ranking fuses the initial ranking with a BM25 ranking by reciprocal
rank:

    RRF(doc) = 1 / (k + rank_initial(doc)) + 1 / (k + rank_bm25(doc))

with a term simply omitted when the doc is absent from that list. The full
pipeline takes the dense top-N and the TF-IDF top-N as the candidate pool for
the initial ranking, ranks the pool, fuses with the BM25 top-N, and surfaces
the top M.

Every ranking in this module breaks score ties by ascending doc id, which
together with the canonical index artifacts makes retrieval byte-reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict, field

import numpy as np

from . import bm25 as bm25_mod
from . import dense as dense_mod
from . import tfidf as tfidf_mod
from .corpus import FaqDoc, validate_doc
from .errors import ValidationError
from .ranking import FusedEntry, FusedResult, RankedList, sort_pairs
from .textproc import TokenStream, tokenize

DAMPING_MODES = ("as_written", "prose_intent")
RETRIEVAL_MODES = ("tfidf", "bm25", "sbert", "hybrid", "rrf")

# ranker tags used in provenance maps and run-file output
TAG_DENSE = "sbert"
TAG_TFIDF = "tfidf"
TAG_BM25 = "bm25"
TAG_HYBRID = "sbert+tfidf"


@dataclass(frozen=True)
class FusionParams:
    """Every retrieval hyperparameter in one place.

    alpha and w have no defaults on purpose: they are the tuned quantities,
    and silently assuming a value would make grid-search results ambiguous.
    Modes that need them reject params where they are unset. k1 and b are
    consumed when an index is built, not at query time; they live here so one
    object round-trips the complete configuration.
    """

    alpha: float | None = None
    w: float | None = None
    beta: float = 3.0
    rrf_k: float = 60.0
    top_n: int = 200
    top_m: int = 50
    damping_mode: str = "as_written"
    k1: float = 1.2
    b: float = 0.75

    def validate(self) -> None:
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.w is not None and not 0.0 <= self.w <= 1.0:
            raise ValidationError(f"w must be in [0, 1], got {self.w}")
        if self.beta <= 0.0:
            raise ValidationError(f"beta must be positive, got {self.beta}")
        if self.rrf_k <= 0.0:
            raise ValidationError(f"rrf_k must be positive, got {self.rrf_k}")
        if self.top_m < 1 or self.top_n < self.top_m:
            raise ValidationError(
                f"need top_n >= top_m >= 1, got top_n={self.top_n} top_m={self.top_m}")
        if self.damping_mode not in DAMPING_MODES:
            raise ValidationError(f"damping_mode must be one of {DAMPING_MODES}, got {self.damping_mode!r}")
        if self.k1 <= 0.0:
            raise ValidationError(f"k1 must be positive, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValidationError(f"b must be in [0, 1], got {self.b}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict, where: str = "params") -> "FusionParams":
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValidationError(f"{where}: unknown parameter(s) {sorted(unknown)}")
        params = cls(**data)
        params.validate()
        return params


def damping(len_q: int, beta: float) -> float:
    """zeta = exp((1 - len_q) / beta), in (0, 1] for len_q >= 1."""
    if len_q < 1:
        raise ValidationError(f"query length must be >= 1, got {len_q}")
    if beta <= 0.0:
        raise ValidationError(f"beta must be positive, got {beta}")
    return math.exp((1.0 - len_q) / beta)


def hybrid_coefficients(alpha: float, zeta: float, mode: str = "as_written") -> tuple[float, float]:
    """The (dense, lexical) weights; they sum to 1 by construction."""
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must be in [0, 1], got {alpha}")
    if not 0.0 < zeta <= 1.0:
        raise ValidationError(f"zeta must be in (0, 1], got {zeta}")
    if mode not in DAMPING_MODES:
        raise ValidationError(f"damping_mode must be one of {DAMPING_MODES}, got {mode!r}")
    if mode == "prose_intent":
        zeta = 1.0 - zeta
    c_dense = alpha + (1.0 - alpha) * zeta
    c_lexical = (1.0 - alpha) * (1.0 - zeta)
    return c_dense, c_lexical


def hybrid_score(f_sbert: float, f_tfidf: float, alpha: float, zeta: float,
                 mode: str = "as_written") -> float:
    c_dense, c_lexical = hybrid_coefficients(alpha, zeta, mode)
    return c_dense * f_sbert + c_lexical * f_tfidf


def fuse_rrf(list_a: RankedList, list_b: RankedList, k: float) -> FusedResult:
    """Reciprocal rank fusion of two rankings for the same query."""
    if list_a.query_id != list_b.query_id:
        raise ValidationError(
            f"cannot fuse rankings for different queries ({list_a.query_id!r} vs {list_b.query_id!r})")
    if k <= 0.0:
        raise ValidationError(f"rrf k must be positive, got {k}")
    ranks_a = list_a.ranks()
    ranks_b = list_b.ranks()
    fused: dict[str, float] = {}
    for doc_id in set(ranks_a) | set(ranks_b):
        score = 0.0
        if doc_id in ranks_a:
            score += 1.0 / (k + ranks_a[doc_id])
        if doc_id in ranks_b:
            score += 1.0 / (k + ranks_b[doc_id])
        fused[doc_id] = score
    entries = []
    for doc_id, score in sort_pairs(fused):
        provenance = {}
        if doc_id in ranks_a:
            provenance[list_a.ranker] = ranks_a[doc_id]
        if doc_id in ranks_b:
            provenance[list_b.ranker] = ranks_b[doc_id]
        entries.append(FusedEntry(doc_id=doc_id, score=score, provenance=provenance))
    return FusedResult(query_id=list_a.query_id, entries=tuple(entries), mode="rrf")


# --- the index bundle ---------------------------------------------------------

@dataclass(frozen=True)
class HybridIndex:
    """Immutable bundle of everything retrieve() needs."""

    docs: tuple[FaqDoc, ...]
    vocab: tfidf_mod.Vocabulary
    question_vecs: tfidf_mod.FieldVectors
    answer_vecs: tfidf_mod.FieldVectors
    bm25: bm25_mod.Bm25Index
    embeddings: dense_mod.EmbeddingMatrix
    row_of: dict[str, int] = field(repr=False)

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return self.bm25.doc_ids

    def __len__(self) -> int:
        return len(self.docs)

    def doc(self, doc_id: str) -> FaqDoc:
        return self.docs[self.row_of[doc_id]]


def build_index(corpus: list[FaqDoc], embeddings: dense_mod.EmbeddingMatrix,
                k1: float = 1.2, b: float = 0.75) -> HybridIndex:
    """Fit every per-corpus structure. The corpus order is the row order."""
    if not corpus:
        raise ValidationError("cannot build an index on an empty corpus")
    seen: set[str] = set()
    for i, doc in enumerate(corpus):
        validate_doc(doc, where=f"doc {i}")
        if doc.id in seen:
            raise ValidationError(f"duplicate id {doc.id!r} in corpus")
        seen.add(doc.id)
    if tuple(d.id for d in corpus) != embeddings.doc_ids:
        raise ValidationError("embedding matrix rows are not aligned with the corpus")
    vocab = tfidf_mod.fit(corpus)
    question_vecs = tfidf_mod.FieldVectors([tfidf_mod.vectorize(vocab, tokenize(d.question)) for d in corpus])
    answer_vecs = tfidf_mod.FieldVectors([tfidf_mod.vectorize(vocab, tokenize(d.answer)) for d in corpus])
    return HybridIndex(
        docs=tuple(corpus),
        vocab=vocab,
        question_vecs=question_vecs,
        answer_vecs=answer_vecs,
        bm25=bm25_mod.build_bm25(corpus, k1=k1, b=b),
        embeddings=embeddings,
        row_of={d.id: i for i, d in enumerate(corpus)},
    )


# --- retrieval -----------------------------------------------------------------

class QueryLegScores:
    """Per-document score arrays for one query, computed lazily per leg.

    alpha and w never enter these arrays, so a grid search can compute them
    once per query and recombine them for every cell.
    """

    def __init__(self, index: HybridIndex, tokens: TokenStream,
                 query_vec: np.ndarray | None):
        self.index = index
        self.tokens = tokens
        self._query_vec = query_vec
        self._dense = None
        self._tfidf_q = None
        self._tfidf_a = None
        self._bm25_q = None
        self._bm25_a = None

    @property
    def dense(self) -> np.ndarray:
        if self._dense is None:
            if self._query_vec is None:
                raise ValidationError(
                    f"index embeddings come from provider {self.index.embeddings.provider!r}; "
                    "supply a query vector (query embeddings file) for dense scoring")
            self._dense = dense_mod.cosine_scores(self.index.embeddings, self._query_vec)
        return self._dense

    def _tfidf(self) -> tuple[np.ndarray, np.ndarray]:
        if self._tfidf_q is None:
            query_vec = tfidf_mod.vectorize(self.index.vocab, self.tokens)
            self._tfidf_q = self.index.question_vecs.cosines(query_vec)
            self._tfidf_a = self.index.answer_vecs.cosines(query_vec)
        return self._tfidf_q, self._tfidf_a

    def tfidf(self, w: float) -> np.ndarray:
        q, a = self._tfidf()
        return w * q + (1.0 - w) * a

    def bm25(self, w: float) -> np.ndarray:
        if self._bm25_q is None:
            self._bm25_q = self.index.bm25.fields["question"].scores(self.tokens)
            self._bm25_a = self.index.bm25.fields["answer"].scores(self.tokens)
        return w * self._bm25_q + (1.0 - w) * self._bm25_a


def compute_legs(index: HybridIndex, query: str, query_vec: np.ndarray | None = None,
                 ) -> QueryLegScores:
    tokens = tokenize(query)
    if not tokens:
        raise ValidationError(f"query {query!r} has no tokens after tokenization")
    return QueryLegScores(index, tokens, query_vec)


def _ranked_from_scores(index: HybridIndex, scores: np.ndarray, top_n: int,
                        ranker: str, query_id: str, drop_zero: bool) -> RankedList:
    doc_ids = index.doc_ids
    pairs = sort_pairs({doc_ids[i]: float(scores[i]) for i in range(len(doc_ids))},
                       drop_zero=drop_zero)
    return RankedList(query_id=query_id, pairs=tuple(pairs[:top_n]), ranker=ranker)


def _single_mode_result(ranked: RankedList, top_m: int, mode: str) -> FusedResult:
    entries = tuple(
        FusedEntry(doc_id=doc_id, score=score, provenance={ranked.ranker: i + 1})
        for i, (doc_id, score) in enumerate(ranked.pairs[:top_m])
    )
    return FusedResult(query_id=ranked.query_id, entries=entries, mode=mode)


def _hybrid_ranking(index: HybridIndex, legs: QueryLegScores, params: FusionParams,
                    query_id: str) -> RankedList:
    """R over the union of the dense and TF-IDF top-N candidate pools."""
    zeta = damping(len(legs.tokens), params.beta)
    dense_list = _ranked_from_scores(index, legs.dense, params.top_n,
                                     TAG_DENSE, query_id, drop_zero=False)
    tfidf_list = _ranked_from_scores(index, legs.tfidf(params.w), params.top_n,
                                     TAG_TFIDF, query_id, drop_zero=True)
    candidates = {doc_id for doc_id, _ in dense_list.pairs}
    candidates.update(doc_id for doc_id, _ in tfidf_list.pairs)
    c_dense, c_lexical = hybrid_coefficients(params.alpha, zeta, params.damping_mode)
    dense_scores = legs.dense
    lexical_scores = legs.tfidf(params.w)
    combined = {}
    for doc_id in candidates:
        row = index.row_of[doc_id]
        combined[doc_id] = c_dense * float(dense_scores[row]) + c_lexical * float(lexical_scores[row])
    return RankedList(query_id=query_id, pairs=tuple(sort_pairs(combined)), ranker=TAG_HYBRID)


def _require(params: FusionParams, mode: str, names: tuple[str, ...]) -> None:
    for name in names:
        if getattr(params, name) is None:
            raise ValidationError(f"mode {mode!r} requires {name} to be set")


def retrieve_from_legs(index: HybridIndex, legs: QueryLegScores, params: FusionParams,
                       mode: str, query_id: str = "q1") -> FusedResult:
    params.validate()
    if mode not in RETRIEVAL_MODES:
        raise ValidationError(f"unknown mode {mode!r}, expected one of {RETRIEVAL_MODES}")

    if mode == "sbert":
        ranked = _ranked_from_scores(index, legs.dense, params.top_n, TAG_DENSE,
                                     query_id, drop_zero=False)
        return _single_mode_result(ranked, params.top_m, mode)
    if mode == "tfidf":
        _require(params, mode, ("w",))
        ranked = _ranked_from_scores(index, legs.tfidf(params.w), params.top_n,
                                     TAG_TFIDF, query_id, drop_zero=True)
        return _single_mode_result(ranked, params.top_m, mode)
    if mode == "bm25":
        _require(params, mode, ("w",))
        ranked = _ranked_from_scores(index, legs.bm25(params.w), params.top_n,
                                     TAG_BM25, query_id, drop_zero=True)
        return _single_mode_result(ranked, params.top_m, mode)
    if mode == "hybrid":
        _require(params, mode, ("alpha", "w"))
        ranked = _hybrid_ranking(index, legs, params, query_id)
        return _single_mode_result(ranked, params.top_m, mode)

    # mode == "rrf": the full pipeline
    _require(params, mode, ("alpha", "w"))
    initial = _hybrid_ranking(index, legs, params, query_id)
    bm25_list = _ranked_from_scores(index, legs.bm25(params.w), params.top_n,
                                    TAG_BM25, query_id, drop_zero=True)
    fused = fuse_rrf(initial, bm25_list, params.rrf_k)
    return fused.truncated(params.top_m)


def retrieve(index: HybridIndex, query: str, params: FusionParams, mode: str = "rrf",
             query_vec: np.ndarray | None = None, query_id: str = "q1") -> FusedResult:
    """Run one query through the selected pipeline.

    query_vec supplies the query's dense embedding when the index was built
    from an external provider; with a hashproj index it is derived
    automatically.
    """
    legs = compute_legs(index, query, query_vec=resolve_query_vec(index, query, query_vec))
    return retrieve_from_legs(index, legs, params, mode, query_id=query_id)


def resolve_query_vec(index: HybridIndex, query: str,
                      query_vec: np.ndarray | None) -> np.ndarray | None:
    if query_vec is not None:
        return np.asarray(query_vec, dtype=np.float64)
    provider = dense_mod.provider_from_tag(index.embeddings.provider)
    if provider is not None:
        return provider.embed(query)
    return None
