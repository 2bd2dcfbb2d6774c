"""Query-length damping, linear fusion, reciprocal rank fusion and the
retrieval pipeline end to end.

The pipeline checks compare against tests/bruteforce.py, which rebuilds every
score from scratch with plain dicts and math.
"""

import math

import numpy as np
import pytest

from dataclasses import replace

from faqrank import (
    FusionParams,
    HashProvider,
    RankedList,
    ValidationError,
    build_index,
    damping,
    fuse_rrf,
    hybrid_score,
    matrix_from_provider,
    retrieve,
    tokenize,
)
from faqrank.fusion import (
    DAMPING_MODES,
    RETRIEVAL_MODES,
    compute_legs,
    hybrid_coefficients,
    retrieve_from_legs,
)
from faqrank.tfidf import FieldVectors, vectorize

from . import bruteforce
from .toydata import E2E_HASH_DIM, E2E_QUERIES


class TestDamping:
    def test_single_token_query_undamped(self):
        assert damping(1, 3.0) == pytest.approx(1.0, abs=1e-12)

    def test_frozen_values_at_default_beta(self):
        assert damping(4, 3.0) == pytest.approx(0.36787944117144233, abs=1e-12)
        assert damping(10, 3.0) == pytest.approx(0.049787068367863944, abs=1e-12)

    def test_monotone_decreasing_in_length(self):
        values = [damping(n, 3.0) for n in range(1, 30)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert all(0.0 < v <= 1.0 for v in values)

    def test_larger_beta_damps_less(self):
        assert damping(8, 10.0) > damping(8, 3.0)

    def test_zero_length_rejected(self):
        with pytest.raises(ValidationError):
            damping(0, 3.0)

    def test_bad_beta_rejected(self):
        with pytest.raises(ValidationError):
            damping(2, 0.0)
        with pytest.raises(ValidationError):
            damping(2, -1.0)


class TestLinearFusion:
    def test_frozen_coefficients(self):
        c_dense, c_lexical = hybrid_coefficients(0.5, math.exp(-1.0))
        assert c_dense == pytest.approx(0.6839397205857212, abs=1e-12)
        assert c_lexical == pytest.approx(0.31606027941427883, abs=1e-12)
        assert c_dense + c_lexical == pytest.approx(1.0, abs=1e-12)

    def test_alpha_one_collapses_to_dense(self):
        for zeta in (0.01, 0.2, 1.0):
            assert hybrid_coefficients(1.0, zeta) == (1.0, 0.0)

    def test_zeta_zero_outside_domain(self):
        # exp of a finite exponent never reaches 0, so 0 marks a broken caller.
        with pytest.raises(ValidationError):
            hybrid_coefficients(0.5, 0.0)

    def test_alpha_zero_fully_damped(self):
        # With alpha=0 and a one-token query (zeta=1) the dense leg still
        # takes all the weight, which is the surprising edge of the formula.
        c_dense, c_lexical = hybrid_coefficients(0.0, 1.0)
        assert c_dense == pytest.approx(1.0)
        assert c_lexical == pytest.approx(0.0)

    def test_coefficients_always_sum_to_one(self):
        rng = np.random.default_rng(47)
        for _ in range(1000):
            alpha = float(rng.random())
            zeta = 1.0 - float(rng.random())  # stays inside (0, 1]
            for mode in DAMPING_MODES:
                c_dense, c_lexical = hybrid_coefficients(alpha, zeta, mode)
                assert c_dense + c_lexical == pytest.approx(1.0, abs=1e-12)
                assert c_dense >= 0.0 and c_lexical >= 0.0

    def test_prose_intent_swaps_damping(self):
        alpha, zeta = 0.3, 0.8
        written = hybrid_coefficients(alpha, zeta, "as_written")
        swapped = hybrid_coefficients(alpha, 1.0 - zeta, "prose_intent")
        assert written == pytest.approx(swapped)

    def test_score_matches_reference(self):
        rng = np.random.default_rng(48)
        for _ in range(200):
            f_s, f_t = float(rng.random()), float(rng.random())
            alpha, zeta = float(rng.random()), 1.0 - float(rng.random())
            for mode in DAMPING_MODES:
                got = hybrid_score(f_s, f_t, alpha, zeta, mode)
                want = bruteforce.hybrid(f_s, f_t, alpha, zeta, mode)
                assert got == pytest.approx(want, abs=1e-12)


def _ranked(query_id, pairs, ranker="tfidf"):
    return RankedList(query_id=query_id, pairs=tuple(pairs), ranker=ranker)


class TestRrf:
    def test_rank_one_in_both_lists(self):
        a = _ranked("q", [("d1", 3.0), ("d2", 1.0)], ranker="sbert+tfidf")
        b = _ranked("q", [("d1", 9.0), ("d3", 2.0)], ranker="bm25")
        fused = fuse_rrf(a, b, k=60.0)
        top = fused.entries[0]
        assert top.doc_id == "d1"
        assert top.score == pytest.approx(0.03278688524590164, abs=1e-15)
        assert top.provenance == {"sbert+tfidf": 1, "bm25": 1}

    def test_single_list_membership(self):
        a = _ranked("q", [("d1", 3.0), ("d2", 2.0), ("d3", 1.0)])
        b = _ranked("q", [("d1", 5.0)], ranker="bm25")
        fused = fuse_rrf(a, b, k=60.0)
        by_id = {e.doc_id: e for e in fused.entries}
        assert by_id["d3"].score == pytest.approx(0.015873015873015872, abs=1e-15)
        assert by_id["d3"].provenance == {"tfidf": 3}

    def test_mismatched_query_ids_rejected(self):
        a = _ranked("q1", [("d1", 1.0)])
        b = _ranked("q2", [("d1", 1.0)], ranker="bm25")
        with pytest.raises(ValidationError):
            fuse_rrf(a, b, k=60.0)

    def test_bad_k_rejected(self):
        a = _ranked("q", [("d1", 1.0)])
        b = _ranked("q", [("d1", 1.0)], ranker="bm25")
        with pytest.raises(ValidationError):
            fuse_rrf(a, b, k=0.0)

    def test_matches_brute_force_on_random_lists(self):
        rng = np.random.default_rng(49)
        universe = [f"d{i:02d}" for i in range(30)]
        for _ in range(25):
            size_a = int(rng.integers(1, 25))
            size_b = int(rng.integers(1, 25))
            ids_a = list(rng.choice(universe, size=size_a, replace=False))
            ids_b = list(rng.choice(universe, size=size_b, replace=False))
            a = _ranked("q", [(d, float(size_a - i)) for i, d in enumerate(sorted(ids_a))])
            b = _ranked("q", [(d, float(size_b - i)) for i, d in enumerate(sorted(ids_b))], ranker="bm25")
            k = float(rng.uniform(1.0, 100.0))
            fused = fuse_rrf(a, b, k)
            expected = bruteforce.rrf_fuse(list(a.pairs), list(b.pairs), k)
            assert [e.doc_id for e in fused.entries] == [d for d, _ in expected]
            for entry, (_, want) in zip(fused.entries, expected):
                assert entry.score == pytest.approx(want, abs=1e-12)

    def test_score_bounds(self):
        # Each fused score lies in (0, 2/(k+1)] and the maximum needs
        # rank one in both lists.
        a = _ranked("q", [("d1", 2.0), ("d2", 1.0)])
        b = _ranked("q", [("d2", 2.0), ("d1", 1.0)], ranker="bm25")
        fused = fuse_rrf(a, b, k=60.0)
        limit = 2.0 / 61.0
        for entry in fused.entries:
            assert 0.0 < entry.score < limit  # no doc is first in both here


class TestParams:
    def test_defaults(self):
        params = FusionParams()
        assert params.alpha is None and params.w is None
        assert params.beta == 3.0
        assert params.rrf_k == 60.0
        assert (params.top_n, params.top_m) == (200, 50)
        assert params.damping_mode == "as_written"

    @pytest.mark.parametrize(
        "bad",
        [
            {"alpha": -0.1},
            {"alpha": 1.1},
            {"w": 2.0},
            {"beta": 0.0},
            {"rrf_k": -3.0},
            {"top_n": 0},
            {"top_n": 10, "top_m": 20},
            {"damping_mode": "inverted"},
        ],
    )
    def test_validation(self, bad):
        with pytest.raises(ValidationError):
            FusionParams(**bad).validate()

    def test_json_round_trip(self):
        params = FusionParams(alpha=0.7, w=0.4, beta=2.0, rrf_k=10.0, top_n=20, top_m=5)
        again = FusionParams.from_dict(__import__("json").loads(params.to_json()))
        assert again == params

    def test_unknown_key_rejected(self):
        with pytest.raises(ValidationError, match="gamma"):
            FusionParams.from_dict({"gamma": 1.0})


@pytest.fixture(scope="module")
def e2e_params():
    return FusionParams(alpha=0.6, w=0.5, top_n=200, top_m=50)


class TestPipeline:
    def test_unknown_mode_rejected(self, e2e_index, e2e_params):
        with pytest.raises(ValidationError, match="mode"):
            retrieve(e2e_index, "escrow", e2e_params, mode="cascade")

    def test_empty_query_rejected(self, e2e_index, e2e_params):
        with pytest.raises(ValidationError):
            retrieve(e2e_index, "?!", e2e_params, mode="rrf")

    @pytest.mark.parametrize("mode,missing", [("tfidf", "w"), ("bm25", "w"), ("hybrid", "alpha"), ("rrf", "alpha")])
    def test_required_parameters_enforced(self, e2e_index, mode, missing):
        with pytest.raises(ValidationError, match=missing):
            retrieve(e2e_index, "escrow account", FusionParams(), mode=mode)

    def test_modes_report_provenance_tags(self, e2e_index, e2e_params):
        tags = {
            "sbert": {"sbert"},
            "tfidf": {"tfidf"},
            "bm25": {"bm25"},
            "hybrid": {"sbert+tfidf"},
            "rrf": {"sbert+tfidf", "bm25"},
        }
        for mode in RETRIEVAL_MODES:
            result = retrieve(e2e_index, "what is an escrow account", e2e_params, mode=mode)
            assert result.mode == mode
            seen = set()
            for entry in result.entries:
                seen.update(entry.provenance)
            assert seen <= tags[mode]
            assert result.entries, mode

    def test_alpha_one_orders_like_dense(self, e2e_index):
        params = FusionParams(alpha=1.0, w=0.5)
        dense = retrieve(e2e_index, "down payment help", params, mode="sbert")
        hybrid = retrieve(e2e_index, "down payment help", params, mode="hybrid")
        assert hybrid.doc_ids() == dense.doc_ids()

    def test_w_one_bm25_matches_answer_stripped_rebuild(self, e2e_docs, e2e_index):
        # BM25 keeps independent per-field statistics, so rebuilding the whole
        # index from a corpus with blanked answers changes nothing at w=1.
        provider = HashProvider(E2E_HASH_DIM)
        stripped_docs = [replace(d, answer="") for d in e2e_docs]
        stripped = build_index(stripped_docs, matrix_from_provider(provider, stripped_docs))
        params = FusionParams(alpha=0.6, w=1.0)
        got = retrieve(e2e_index, "mortgage insurance", params, mode="bm25")
        want = retrieve(stripped, "mortgage insurance", params, mode="bm25")
        assert got.doc_ids() == want.doc_ids()
        for a, b in zip(got.entries, want.entries):
            assert a.score == pytest.approx(b.score, abs=1e-12)

    def test_w_one_tfidf_never_reads_answer_vectors(self, e2e_index):
        # The shared vocabulary is fitted over both fields, so the comparison
        # holds the vocabulary fixed and swaps in vectors of empty answers.
        blank = [vectorize(e2e_index.vocab, tokenize("")) for _ in range(len(e2e_index))]
        blanked = replace(e2e_index, question_vecs=e2e_index.question_vecs,
                          answer_vecs=FieldVectors(blank))
        params = FusionParams(alpha=0.6, w=1.0)
        got = retrieve(e2e_index, "mortgage insurance", params, mode="tfidf")
        want = retrieve(blanked, "mortgage insurance", params, mode="tfidf")
        assert got.doc_ids() == want.doc_ids()
        for a, b in zip(got.entries, want.entries):
            assert a.score == pytest.approx(b.score, abs=1e-12)

    def test_single_candidate_corpus(self, docs_factory):
        docs = docs_factory([("only", "what is an escrow account", "a holding account")])
        index = build_index(docs, matrix_from_provider(HashProvider(16), docs))
        result = retrieve(index, "escrow", FusionParams(alpha=0.5, w=0.5), mode="rrf")
        assert result.doc_ids() == ["only"]

    def test_rrf_matches_brute_force_pipeline(self, oracle_index, e2e_docs, query_vec_of):
        triples = [(d.id, d.question, d.answer) for d in e2e_docs]
        embeddings = {
            doc_id: list(oracle_index.embeddings.matrix[i])
            for i, doc_id in enumerate(oracle_index.embeddings.doc_ids)
        }
        rng = np.random.default_rng(50)
        for query in E2E_QUERIES:
            qvec = query_vec_of(query)
            for _ in range(5):
                alpha = float(rng.random())
                w = float(rng.random())
                params = FusionParams(alpha=alpha, w=w)
                result = retrieve(oracle_index, query, params, mode="rrf", query_vec=qvec)
                expected = bruteforce.full_pipeline(
                    triples, embeddings, list(qvec), query, alpha, w, beta=3.0, rrf_k=60.0
                )[: params.top_m]
                assert [e.doc_id for e in result.entries] == [d for d, _ in expected]
                for entry, (_, want) in zip(result.entries, expected):
                    assert entry.score == pytest.approx(want, abs=1e-9)

    def test_prose_intent_pipeline_matches_reference(self, oracle_index, e2e_docs, query_vec_of):
        triples = [(d.id, d.question, d.answer) for d in e2e_docs]
        embeddings = {
            doc_id: list(oracle_index.embeddings.matrix[i])
            for i, doc_id in enumerate(oracle_index.embeddings.doc_ids)
        }
        query = E2E_QUERIES[0]
        qvec = query_vec_of(query)
        params = FusionParams(alpha=0.4, w=0.6, damping_mode="prose_intent")
        result = retrieve(oracle_index, query, params, mode="rrf", query_vec=qvec)
        expected = bruteforce.full_pipeline(
            triples, embeddings, list(qvec), query,
            0.4, 0.6, beta=3.0, rrf_k=60.0, damping_mode="prose_intent",
        )[: params.top_m]
        assert [e.doc_id for e in result.entries] == [d for d, _ in expected]

    def test_legs_are_reusable_across_settings(self, e2e_index):
        # One leg computation must serve any (alpha, w) recombination.
        legs = compute_legs(e2e_index, "closing costs", query_vec=HashProvider(E2E_HASH_DIM).embed("closing costs"))
        a = retrieve_from_legs(e2e_index, legs, FusionParams(alpha=0.2, w=0.8), "rrf")
        b = retrieve(e2e_index, "closing costs", FusionParams(alpha=0.2, w=0.8), mode="rrf")
        assert [e.doc_id for e in a.entries] == [e.doc_id for e in b.entries]
        for x, y in zip(a.entries, b.entries):
            assert x.score == pytest.approx(y.score, abs=1e-15)

    def test_truncation_to_top_m(self, e2e_index):
        params = FusionParams(alpha=0.5, w=0.5, top_m=3)
        result = retrieve(e2e_index, "loan", params, mode="rrf")
        assert len(result.entries) <= 3
