"""Dense embedding loading, the hashing provider, and exact nearest-neighbour search."""

import json

import numpy as np
import pytest

from faqrank import (
    HashProvider,
    ValidationError,
    hash_embed,
    knn_dense,
    load_embeddings,
    matrix_from_provider,
    write_embeddings,
)
from faqrank.dense import cosine_scores, provider_from_tag

from . import bruteforce


def _write_file(path, header, rows):
    lines = [json.dumps(header)] + [json.dumps(r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _unit(vec):
    arr = np.asarray(vec, dtype=np.float64)
    return list(arr / np.linalg.norm(arr))


class TestLoad:
    HEADER = {"dim": 3, "provider": "test-encoder"}

    def _docs(self, docs_factory, ids=("a", "b")):
        return docs_factory([(i, f"question {i}", "") for i in ids])

    def test_round_trip(self, tmp_path, docs_factory):
        docs = self._docs(docs_factory)
        path = tmp_path / "emb.jsonl"
        _write_file(
            path,
            self.HEADER,
            [{"id": "a", "vector": [1.0, 0.0, 0.0]}, {"id": "b", "vector": [0.0, 2.0, 0.0]}],
        )
        matrix = load_embeddings(path, docs)
        assert matrix.doc_ids == ("a", "b")
        assert matrix.provider == "test-encoder"
        # Vectors are re-normalized on load.
        assert np.allclose(np.linalg.norm(matrix.matrix, axis=1), 1.0)

        out = tmp_path / "again.jsonl"
        write_embeddings(out, matrix)
        reloaded = load_embeddings(out, docs)
        assert np.allclose(reloaded.matrix, matrix.matrix)

    def test_rows_follow_corpus_order(self, tmp_path, docs_factory):
        docs = self._docs(docs_factory, ids=("b", "a"))
        path = tmp_path / "emb.jsonl"
        _write_file(
            path,
            self.HEADER,
            [{"id": "a", "vector": [1.0, 0.0, 0.0]}, {"id": "b", "vector": [0.0, 1.0, 0.0]}],
        )
        matrix = load_embeddings(path, docs)
        assert matrix.doc_ids == ("b", "a")
        assert matrix.matrix[0][1] == pytest.approx(1.0)

    def test_missing_corpus_id_named(self, tmp_path, docs_factory):
        docs = self._docs(docs_factory)
        path = tmp_path / "emb.jsonl"
        _write_file(path, self.HEADER, [{"id": "a", "vector": [1.0, 0.0, 0.0]}])
        with pytest.raises(ValidationError, match="b"):
            load_embeddings(path, docs)

    def test_extra_id_ignored(self, tmp_path, docs_factory):
        docs = self._docs(docs_factory, ids=("a",))
        path = tmp_path / "emb.jsonl"
        _write_file(
            path,
            self.HEADER,
            [{"id": "a", "vector": [1.0, 0.0, 0.0]}, {"id": "stray", "vector": [0.0, 1.0, 0.0]}],
        )
        assert len(load_embeddings(path, docs)) == 1

    def test_duplicate_id_rejected(self, tmp_path, docs_factory):
        docs = self._docs(docs_factory, ids=("a",))
        path = tmp_path / "emb.jsonl"
        _write_file(
            path,
            self.HEADER,
            [{"id": "a", "vector": [1.0, 0.0, 0.0]}, {"id": "a", "vector": [0.0, 1.0, 0.0]}],
        )
        with pytest.raises(ValidationError, match="duplicate"):
            load_embeddings(path, docs)

    def test_dim_mismatch_rejected(self, tmp_path, docs_factory):
        docs = self._docs(docs_factory, ids=("a",))
        path = tmp_path / "emb.jsonl"
        _write_file(path, self.HEADER, [{"id": "a", "vector": [1.0, 0.0]}])
        with pytest.raises(ValidationError, match="dim"):
            load_embeddings(path, docs)

    def test_non_finite_rejected(self, tmp_path, docs_factory):
        docs = self._docs(docs_factory, ids=("a",))
        path = tmp_path / "emb.jsonl"
        path.write_text(
            json.dumps(self.HEADER) + "\n" + '{"id": "a", "vector": [NaN, 0.0, 0.0]}\n',
            encoding="utf-8",
        )
        with pytest.raises(ValidationError):
            load_embeddings(path, docs)

    def test_zero_vector_rejected(self, tmp_path, docs_factory):
        docs = self._docs(docs_factory, ids=("a",))
        path = tmp_path / "emb.jsonl"
        _write_file(path, self.HEADER, [{"id": "a", "vector": [0.0, 0.0, 0.0]}])
        with pytest.raises(ValidationError, match="zero"):
            load_embeddings(path, docs)

    def test_bad_header_rejected(self, tmp_path, docs_factory):
        docs = self._docs(docs_factory, ids=("a",))
        path = tmp_path / "emb.jsonl"
        _write_file(path, {"dim": 3}, [{"id": "a", "vector": [1.0, 0.0, 0.0]}])
        with pytest.raises(ValidationError, match="header"):
            load_embeddings(path, docs)

    def test_extra_record_key_rejected(self, tmp_path, docs_factory):
        docs = self._docs(docs_factory, ids=("a",))
        path = tmp_path / "emb.jsonl"
        _write_file(path, self.HEADER, [{"id": "a", "vector": [1.0, 0.0, 0.0], "note": "x"}])
        with pytest.raises(ValidationError):
            load_embeddings(path, docs)


class TestHashEmbed:
    def test_deterministic(self):
        a = hash_embed("what is an escrow account", 64)
        b = hash_embed("what is an escrow account", 64)
        assert np.array_equal(a, b)

    def test_unit_norm(self):
        for text in ("rate lock", "pmi", "can i refinance early"):
            assert np.linalg.norm(hash_embed(text, 32)) == pytest.approx(1.0, abs=1e-12)

    def test_empty_text_is_first_basis_vector(self):
        vec = hash_embed("", 16)
        assert vec[0] == 1.0
        assert np.count_nonzero(vec) == 1

    def test_tiny_dim_rejected(self):
        with pytest.raises(ValidationError):
            hash_embed("x", 4)

    def test_case_insensitive(self):
        assert np.array_equal(hash_embed("FHA Loan", 64), hash_embed("fha loan", 64))

    def test_word_order_matters_through_bigrams(self):
        a = hash_embed("loan fha limit", 256)
        b = hash_embed("fha loan limit", 256)
        assert not np.array_equal(a, b)

    def test_disjoint_vocabularies_nearly_orthogonal(self):
        # Random token sets that share no words should land far apart in
        # a 512-wide signed hashing space almost always.
        rng = np.random.default_rng(44)
        hits = 0
        trials = 100
        for trial in range(trials):
            left = " ".join(f"left{rng.integers(1000)}x{i}" for i in range(6))
            right = " ".join(f"right{rng.integers(1000)}y{i}" for i in range(6))
            cos = float(np.dot(hash_embed(left, 512), hash_embed(right, 512)))
            if abs(cos) < 0.2:
                hits += 1
        assert hits >= 95

    def test_provider_tag_round_trip(self):
        provider = HashProvider(128)
        assert provider.tag == "hashproj-128"
        again = provider_from_tag(provider.tag)
        assert again is not None
        assert np.array_equal(again.embed("escrow"), provider.embed("escrow"))

    def test_unknown_tag_gives_none(self):
        assert provider_from_tag("mini-lm-v2") is None


@pytest.fixture(scope="module")
def knn_matrix(docs_factory):
    docs = docs_factory([(f"d{i:03d}", f"question number {i} topic{i % 7}", "") for i in range(40)])
    return matrix_from_provider(HashProvider(64), docs)


class TestKnn:
    def test_self_query_ranks_itself_first(self, knn_matrix):
        for i in (0, 7, 39):
            ranked = knn_dense(knn_matrix, knn_matrix.row(i), top_n=5)
            assert ranked.pairs[0][0] == knn_matrix.doc_ids[i]
            assert ranked.pairs[0][1] == pytest.approx(1.0, abs=1e-12)

    def test_top_n_larger_than_corpus(self, knn_matrix):
        ranked = knn_dense(knn_matrix, knn_matrix.row(0), top_n=10_000)
        assert len(ranked.pairs) == len(knn_matrix)

    def test_scores_bounded(self, knn_matrix):
        rng = np.random.default_rng(45)
        for _ in range(10):
            query = rng.normal(size=knn_matrix.dim)
            for _, score in knn_dense(knn_matrix, query, top_n=len(knn_matrix)).pairs:
                assert -1.0 - 1e-12 <= score <= 1.0 + 1e-12

    def test_matches_exhaustive_cosine(self, knn_matrix):
        rng = np.random.default_rng(46)
        for _ in range(5):
            query = rng.normal(size=knn_matrix.dim)
            ranked = knn_dense(knn_matrix, query, top_n=len(knn_matrix))
            expected = {
                doc_id: bruteforce.cos_dense(list(query), list(knn_matrix.row(i)))
                for i, doc_id in enumerate(knn_matrix.doc_ids)
            }
            expected_pairs = bruteforce.ranked(expected, drop_zero=False)
            assert [d for d, _ in ranked.pairs] == [d for d, _ in expected_pairs]
            for (_, got), (_, want) in zip(ranked.pairs, expected_pairs):
                assert got == pytest.approx(want, abs=1e-9)

    def test_zero_scores_are_kept(self, docs_factory):
        # Dense ranking never drops candidates, unlike the lexical rankers.
        docs = docs_factory([("a", "x", ""), ("b", "y", "")])
        tiny = matrix_from_provider(HashProvider(8), docs)
        query = np.zeros(8)
        ranked = knn_dense(tiny, query, top_n=5)
        assert len(ranked.pairs) == 2
        assert all(score == 0.0 for _, score in ranked.pairs)

    def test_wrong_query_shape_rejected(self, knn_matrix):
        with pytest.raises(ValidationError):
            cosine_scores(knn_matrix, np.ones(knn_matrix.dim + 1))

    def test_non_finite_query_rejected(self, knn_matrix):
        bad = np.ones(knn_matrix.dim)
        bad[0] = np.nan
        with pytest.raises(ValidationError):
            cosine_scores(knn_matrix, bad)
