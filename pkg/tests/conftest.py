"""Shared fixtures: toy corpora wired into engine structures."""

import numpy as np
import pytest

from faqrank import EmbeddingMatrix, FaqDoc, HashProvider, build_index, matrix_from_provider

from . import toydata


def docs_from_triples(triples):
    return [FaqDoc(id=doc_id, question=q, answer=a) for doc_id, q, a in triples]


@pytest.fixture(scope="session")
def docs_factory():
    return docs_from_triples


@pytest.fixture(scope="session")
def tfidf_docs():
    return docs_from_triples(toydata.TFIDF_DOCS)


@pytest.fixture(scope="session")
def bm25_docs():
    return docs_from_triples(toydata.BM25_DOCS)


@pytest.fixture(scope="session")
def e2e_docs():
    return docs_from_triples(toydata.E2E_DOCS)


@pytest.fixture(scope="session")
def e2e_index(e2e_docs):
    provider = HashProvider(toydata.E2E_HASH_DIM)
    return build_index(e2e_docs, matrix_from_provider(provider, e2e_docs))


@pytest.fixture(scope="session")
def oracle_index(e2e_docs):
    # The hand-built vectors make unrelated query/doc pairs exactly
    # orthogonal, so reference comparisons never hinge on summation noise.
    rows = np.asarray([toydata.E2E_EMBEDDINGS[d.id] for d in e2e_docs], dtype=np.float64)
    rows = rows / np.linalg.norm(rows, axis=1)[:, None]
    matrix = EmbeddingMatrix(
        doc_ids=tuple(d.id for d in e2e_docs), matrix=rows, provider="fixed-toy"
    )
    return build_index(e2e_docs, matrix)


@pytest.fixture(scope="session")
def query_vec_of():
    def lookup(query):
        return np.asarray(toydata.E2E_QUERY_VECS[query], dtype=np.float64)

    return lookup
