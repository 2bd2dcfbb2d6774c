"""Regenerate the frozen expected values used by the unit tests.

Run from the repository root:

    python3 tools/derive_expected.py

Prints every derived constant with full float precision. The values are
computed only by the independent reference code in tests/bruteforce.py plus
direct arithmetic, never by the engine, so they can be frozen into the tests
before (and independently of) the implementation.
"""

import math
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))

import bruteforce as bf  # noqa: E402
import toydata as td  # noqa: E402


def main():
    print("# tfidf: idf values over TFIDF_DOCS")
    idf = bf.tfidf_idf([(d, q, a) for d, q, a in td.TFIDF_DOCS])
    for term in sorted(idf):
        print(f"  idf[{term!r}] = {idf[term]!r}")

    print("# tfidf: normalized query vector for %r" % td.TFIDF_QUERY)
    qv = bf.tfidf_vec(idf, bf.tok(td.TFIDF_QUERY))
    for term in sorted(qv):
        print(f"  q[{term!r}] = {qv[term]!r}")

    for w in (0.0, 0.5, 1.0, 0.7):
        scores = bf.tfidf_field_score(td.TFIDF_DOCS, td.TFIDF_QUERY, w)
        print(f"# tfidf: field scores at w={w}")
        for doc_id in sorted(scores):
            print(f"  score[{doc_id!r}] = {scores[doc_id]!r}")

    print("# bm25: per-doc scores for %r at w=0.5" % td.BM25_QUERY)
    for doc_id, _, _ in td.BM25_DOCS:
        s = bf.bm25_score(td.BM25_DOCS, td.BM25_QUERY, doc_id, 0.5, td.BM25_K1, td.BM25_B)
        print(f"  bm25[{doc_id!r}] = {s!r}")
    print("# bm25: question-only (w=1) and answer-only (w=0) for b1")
    print(f"  w1  = {bf.bm25_score(td.BM25_DOCS, td.BM25_QUERY, 'b1', 1.0, td.BM25_K1, td.BM25_B)!r}")
    print(f"  w0  = {bf.bm25_score(td.BM25_DOCS, td.BM25_QUERY, 'b1', 0.0, td.BM25_K1, td.BM25_B)!r}")

    print("# fusion: damping closed forms at beta=3")
    for n in (1, 4, 10):
        print(f"  zeta({n}) = {bf.zeta(n, 3.0)!r}  (e^{{{(1 - n) / 3.0}}} = {math.exp((1 - n) / 3.0)!r})")

    print("# fusion: hybrid coefficients at alpha=0.5, zeta=e^-1, as_written")
    alpha = 0.5
    z = math.exp(-1.0)
    c_sbert = alpha + (1 - alpha) * z
    c_tfidf = (1 - alpha) * (1 - z)
    print(f"  c_sbert = {c_sbert!r}")
    print(f"  c_tfidf = {c_tfidf!r}")
    print(f"  sum     = {c_sbert + c_tfidf!r}")

    print("# fusion: rrf closed forms at k=60")
    print(f"  rank1+rank1 = {1 / 61 + 1 / 61!r}")
    print(f"  rank3 only  = {1 / 63!r}")

    print("# evalkit: ndcg@5 for ranked grades [2,0,1,0,0], judged grades {2,1}")
    dcg = 2 / math.log2(2) + 1 / math.log2(4)
    idcg = 2 / math.log2(2) + 1 / math.log2(3)
    print(f"  dcg  = {dcg!r}")
    print(f"  idcg = {idcg!r}")
    print(f"  ndcg = {dcg / idcg!r}")

    print("# evalkit: AP/P@4/R@4 for [R,N,R,N] with 2 relevant judged")
    ap = (1 / 1 + 2 / 3) / 2
    print(f"  ap  = {ap!r}")
    print(f"  p4  = {2 / 4!r}")
    print(f"  r4  = {2 / 2!r}")


if __name__ == "__main__":
    main()
