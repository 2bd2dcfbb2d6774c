import hashlib
import json

import numpy as np
import pytest


class StubEncoder:
    """Deterministic stand-in for a sentence encoder.

    Each text maps to the first 16 bytes of its sha256 digest, shifted to be
    strictly positive; no randomness, no model download.
    """

    model_id = "stub-16"
    dim = 16

    def encode(self, texts):
        rows = []
        for text in texts:
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            row = np.frombuffer(digest[: self.dim], dtype=np.uint8)
            rows.append(row.astype(np.float64) + 1.0)
        return np.vstack(rows)


CORPUS = [
    ("m01", "What is the minimum credit score for an fha loan", "Usually 580 for low down payments."),
    ("m02", "How large a down payment do I need", "As little as three percent on some programs."),
    ("m03", "Can closing costs be rolled into the loan", "Sometimes, depending on the program."),
    ("m04", "What is private mortgage insurance", "Coverage the lender requires under twenty percent equity."),
    ("m05", "How is an escrow account analyzed", "The servicer reviews it once a year."),
    ("m06", "What documents does preapproval require", "Pay stubs, bank statements and tax returns."),
    ("m07", "Can rental income count toward qualification", "Yes, with a documented history."),
    ("m08", "What is the waiting period after bankruptcy", "Two to four years depending on the chapter."),
    ("m09", "Do discount points lower the interest rate", "Each point buys the rate down slightly."),
    ("m10", "How are county loan limits set", "They follow the conforming limit schedule."),
]


def write_corpus(path, triples=CORPUS):
    lines = [json.dumps({"id": doc_id, "question": q, "answer": a})
             for doc_id, q, a in triples]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture()
def stub_encoder():
    return StubEncoder()


@pytest.fixture()
def corpus_file(tmp_path):
    return write_corpus(tmp_path / "corpus.jsonl")
