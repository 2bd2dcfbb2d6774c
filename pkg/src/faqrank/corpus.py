"""FAQ document model, corpus file I/O and dataset statistics.

A corpus file is UTF-8 JSON Lines, one object per line:

    {"id": "faq-1", "question": "...", "answer": "...", "category": "...", "source": "external"}

``id``, ``question`` and ``answer`` are required (``answer`` may be the empty
string for unanswered posts). ``category`` is optional. ``source`` is optional,
one of ``internal`` or ``external``, defaulting to ``external``. Any other key
is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
import json

from .errors import ValidationError
from .textproc import tokenize

SOURCES = ("internal", "external")

_REQUIRED = ("id", "question", "answer")
_OPTIONAL = ("category", "source")


@dataclass(frozen=True)
class FaqDoc:
    """One question/answer pair, the retrieval unit."""

    id: str
    question: str
    answer: str
    category: str | None = None
    source: str = "external"


@dataclass(frozen=True)
class CorpusStats:
    n_docs: int
    avg_question_len: float
    avg_answer_len: float
    category_coverage: float


def validate_doc(doc: FaqDoc, where: str = "") -> None:
    """Check the FaqDoc invariants, raising ValidationError with context."""
    ctx = f"{where}: " if where else ""
    if not isinstance(doc.id, str) or not doc.id:
        raise ValidationError(f"{ctx}doc id must be a nonempty string")
    if not isinstance(doc.question, str) or not doc.question:
        raise ValidationError(f"{ctx}doc {doc.id!r}: question must be nonempty")
    if not isinstance(doc.answer, str):
        raise ValidationError(f"{ctx}doc {doc.id!r}: answer must be a string")
    if doc.category is not None and (not isinstance(doc.category, str) or not doc.category):
        raise ValidationError(f"{ctx}doc {doc.id!r}: category must be a nonempty string when present")
    if doc.source not in SOURCES:
        raise ValidationError(f"{ctx}doc {doc.id!r}: source must be one of {SOURCES}, got {doc.source!r}")


def _doc_from_record(record: dict, where: str) -> FaqDoc:
    if not isinstance(record, dict):
        raise ValidationError(f"{where}: record must be a JSON object")
    unknown = set(record) - set(_REQUIRED) - set(_OPTIONAL)
    if unknown:
        raise ValidationError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = [k for k in _REQUIRED if k not in record]
    if missing:
        raise ValidationError(f"{where}: missing required field(s) {missing}")
    doc = FaqDoc(
        id=record["id"],
        question=record["question"],
        answer=record["answer"],
        category=record.get("category"),
        source=record.get("source", "external"),
    )
    validate_doc(doc, where)
    return doc


def load_corpus(path) -> list[FaqDoc]:
    """Read a corpus file, validating every record and id uniqueness."""
    docs: list[FaqDoc] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{where}: malformed record ({exc.msg})") from exc
            doc = _doc_from_record(record, where)
            if doc.id in seen:
                raise ValidationError(
                    f"{where}: duplicate id {doc.id!r} (first seen on line {seen[doc.id]})"
                )
            seen[doc.id] = lineno
            docs.append(doc)
    if not docs:
        raise ValidationError(f"{path}: corpus file contains no records")
    return docs


def write_corpus(path, docs: list[FaqDoc]) -> None:
    """Write docs in the corpus file format. Inverse of load_corpus."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(corpus_line(doc))
            fh.write("\n")


def corpus_line(doc: FaqDoc) -> str:
    """One canonical corpus file line (no trailing newline)."""
    record = {"id": doc.id, "question": doc.question, "answer": doc.answer, "source": doc.source}
    if doc.category is not None:
        record["category"] = doc.category
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def compute_stats(corpus: list[FaqDoc]) -> CorpusStats:
    """Arithmetic-mean token lengths and category coverage."""
    if not corpus:
        raise ValidationError("cannot compute statistics of an empty corpus")
    n = len(corpus)
    q_total = sum(len(tokenize(d.question)) for d in corpus)
    a_total = sum(len(tokenize(d.answer)) for d in corpus)
    with_category = sum(1 for d in corpus if d.category is not None)
    return CorpusStats(
        n_docs=n,
        avg_question_len=q_total / n,
        avg_answer_len=a_total / n,
        category_coverage=with_category / n,
    )
