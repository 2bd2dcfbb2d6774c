"""Ranked-list containers shared by the lexical, dense and fusion rankers."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ValidationError


def sort_pairs(score_by_id: dict[str, float], drop_zero: bool = False) -> list[tuple[str, float]]:
    """Order (doc id, score) pairs by descending score, ties by ascending id."""
    items = score_by_id.items()
    if drop_zero:
        items = [(d, s) for d, s in items if s != 0.0]
    return sorted(items, key=lambda pair: (-pair[1], pair[0]))


@dataclass(frozen=True)
class RankedList:
    """Output of a single ranker. Ranks are implicit 1-based positions."""

    query_id: str
    pairs: tuple[tuple[str, float], ...]
    ranker: str

    def __post_init__(self):
        ids = [d for d, _ in self.pairs]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"ranked list {self.ranker!r} repeats a doc id")
        scores = [s for _, s in self.pairs]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValidationError(f"ranked list {self.ranker!r} scores increase with rank")

    def __len__(self) -> int:
        return len(self.pairs)

    def ranks(self) -> dict[str, int]:
        return {doc_id: i + 1 for i, (doc_id, _) in enumerate(self.pairs)}


@dataclass(frozen=True)
class FusedEntry:
    doc_id: str
    score: float
    # ranker tag -> 1-based rank in that ranker's list; absent tag means the
    # doc did not appear in that list
    provenance: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class FusedResult:
    """Final ordered retrieval output, also used for single-ranker modes."""

    query_id: str
    entries: tuple[FusedEntry, ...]
    mode: str

    def __len__(self) -> int:
        return len(self.entries)

    def doc_ids(self) -> list[str]:
        return [e.doc_id for e in self.entries]

    def truncated(self, m: int) -> "FusedResult":
        return FusedResult(self.query_id, self.entries[:m], self.mode)
