"""Graded-relevance evaluation and the alpha/w grid search.

File formats (whitespace-separated, UTF-8):

    qrels:  query-id 0 doc-id grade          grade in {0, 1, 2}
    run:    query-id Q0 doc-id rank score tag   scores printed with 6 decimals

Metric definitions follow the classic trec_eval conventions:

    mrr      reciprocal rank of the first retrieved doc with grade >= 1
    p@k      relevant docs in the top k, divided by k
    r@k      relevant docs in the top k, divided by the judged relevant count
    map      sum of precision at each relevant hit, divided by the judged
             relevant count (map@k restricts the hits to the top k but keeps
             the same denominator)
    ndcg@k   DCG@k / ideal-DCG@k with linear gain (the grade itself) and
             1/log2(rank + 1) discount; the ideal ranking sorts the judged
             grades descending

Binary metrics treat grade >= 1 as relevant. Unjudged retrieved docs count as
grade 0. A query whose judgments contain no relevant doc scores 0 on every
metric and still counts toward the means (note: this differs from trec_eval,
which drops such queries from its averages; documented so nobody is surprised
by depressed means). A run query with no judgments at all is an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import ValidationError
from .ranking import FusedResult

GRADES = (0, 1, 2)
DEFAULT_CUTOFFS = (5, 10)


@dataclass(frozen=True)
class Qrels:
    by_query: dict[str, dict[str, int]]

    def grade(self, query_id: str, doc_id: str) -> int:
        return self.by_query.get(query_id, {}).get(doc_id, 0)

    def queries(self) -> list[str]:
        return sorted(self.by_query)

    def relevant_count(self, query_id: str) -> int:
        return sum(1 for g in self.by_query.get(query_id, {}).values() if g >= 1)


@dataclass(frozen=True)
class RunRecord:
    doc_id: str
    rank: int
    score: float
    tag: str


@dataclass(frozen=True)
class RunFile:
    by_query: dict[str, list[RunRecord]]

    def queries(self) -> list[str]:
        return sorted(self.by_query)


@dataclass(frozen=True)
class MetricReport:
    per_query: dict[str, dict[str, float]]
    mean: dict[str, float]
    cutoffs: tuple[int, ...]

    def metric_names(self) -> list[str]:
        return list(self.mean)


def parse_qrels(path) -> Qrels:
    by_query: dict[str, dict[str, int]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            parts = line.split()
            if len(parts) != 4:
                raise ValidationError(f"{where}: expected 4 fields, got {len(parts)}")
            query_id, iteration, doc_id, grade_text = parts
            if iteration != "0":
                raise ValidationError(f"{where}: second field must be '0', got {iteration!r}")
            try:
                grade = int(grade_text)
            except ValueError:
                raise ValidationError(f"{where}: grade {grade_text!r} is not an integer") from None
            if grade not in GRADES:
                raise ValidationError(f"{where}: grade must be one of {GRADES}, got {grade}")
            judged = by_query.setdefault(query_id, {})
            if doc_id in judged:
                raise ValidationError(f"{where}: duplicate judgment for ({query_id}, {doc_id})")
            judged[doc_id] = grade
    if not by_query:
        raise ValidationError(f"{path}: no judgments found")
    return Qrels(by_query=by_query)


def parse_run(path) -> RunFile:
    by_query: dict[str, list[RunRecord]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            parts = line.split()
            if len(parts) != 6:
                raise ValidationError(f"{where}: expected 6 fields, got {len(parts)}")
            query_id, marker, doc_id, rank_text, score_text, tag = parts
            if marker != "Q0":
                raise ValidationError(f"{where}: second field must be 'Q0', got {marker!r}")
            try:
                rank = int(rank_text)
                score = float(score_text)
            except ValueError:
                raise ValidationError(f"{where}: bad rank or score") from None
            if not math.isfinite(score):
                raise ValidationError(f"{where}: score must be finite")
            records = by_query.setdefault(query_id, [])
            if rank != len(records) + 1:
                raise ValidationError(
                    f"{where}: rank {rank} out of order for query {query_id!r} "
                    f"(expected {len(records) + 1})")
            if records and score > records[-1].score:
                raise ValidationError(f"{where}: score increases with rank for query {query_id!r}")
            if any(r.doc_id == doc_id for r in records):
                raise ValidationError(f"{where}: duplicate doc {doc_id!r} for query {query_id!r}")
            records.append(RunRecord(doc_id=doc_id, rank=rank, score=score, tag=tag))
    if not by_query:
        raise ValidationError(f"{path}: no run records found")
    return RunFile(by_query=by_query)


def format_run_lines(result: FusedResult, tag: str | None = None) -> list[str]:
    """Serialize one query's results in the run-file format."""
    tag = tag or result.mode
    return [
        f"{result.query_id} Q0 {entry.doc_id} {i + 1} {entry.score:.6f} {tag}"
        for i, entry in enumerate(result.entries)
    ]


# --- metrics -----------------------------------------------------------------

def _query_metrics(records: list[RunRecord], judged: dict[str, int],
                   cutoffs: tuple[int, ...]) -> dict[str, float]:
    rel_total = sum(1 for g in judged.values() if g >= 1)
    gains = [judged.get(r.doc_id, 0) for r in records]
    flags = [1 if g >= 1 else 0 for g in gains]

    out: dict[str, float] = {}
    out["mrr"] = 0.0
    for i, flag in enumerate(flags):
        if flag:
            out["mrr"] = 1.0 / (i + 1)
            break

    def average_precision(limit: int | None) -> float:
        if rel_total == 0:
            return 0.0
        hits = 0
        total = 0.0
        upto = len(flags) if limit is None else min(limit, len(flags))
        for i in range(upto):
            if flags[i]:
                hits += 1
                total += hits / (i + 1)
        return total / rel_total

    out["map"] = average_precision(None)
    for k in cutoffs:
        out[f"map@{k}"] = average_precision(k)

    ideal = sorted(judged.values(), reverse=True)
    for k in cutoffs:
        dcg = sum(g / math.log2(i + 2) for i, g in enumerate(gains[:k]))
        idcg = sum(g / math.log2(i + 2) for i, g in enumerate(ideal[:k]))
        out[f"ndcg@{k}"] = dcg / idcg if idcg > 0.0 else 0.0

    for k in cutoffs:
        hits = sum(flags[:k])
        out[f"p@{k}"] = hits / k
        out[f"r@{k}"] = hits / rel_total if rel_total else 0.0
    return out


def metric_names(cutoffs: tuple[int, ...] = DEFAULT_CUTOFFS) -> list[str]:
    names = ["mrr", "map"]
    names += [f"map@{k}" for k in cutoffs]
    names += [f"ndcg@{k}" for k in cutoffs]
    names += [f"p@{k}" for k in cutoffs]
    names += [f"r@{k}" for k in cutoffs]
    return names


def metrics(run: RunFile, qrels: Qrels, cutoffs: tuple[int, ...] = DEFAULT_CUTOFFS) -> MetricReport:
    """Per-query metrics plus their arithmetic means over the run's queries."""
    if not run.by_query:
        raise ValidationError("run is empty")
    cutoffs = tuple(sorted(set(int(k) for k in cutoffs)))
    if any(k < 1 for k in cutoffs) or not cutoffs:
        raise ValidationError(f"cutoffs must be positive, got {cutoffs}")
    unjudged = [q for q in run.by_query if q not in qrels.by_query]
    if unjudged:
        raise ValidationError(f"run query {unjudged[0]!r} has no judgments in the qrels")

    per_query = {
        query_id: _query_metrics(records, qrels.by_query[query_id], cutoffs)
        for query_id, records in run.by_query.items()
    }
    names = metric_names(cutoffs)
    n = len(per_query)
    mean = {name: sum(q[name] for q in per_query.values()) / n for name in names}
    ordered = {qid: {name: per_query[qid][name] for name in names} for qid in sorted(per_query)}
    return MetricReport(per_query=ordered, mean=mean, cutoffs=cutoffs)


# --- grid search ----------------------------------------------------------------

GRID_STEPS = tuple(round(i * 0.1, 1) for i in range(11))
DEFAULT_GRID_MODES = ("tfidf", "bm25", "hybrid", "rrf")


@dataclass(frozen=True)
class GridCell:
    mode: str
    alpha: float
    w: float
    mean: dict[str, float]


@dataclass(frozen=True)
class GridResult:
    cells: tuple[GridCell, ...]
    best: GridCell
    target_metric: str
    beta: float
    rrf_k: float
    top_n: int
    top_m: int
    damping_mode: str
    cutoffs: tuple[int, ...]
    modes: tuple[str, ...] = field(default=DEFAULT_GRID_MODES)


def grid_search(index, queries: list[tuple[str, str]], qrels: Qrels, base_params,
                target_metric: str = "ndcg@5",
                modes: tuple[str, ...] = DEFAULT_GRID_MODES,
                cutoffs: tuple[int, ...] = DEFAULT_CUTOFFS,
                query_vecs: dict[str, "np.ndarray"] | None = None) -> GridResult:
    """Evaluate every (alpha, w) pair on the 11x11 grid for each mode.

    Leg scores are alpha/w-independent, so they are computed once per query
    and recombined per cell; the sweep is dominated by sorting small arrays.
    """
    from . import fusion  # local import keeps module load order flat

    if not queries:
        raise ValidationError("grid search needs at least one query")
    cutoffs = tuple(sorted(set(int(k) for k in cutoffs)))
    if target_metric not in metric_names(cutoffs):
        raise ValidationError(
            f"unknown target metric {target_metric!r}; supported: {metric_names(cutoffs)}")
    seen_qids = set()
    for query_id, _ in queries:
        if query_id in seen_qids:
            raise ValidationError(f"duplicate query id {query_id!r}")
        seen_qids.add(query_id)

    legs_by_query = {}
    for query_id, text in queries:
        if query_vecs is not None and query_id in query_vecs:
            vec = query_vecs[query_id]
        else:
            vec = fusion.resolve_query_vec(index, text, None)
        legs_by_query[query_id] = fusion.compute_legs(index, text, query_vec=vec)

    def evaluate(params, mode) -> dict[str, float]:
        by_query = {}
        for query_id, _ in queries:
            result = fusion.retrieve_from_legs(index, legs_by_query[query_id], params,
                                               mode, query_id=query_id)
            records = [RunRecord(doc_id=e.doc_id, rank=i + 1, score=e.score, tag=mode)
                       for i, e in enumerate(result.entries)]
            by_query[query_id] = records
        return metrics(RunFile(by_query=by_query), qrels, cutoffs).mean

    cells: list[GridCell] = []
    for mode in modes:
        if mode not in fusion.RETRIEVAL_MODES:
            raise ValidationError(f"unknown mode {mode!r}")
        # alpha does not enter the lexical-only modes; evaluate each distinct
        # configuration once and copy the row across the inert axis
        memo: dict[tuple, dict[str, float]] = {}
        for alpha in GRID_STEPS:
            for w in GRID_STEPS:
                key = (w,) if mode in ("tfidf", "bm25") else (alpha, w)
                if key not in memo:
                    cell_params = _cell_params(base_params, alpha, w)
                    memo[key] = evaluate(cell_params, mode)
                cells.append(GridCell(mode=mode, alpha=alpha, w=w, mean=memo[key]))

    best = cells[0]
    for cell in cells[1:]:
        if cell.mean[target_metric] > best.mean[target_metric]:
            best = cell
    return GridResult(
        cells=tuple(cells), best=best, target_metric=target_metric,
        beta=base_params.beta, rrf_k=base_params.rrf_k, top_n=base_params.top_n,
        top_m=base_params.top_m, damping_mode=base_params.damping_mode,
        cutoffs=cutoffs, modes=tuple(modes),
    )


def _cell_params(base_params, alpha: float, w: float):
    return replace(base_params, alpha=alpha, w=w)


def format_grid_report(result: GridResult) -> str:
    """Tab-separated report with a commented header, one row per (alpha, w, mode)."""
    names = metric_names(result.cutoffs)
    lines = [
        f"# beta={result.beta:g} rrf_k={result.rrf_k:g} top_n={result.top_n} "
        f"top_m={result.top_m} damping_mode={result.damping_mode}",
        f"# modes={','.join(result.modes)} target_metric={result.target_metric}",
        f"# best: mode={result.best.mode} alpha={result.best.alpha:.1f} "
        f"w={result.best.w:.1f} {result.target_metric}={result.best.mean[result.target_metric]:.6f}",
        "\t".join(["mode", "alpha", "w"] + names),
    ]
    for cell in result.cells:
        values = [f"{cell.mean[name]:.6f}" for name in names]
        lines.append("\t".join([cell.mode, f"{cell.alpha:.1f}", f"{cell.w:.1f}"] + values))
    return "\n".join(lines) + "\n"
