"""Ranking machinery: BM25 lexical scoring, exact cosine scan, RRF and rerank.

Everything here is a pure function over the inputs it is handed, so the
same corpus, query and configuration always produce the same ranking.
Ties are broken by ascending item id.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ContractViolation, HookError, ParameterError, ValidationError

BM25_K1 = 1.2
BM25_B = 0.75

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on anything that is not a letter or digit."""
    return _TOKEN.findall(text.lower())


@dataclass
class RankedList:
    items: list[tuple[str, float]] = field(default_factory=list)
    source_label: str = ""

    def __post_init__(self):
        self.items = sorted(((str(i), float(s)) for i, s in self.items), key=lambda p: (-p[1], p[0]))

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def ids(self) -> list[str]:
        return [i for i, _ in self.items]

    def score_of(self, item_id: str) -> float | None:
        for i, s in self.items:
            if i == item_id:
                return s
        return None

    def top(self, k: int) -> RankedList:
        return RankedList(self.items[:k], self.source_label)


@dataclass(frozen=True)
class FusionConfig:
    rrf_constant: float = 60.0
    lists_required: int = 1

    def __post_init__(self):
        if self.rrf_constant <= 0:
            raise ParameterError("rrf_constant must be positive")
        if self.lists_required < 1:
            raise ParameterError("lists_required must be >= 1")


def _pairs(corpus: Mapping[str, str] | Iterable[tuple[str, str]]) -> list[tuple[str, str]]:
    if isinstance(corpus, Mapping):
        return [(str(k), v) for k, v in corpus.items()]
    return [(str(k), v) for k, v in corpus]


def bm25_scores(corpus, query: str, k1: float = BM25_K1, b: float = BM25_B) -> dict[str, float]:
    """BM25 score of every document in ``corpus`` (zero where nothing matches).

    Uses the non-negative idf ``ln(1 + (N - n + 0.5) / (n + 0.5))`` so a term
    present in half the corpus still contributes.
    """
    docs = _pairs(corpus)
    if not docs:
        return {}
    tokenized = []
    for doc_id, text in docs:
        toks = tokenize(text)
        tokenized.append((doc_id, Counter(toks), len(toks)))
    n_docs = len(tokenized)
    avgdl = sum(length for _, _, length in tokenized) / n_docs or 1.0
    terms = sorted(set(tokenize(query)))
    df = {t: sum(1 for _, tf, _ in tokenized if t in tf) for t in terms}
    idf = {t: math.log(1.0 + (n_docs - df[t] + 0.5) / (df[t] + 0.5)) for t in terms}
    scores = {}
    for doc_id, tf, length in tokenized:
        norm = k1 * (1.0 - b + b * length / avgdl)
        s = 0.0
        for t in terms:
            f = tf.get(t, 0)
            if f:
                s += idf[t] * f * (k1 + 1.0) / (f + norm)
        scores[doc_id] = s
    return scores


def lexical_rank(corpus, query: str, k: int) -> RankedList:
    if k < 1:
        raise ValidationError("k must be >= 1")
    scores = bm25_scores(corpus, query)
    hits = RankedList([(d, s) for d, s in scores.items() if s > 0.0], "lexical")
    return hits.top(k)


def vector_rank(embeddings: Mapping[str, Sequence[float]], query_vector: Sequence[float], k: int) -> RankedList:
    """Exact cosine similarity over every stored vector."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    if not embeddings:
        return RankedList([], "vector")
    ids = [str(i) for i in embeddings]
    try:
        mat = np.asarray([embeddings[i] for i in embeddings], dtype=np.float64)
    except ValueError as exc:
        raise ValidationError("embeddings have inconsistent dimensions") from exc
    q = np.asarray(query_vector, dtype=np.float64)
    if mat.ndim != 2 or q.ndim != 1 or mat.shape[1] != q.shape[0]:
        raise ValidationError(
            f"dimension mismatch: corpus {mat.shape[1:] if mat.ndim == 2 else mat.shape}, query {q.shape}"
        )
    norms = np.linalg.norm(mat, axis=1) * np.linalg.norm(q)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(norms > 0, mat @ q / np.where(norms > 0, norms, 1.0), 0.0)
    return RankedList(list(zip(ids, sims.tolist())), "vector").top(k)


def rrf_fuse(lists: Sequence[RankedList], config: FusionConfig | None = None) -> RankedList:
    """Reciprocal-rank fusion: ``sum 1 / (k0 + rank)`` with ranks from 1."""
    if not lists:
        raise ValidationError("rrf_fuse needs at least one list")
    config = config or FusionConfig()
    parts: dict[str, list[float]] = {}
    for ranked in lists:
        for rank, (item_id, _) in enumerate(ranked.items, start=1):
            parts.setdefault(item_id, []).append(1.0 / (config.rrf_constant + rank))
    # fsum is correctly rounded, so the result does not depend on list order
    return RankedList(
        [(i, math.fsum(p)) for i, p in parts.items() if len(p) >= config.lists_required],
        "rrf(" + ",".join(sorted(r.source_label for r in lists)) + ")",
    )


def rerank(query: str, candidates: RankedList, reranker=None) -> RankedList:
    """Stage-2 reorder. Without a hook the input order is returned untouched.

    The hook returns candidate ids in its preferred order; the output keeps
    the candidate set and assigns descending positional scores.
    """
    if reranker is None:
        return RankedList(list(candidates.items), candidates.source_label)
    try:
        order = [str(i) for i in reranker.rerank(query, list(candidates.items))]
    except Exception as exc:
        raise HookError(f"reranker failed: {exc}") from exc
    given = set(candidates.ids)
    if set(order) != given or len(order) != len(given):
        foreign = sorted(set(order) - given)
        raise ContractViolation(
            f"reranker must return a permutation of the candidates (foreign={foreign})"
        )
    n = len(order)
    return RankedList([(i, float(n - pos)) for pos, i in enumerate(order)], candidates.source_label + "+rerank")
