"""Query routing, ephemeral sessions and the flat control store.

A query reaches exactly one layer. The label comes from the caller (an
oracle), else from a classifier hook, else from a keyword cascade whose
lexicons live in the engine config.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

from .config import RouterLexicon
from .hooks import HookSet, LayerLabel, call_hook
from .retrieval import RankedList, lexical_rank, tokenize

# queries carrying one of these want the newest event first
RECENCY_MARKERS = ("last", "latest", "recent", "recently", "most recent")
# chronological answers only consider facts at least this relevant relative to the best match
CHRONO_FOCUS = 0.5


class LabelSource(str, enum.Enum):
    ORACLE = "oracle"
    CLASSIFIER_HOOK = "classifier_hook"
    HEURISTIC = "heuristic"


def _has_marker(tokens: list[str], marker: str) -> bool:
    words = tokenize(marker)
    if not words:
        return False
    n = len(words)
    return any(tokens[i : i + n] == words for i in range(len(tokens) - n + 1))


def has_temporal_marker(text: str, lexicon: RouterLexicon | None = None) -> bool:
    tokens = tokenize(text)
    return any(_has_marker(tokens, m) for m in (lexicon or RouterLexicon()).temporal)


def wants_newest_first(text: str) -> bool:
    tokens = tokenize(text)
    return any(_has_marker(tokens, m) for m in RECENCY_MARKERS)


def classify_heuristic(query_text: str, lexicon: RouterLexicon | None = None) -> LayerLabel:
    """Temporal markers go to memory, directive markers to wisdom, the rest to knowledge."""
    lexicon = lexicon or RouterLexicon()
    tokens = tokenize(query_text)
    if any(_has_marker(tokens, m) for m in lexicon.temporal):
        return LayerLabel.MEMORY
    if any(_has_marker(tokens, m) for m in lexicon.directive):
        return LayerLabel.WISDOM
    return LayerLabel.KNOWLEDGE


@dataclass(frozen=True)
class RoutedQuery:
    text: str
    label: LayerLabel | None = None
    label_source: LabelSource | None = None
    as_of: tuple[int, int] | None = None


def resolve_label(query: RoutedQuery, hooks: HookSet | None = None, lexicon: RouterLexicon | None = None) -> RoutedQuery:
    """Fill in label and label_source using the oracle, hook, heuristic chain."""
    if query.label is not None:
        return RoutedQuery(query.text, LayerLabel(query.label), query.label_source or LabelSource.ORACLE, query.as_of)
    classifier = hooks.persistence_classifier if hooks else None
    if classifier is not None:
        label = LayerLabel(call_hook("persistence_classifier", classifier.classify, query.text))
        return RoutedQuery(query.text, label, LabelSource.CLASSIFIER_HOOK, query.as_of)
    return RoutedQuery(query.text, classify_heuristic(query.text, lexicon), LabelSource.HEURISTIC, query.as_of)


@dataclass
class Answer:
    layer: str
    item_id: str
    text: str
    score: float
    explanation: dict = field(default_factory=dict)


def route(
    query: RoutedQuery,
    substrate,
    hooks: HookSet | None = None,
    k: int = 5,
    now: int | None = None,
    context_id: str | None = None,
) -> list[Answer]:
    """Dispatch one query to its layer and return attributed answers."""
    hooks = hooks if hooks is not None else substrate.hooks
    lexicon = substrate.config.lexicon
    q = resolve_label(query, hooks, lexicon)
    base = {"label": q.label.value, "label_source": q.label_source.value}

    if q.label is LayerLabel.KNOWLEDGE:
        hits = substrate.knowledge.search_knowledge(q.text, k, hooks=hooks, fusion=substrate.config.fusion)
        return [Answer("knowledge", h.item_id, h.text, h.score, {**base, **h.explanation}) for h in hits]

    if q.label is LayerLabel.MEMORY:
        mem = substrate.memory
        now = mem._now(now)
        contexts = [context_id] if context_id is not None else sorted(mem.contexts)
        hits = []
        for ctx in contexts:
            hits.extend(mem.recall(q.text, ctx, k=max(1, len(mem.facts)), now=now, as_of=q.as_of))
        if has_temporal_marker(q.text, lexicon):
            newest = wants_newest_first(q.text)
            best = max((h.relevance for h in hits), default=0.0)
            hits = [h for h in hits if h.relevance >= CHRONO_FOCUS * best]
            hits.sort(key=lambda h: (h.fact.stamp.valid_from, h.fact.stamp.system_created, h.fact.id), reverse=newest)
            order = "newest_first" if newest else "chronological"
        else:
            hits.sort(key=lambda h: (-h.score, -h.fact.stamp.system_created, h.fact.id))
            order = "score"
        return [
            Answer("memory", h.fact.id, h.fact.content, h.score,
                   {**base, "order": order, "valid_from": h.fact.stamp.valid_from, "retrievability": h.retrievability})
            for h in hits[:k]
        ]

    hits = substrate.wisdom.search_directives(q.text, k, context=context_id)
    return [Answer("wisdom", e.id, e.directive, s, {**base, "tier": e.tier.value}) for e, s in hits]


class FlatStore:
    """Control condition: one lexical corpus, no layers, no decay, no supersession."""

    def __init__(self):
        self.docs: dict[str, str] = {}

    def add(self, item_id: str, text: str) -> None:
        self.docs[str(item_id)] = text

    def __len__(self) -> int:
        return len(self.docs)

    @classmethod
    def from_substrate(cls, substrate) -> FlatStore:
        flat = cls()
        for c in substrate.knowledge.claims.values():
            flat.add(c.id, c.statement)
        for f in substrate.memory.facts.values():
            flat.add(f.id, f.content)
        for e in substrate.wisdom.entries.values():
            flat.add(e.id, e.directive)
        return flat

    def rank(self, query: str, k: int) -> RankedList:
        return lexical_rank(self.docs, query, k)

    def flat_query(self, query: str, k: int = 5) -> list[Answer]:
        return [Answer("flat", i, self.docs[i], s, {}) for i, s in self.rank(query, k)]


_session_ids = itertools.count(1)


class Session:
    """Inference-time scratch space. Reads never touch the stores; writes go
    through explicit methods and land in the shared log like any other write."""

    def __init__(self, substrate, context_id: str | None = None, hooks: HookSet | None = None, session_id: str | None = None):
        self.substrate = substrate
        self.context_id = context_id
        self.hooks = hooks if hooks is not None else substrate.hooks
        self.id = session_id or f"s{next(_session_ids):06d}"
        self.started_at = substrate.clock.now()
        self.working_set: dict = {}

    def query(self, text: str, label: LayerLabel | None = None, as_of=None, k: int = 5, now: int | None = None) -> list[Answer]:
        rq = RoutedQuery(text, label, LabelSource.ORACLE if label is not None else None, as_of)
        answers = route(rq, self.substrate, self.hooks, k, now, self.context_id)
        self.working_set.setdefault("answers", []).append((text, answers))
        return answers

    def observe(self, content: str, now: int | None = None, valid_from: int | None = None) -> str:
        return self.substrate.memory.observe(content, self.context_id, valid_from, now, session_id=self.id)

    def drop(self) -> None:
        self.working_set.clear()
