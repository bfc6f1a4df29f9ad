"""Consumer interfaces through which non-deterministic intelligence enters.

Each hook is optional. The engine never requires one: every call site has
a deterministic branch for the absent hook, and the defaults below are
content-derived so offline runs are reproducible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

from .errors import HookError


class LayerLabel(str, enum.Enum):
    KNOWLEDGE = "knowledge"
    MEMORY = "memory"
    WISDOM = "wisdom"


class Verdict(str, enum.Enum):
    A_SUPERSEDES_B = "a_supersedes_b"
    B_SUPERSEDES_A = "b_supersedes_a"
    INDEPENDENT = "independent"
    DUPLICATE = "duplicate"


@runtime_checkable
class EmbeddingProvider(Protocol):
    def embed(self, text: str) -> Sequence[float]: ...


@runtime_checkable
class SummaryGenerator(Protocol):
    def summarize(self, items: Sequence[str]) -> str: ...


@runtime_checkable
class ConflictArbiter(Protocol):
    def arbitrate(self, claim_a: str, claim_b: str) -> Verdict: ...


@runtime_checkable
class PersistenceClassifier(Protocol):
    def classify(self, content: str) -> LayerLabel: ...


@runtime_checkable
class Reranker(Protocol):
    def rerank(self, query: str, candidates: Sequence[tuple[str, float]]) -> Sequence[str]: ...


class IdentityReranker:
    def rerank(self, query, candidates):
        return [item_id for item_id, _ in candidates]


class IndependentArbiter:
    def arbitrate(self, claim_a, claim_b):
        return Verdict.INDEPENDENT


class TruncatingSummarizer:
    """Joins items with ``"; "`` and cuts the result to ``byte_budget`` UTF-8 bytes."""

    def __init__(self, byte_budget: int = 512):
        self.byte_budget = byte_budget

    def summarize(self, items):
        raw = "; ".join(items).encode("utf-8")[: self.byte_budget]
        return raw.decode("utf-8", errors="ignore")


@dataclass
class HookSet:
    embedding_provider: EmbeddingProvider | None = None
    summary_generator: SummaryGenerator | None = None
    conflict_arbiter: ConflictArbiter | None = None
    persistence_classifier: PersistenceClassifier | None = None
    reranker: Reranker | None = None


NULL_HOOKS = HookSet()


def call_hook(name: str, fn, *args):
    """Invoke a hook method, converting any failure into :class:`HookError`."""
    try:
        return fn(*args)
    except HookError:
        raise
    except Exception as exc:
        raise HookError(f"{name} hook failed: {exc}") from exc


def summarize(items: Sequence[str], hooks: HookSet | None) -> str:
    gen = hooks.summary_generator if hooks else None
    if gen is None:
        return TruncatingSummarizer().summarize(items)
    return str(call_hook("summary_generator", gen.summarize, list(items)))


def arbitrate(claim_a: str, claim_b: str, hooks: HookSet | None) -> Verdict:
    arb = hooks.conflict_arbiter if hooks else None
    if arb is None:
        return Verdict.INDEPENDENT
    return Verdict(call_hook("conflict_arbiter", arb.arbitrate, claim_a, claim_b))


def embed_all(texts: dict[str, str], hooks: HookSet | None) -> dict[str, list[float]] | None:
    """Embeddings keyed like ``texts``, or None when no provider is configured."""
    provider = hooks.embedding_provider if hooks else None
    if provider is None:
        return None
    return {k: list(call_hook("embedding_provider", provider.embed, v)) for k, v in texts.items()}
