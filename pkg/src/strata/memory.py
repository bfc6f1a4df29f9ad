"""Experiential substrate: an event log projected into decaying facts.

Each fact carries a bi-temporal stamp and its own forgetting-curve
parameters. Retrievability is recomputed at query time from
``(initial strength, last reinforcement, reinforcement count)``; the only
storage-level consequence of decay is :meth:`MemoryStore.sweep`, which
archives facts that have fallen below the recall threshold. Archived facts
stay in the log and stay reachable with ``include_archived=True``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ._store import EventSourcedStore
from .chrono import BitemporalStamp, DecayParams, check_timestamp, reinforced_half_life, retention, visible_as_of
from .errors import NotFoundError, StateError, ValidationError
from .retrieval import bm25_scores, tokenize


class EventKind(str, enum.Enum):
    CONTEXT_CREATED = "context_created"
    OBSERVED = "observed"
    REINFORCED = "reinforced"
    INVALIDATED = "invalidated"
    ARCHIVED = "archived"
    INTENTION_SCHEDULED = "intention_scheduled"
    INTENTION_SURFACED = "intention_surfaced"
    INTENTION_COMPLETED = "intention_completed"
    CONSOLIDATED = "consolidated"


@dataclass
class MemoryFact:
    id: str
    content: str
    context_id: str
    stamp: BitemporalStamp
    initial_strength: float
    half_life: int
    growth: float
    half_life_cap: int
    last_reinforced: int
    session_id: str | None = None
    reinforcement_count: int = 0
    archived: bool = False

    @property
    def effective_half_life(self) -> float:
        return reinforced_half_life(self.half_life, self.reinforcement_count, self.growth, self.half_life_cap)

    def retrievability(self, now: int) -> float:
        return retention(self.initial_strength, max(0, now - self.last_reinforced), self.effective_half_life)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "content": self.content,
            "context_id": self.context_id,
            "session_id": self.session_id,
            "stamp": self.stamp.to_dict(),
            "initial_strength": self.initial_strength,
            "half_life": self.half_life,
            "growth": self.growth,
            "half_life_cap": self.half_life_cap,
            "last_reinforced": self.last_reinforced,
            "reinforcement_count": self.reinforcement_count,
            "archived": self.archived,
        }

    @classmethod
    def from_dict(cls, d: dict) -> MemoryFact:
        d = dict(d)
        d["stamp"] = BitemporalStamp.from_dict(d["stamp"])
        return cls(**d)


@dataclass(frozen=True)
class TimeTrigger:
    due_at: int


@dataclass(frozen=True)
class EventTrigger:
    tag: str


class IntentionStatus(str, enum.Enum):
    PENDING = "pending"
    SURFACED = "surfaced"
    COMPLETED = "completed"
    EXPIRED = "expired"


@dataclass
class Intention:
    id: str
    description: str
    trigger: TimeTrigger | EventTrigger
    context_id: str
    created_at: int
    status: IntentionStatus = IntentionStatus.PENDING
    surfaced_at: int | None = None

    def to_dict(self) -> dict:
        trig = (
            {"time_based": self.trigger.due_at}
            if isinstance(self.trigger, TimeTrigger)
            else {"event_based": self.trigger.tag}
        )
        return {
            "id": self.id,
            "description": self.description,
            "trigger": trig,
            "context_id": self.context_id,
            "created_at": self.created_at,
            "status": self.status.value,
            "surfaced_at": self.surfaced_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Intention:
        trig = d["trigger"]
        trigger = TimeTrigger(trig["time_based"]) if "time_based" in trig else EventTrigger(trig["event_based"])
        return cls(d["id"], d["description"], trigger, d["context_id"], d["created_at"],
                   IntentionStatus(d["status"]), d["surfaced_at"])


@dataclass
class RecallHit:
    fact: MemoryFact
    score: float
    relevance: float
    retrievability: float
    layer: str = "memory"
    explanation: dict = field(default_factory=dict)

    @property
    def item_id(self) -> str:
        return self.fact.id

    @property
    def text(self) -> str:
        return self.fact.content


class MemoryStore(EventSourcedStore):
    store_tag = "memory"
    event_kinds = frozenset(k.value for k in EventKind)

    def __init__(self, log=None, clock=None, decay: DecayParams | None = None):
        super().__init__(log, clock)
        self.decay = decay or DecayParams()
        self.contexts: dict[str, str] = {}
        self.facts: dict[str, MemoryFact] = {}
        self.intentions: dict[str, Intention] = {}
        self.consolidations: dict[str, dict] = {}

    @property
    def recall_threshold(self) -> float:
        return self.decay.recall_threshold

    # -- writes -------------------------------------------------------------

    def create_context(self, context_id: str, name: str | None = None, now: int | None = None) -> str:
        if not context_id:
            raise ValidationError("context id must be non-empty")
        with self.log.lock:
            if context_id in self.contexts:
                raise ValidationError(f"context {context_id!r} already exists")
            self._emit("context_created", context_id=context_id, name=name or context_id, at=self._now(now))
        return context_id

    def _require_context(self, context_id: str) -> None:
        if context_id not in self.contexts:
            raise NotFoundError(f"unknown context {context_id!r}")

    def _fact(self, memory_id: str) -> MemoryFact:
        try:
            return self.facts[memory_id]
        except KeyError:
            raise NotFoundError(f"unknown memory {memory_id}") from None

    def observe(
        self,
        content: str,
        context_id: str,
        valid_from: int | None = None,
        now: int | None = None,
        session_id: str | None = None,
        decay: DecayParams | None = None,
    ) -> str:
        if not content or not content.strip():
            raise ValidationError("memory content must be non-empty")
        decay = decay or self.decay
        with self.log.lock:
            self._require_context(context_id)
            now = self._now(now)
            stamp = BitemporalStamp(now, now if valid_from is None else check_timestamp(valid_from, "valid_from"))
            mid = f"m{self.log.last_seq + 1:07d}"
            fact = MemoryFact(
                mid, content, context_id, stamp, decay.initial_strength, decay.half_life,
                decay.reinforcement_growth, decay.half_life_cap, last_reinforced=now, session_id=session_id,
            )
            self._emit("observed", fact=fact.to_dict())
        return mid

    def reinforce(self, memory_id: str, now: int | None = None) -> float:
        """Reset elapsed time and grow the half-life; returns retrievability at ``now``."""
        with self.log.lock:
            fact = self._fact(memory_id)
            if fact.archived:
                raise StateError(f"memory {memory_id} is archived")
            now = self._now(now)
            if now < fact.last_reinforced:
                raise ValidationError("reinforcement cannot precede the previous one")
            self._emit("reinforced", id=memory_id, at=now)
        return fact.retrievability(now)

    def invalidate(self, memory_id: str, valid_until: int, reason: str = "", now: int | None = None) -> None:
        with self.log.lock:
            fact = self._fact(memory_id)
            check_timestamp(valid_until, "valid_until")
            if valid_until < fact.stamp.valid_from:
                raise ValidationError("valid_until precedes the fact's valid_from")
            self._emit("invalidated", id=memory_id, valid_until=valid_until, reason=reason, at=self._now(now))

    def sweep(self, context_id: str | None = None, now: int | None = None) -> list[str]:
        """Archive every live fact whose retrievability has dropped below threshold."""
        with self.log.lock:
            now = self._now(now)
            doomed = self.sweep_candidates(context_id, now)
            for mid in doomed:
                self._emit("archived", id=mid, at=now)
        return doomed

    def sweep_candidates(self, context_id: str | None, now: int) -> list[str]:
        return sorted(
            f.id
            for f in self.facts.values()
            if not f.archived
            and (context_id is None or f.context_id == context_id)
            and f.retrievability(now) < self.recall_threshold
        )

    def record_consolidation(self, pattern_key: str, member_ids, entry_id: str, now: int | None = None) -> None:
        with self.log.lock:
            for mid in member_ids:
                self._fact(mid)
            self._emit(
                "consolidated", pattern_key=pattern_key, member_ids=sorted(member_ids), entry_id=entry_id,
                at=self._now(now),
            )

    # -- prospective memory -------------------------------------------------

    def schedule_intention(self, description: str, trigger, context_id: str, now: int | None = None) -> str:
        if not description or not description.strip():
            raise ValidationError("intention description must be non-empty")
        with self.log.lock:
            self._require_context(context_id)
            now = self._now(now)
            if isinstance(trigger, TimeTrigger):
                check_timestamp(trigger.due_at, "due_at")
                if trigger.due_at <= now:
                    raise ValidationError("time-based intention must be due in the future")
            elif isinstance(trigger, EventTrigger):
                if not trigger.tag:
                    raise ValidationError("event trigger tag must be non-empty")
            else:
                raise ValidationError(f"unsupported trigger {trigger!r}")
            iid = f"i{self.log.last_seq + 1:07d}"
            intent = Intention(iid, description, trigger, context_id, now)
            self._emit("intention_scheduled", intention=intent.to_dict())
        return iid

    def _intention(self, intention_id: str) -> Intention:
        try:
            return self.intentions[intention_id]
        except KeyError:
            raise NotFoundError(f"unknown intention {intention_id}") from None

    def list_due(self, now: int | None = None) -> list[Intention]:
        now = self._now(now)
        due = [
            i for i in self.intentions.values()
            if i.status is IntentionStatus.PENDING and isinstance(i.trigger, TimeTrigger) and i.trigger.due_at <= now
        ]
        return sorted(due, key=lambda i: (i.trigger.due_at, i.id))

    def next_due_time(self) -> int | None:
        pending = [
            i.trigger.due_at for i in self.intentions.values()
            if i.status is IntentionStatus.PENDING and isinstance(i.trigger, TimeTrigger)
        ]
        return min(pending, default=None)

    def mark_surfaced(self, intention_id: str, now: int | None = None) -> None:
        with self.log.lock:
            intent = self._intention(intention_id)
            if intent.status is not IntentionStatus.PENDING:
                raise StateError(f"intention {intention_id} is {intent.status.value}")
            self._emit("intention_surfaced", id=intention_id, at=self._now(now))

    def trigger_event(self, tag: str, now: int | None = None) -> list[Intention]:
        with self.log.lock:
            now = self._now(now)
            hits = sorted(
                (i for i in self.intentions.values()
                 if i.status is IntentionStatus.PENDING and isinstance(i.trigger, EventTrigger) and i.trigger.tag == tag),
                key=lambda i: i.id,
            )
            for intent in hits:
                self._emit("intention_surfaced", id=intent.id, at=now)
        return hits

    def complete_intention(self, intention_id: str, now: int | None = None) -> None:
        with self.log.lock:
            intent = self._intention(intention_id)
            if intent.status in (IntentionStatus.COMPLETED, IntentionStatus.EXPIRED):
                raise StateError(f"intention {intention_id} is {intent.status.value}")
            self._emit("intention_completed", id=intention_id, at=self._now(now))

    # -- projection ---------------------------------------------------------

    def _apply_context_created(self, rec):
        self.contexts[rec.body["context_id"]] = rec.body["name"]

    def _apply_observed(self, rec):
        fact = MemoryFact.from_dict(rec.body["fact"])
        self.facts[fact.id] = fact

    def _apply_reinforced(self, rec):
        fact = self.facts[rec.body["id"]]
        fact.reinforcement_count += 1
        fact.last_reinforced = rec.body["at"]

    def _apply_invalidated(self, rec):
        fact = self.facts[rec.body["id"]]
        fact.stamp = fact.stamp.with_valid_until(rec.body["valid_until"])

    def _apply_archived(self, rec):
        self.facts[rec.body["id"]].archived = True

    def _apply_intention_scheduled(self, rec):
        intent = Intention.from_dict(rec.body["intention"])
        self.intentions[intent.id] = intent

    def _apply_intention_surfaced(self, rec):
        intent = self.intentions[rec.body["id"]]
        intent.status = IntentionStatus.SURFACED
        intent.surfaced_at = rec.body["at"]

    def _apply_intention_completed(self, rec):
        intent = self.intentions[rec.body["id"]]
        intent.status = IntentionStatus.COMPLETED
        if intent.surfaced_at is None:
            intent.surfaced_at = rec.body["at"]

    def _apply_consolidated(self, rec):
        b = rec.body
        self.consolidations[b["pattern_key"]] = {"member_ids": b["member_ids"], "entry_id": b["entry_id"], "at": b["at"]}

    # -- reads --------------------------------------------------------------

    def get(self, memory_id: str) -> MemoryFact:
        return self._fact(memory_id)

    def facts_in(self, context_id: str | None = None, include_archived: bool = False) -> list[MemoryFact]:
        return [
            f for f in self.facts.values()
            if (context_id is None or f.context_id == context_id) and (include_archived or not f.archived)
        ]

    def candidates(
        self,
        context_id: str,
        now: int,
        as_of: tuple[int, int] | None = None,
        include_archived: bool = False,
    ) -> list[MemoryFact]:
        system_time, valid_time = as_of if as_of is not None else (now, now)
        return [
            f for f in self.facts_in(context_id, include_archived)
            if visible_as_of(f.stamp, system_time, valid_time)
        ]

    def recall(
        self,
        query: str,
        context_id: str,
        k: int = 10,
        now: int | None = None,
        as_of: tuple[int, int] | None = None,
        include_archived: bool = False,
    ) -> list[RecallHit]:
        """Rank facts of one context by ``relevance * retrievability``.

        Relevance is BM25 over the visible candidates (1.0 for every fact when
        the query has no terms). Facts with zero relevance, or retrievability
        below the threshold, are dropped; ``include_archived`` lifts both the
        archive filter and the threshold.
        """
        if k < 1:
            raise ValidationError("k must be >= 1")
        self._require_context(context_id)
        now = self._now(now)
        pool = self.candidates(context_id, now, as_of, include_archived)
        if tokenize(query):
            rel = bm25_scores({f.id: f.content for f in pool}, query)
        else:
            rel = {f.id: 1.0 for f in pool}
        hits = []
        for f in pool:
            r = rel.get(f.id, 0.0)
            if r <= 0.0:
                continue
            ret = f.retrievability(now)
            if ret < self.recall_threshold and not include_archived:
                continue
            hits.append(RecallHit(f, r * ret, r, ret, explanation={"archived": f.archived}))
        hits.sort(key=lambda h: (-h.score, -h.fact.stamp.system_created, h.fact.id))
        return hits[:k]

    # -- state --------------------------------------------------------------

    def canonical_state(self) -> dict:
        return {
            "contexts": [{"id": c, "name": self.contexts[c]} for c in sorted(self.contexts)],
            "facts": [self.facts[f].to_dict() for f in sorted(self.facts)],
            "intentions": [self.intentions[i].to_dict() for i in sorted(self.intentions)],
            "consolidations": [{"pattern_key": k, **self.consolidations[k]} for k in sorted(self.consolidations)],
        }

    def load_state(self, state: dict) -> None:
        self.__init__(self.log, self.clock, self.decay)
        for c in state["contexts"]:
            self.contexts[c["id"]] = c["name"]
        for f in state["facts"]:
            self.facts[f["id"]] = MemoryFact.from_dict(f)
        for i in state["intentions"]:
            self.intentions[i["id"]] = Intention.from_dict(i)
        for c in state["consolidations"]:
            c = dict(c)
            self.consolidations[c.pop("pattern_key")] = c
