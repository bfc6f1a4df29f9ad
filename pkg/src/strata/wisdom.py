"""Behavioral directives promoted through evidence gates.

An entry starts as a *prediction*. It becomes *core* once corroborated in
enough distinct sessions with no contradiction on record, and *anchor* once
it has survived enough consolidation cycles on top of that. Tier changes
happen only inside :meth:`WisdomStore.review`, one tier per call. A
contradiction parks the entry in review instead of demoting it; someone
then retires it or reinstates it. Clock time alone never changes anything.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ._store import EventSourcedStore
from .errors import NotFoundError, StateError, ValidationError
from .knowledge import Provenance
from .retrieval import lexical_rank


class Tier(str, enum.Enum):
    PREDICTION = "prediction"
    CORE = "core"
    ANCHOR = "anchor"


TIER_RANK = {Tier.PREDICTION: 0, Tier.CORE: 1, Tier.ANCHOR: 2}


class EntryStatus(str, enum.Enum):
    ACTIVE = "active"
    UNDER_REVIEW = "under_review"
    RETIRED = "retired"


class Change(str, enum.Enum):
    PROPOSED = "proposed"
    CORROBORATED = "corroborated"
    CONTRADICTED = "contradicted"
    PROMOTED = "promoted"
    DEMOTED = "demoted"
    RETIRED = "retired"
    REPLACED = "replaced"
    REVIEWED = "reviewed"
    REINSTATED = "reinstated"
    CYCLE_SURVIVED = "cycle_survived"


@dataclass(frozen=True)
class GateConfig:
    core_min_sessions: int = 3
    anchor_min_cycles: int = 10

    def __post_init__(self):
        if self.core_min_sessions < 1 or self.anchor_min_cycles < 1:
            raise ValidationError("gate thresholds must be >= 1")


@dataclass
class EvidenceLedger:
    episode_refs: set[str] = field(default_factory=set)
    session_ids: set[str] = field(default_factory=set)
    contradiction_count: int = 0
    cycles_survived: int = 0

    def snapshot(self) -> dict:
        return {
            "episode_refs": sorted(self.episode_refs),
            "session_ids": sorted(self.session_ids),
            "contradiction_count": self.contradiction_count,
            "cycles_survived": self.cycles_survived,
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvidenceLedger:
        return cls(set(d["episode_refs"]), set(d["session_ids"]), d["contradiction_count"], d["cycles_survived"])


@dataclass(frozen=True)
class RevisionRecord:
    at: int
    change: Change
    detail: str
    evidence_snapshot: dict

    def to_dict(self) -> dict:
        return {"at": self.at, "change": self.change.value, "detail": self.detail, "evidence": self.evidence_snapshot}


@dataclass
class WisdomEntry:
    id: str
    directive: str
    provenance: Provenance
    created_at: int
    context_id: str | None = None
    tier: Tier = Tier.PREDICTION
    status: EntryStatus = EntryStatus.ACTIVE
    evidence: EvidenceLedger = field(default_factory=EvidenceLedger)
    revision_log: list[RevisionRecord] = field(default_factory=list)
    replaced_by: str | None = None
    contradicted_this_cycle: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "directive": self.directive,
            "provenance": self.provenance.to_dict(),
            "created_at": self.created_at,
            "context_id": self.context_id,
            "tier": self.tier.value,
            "status": self.status.value,
            "evidence": self.evidence.snapshot(),
            "revision_log": [r.to_dict() for r in self.revision_log],
            "replaced_by": self.replaced_by,
            "contradicted_this_cycle": self.contradicted_this_cycle,
        }

    @classmethod
    def from_dict(cls, d: dict) -> WisdomEntry:
        return cls(
            id=d["id"],
            directive=d["directive"],
            provenance=Provenance.from_dict(d["provenance"]),
            created_at=d["created_at"],
            context_id=d["context_id"],
            tier=Tier(d["tier"]),
            status=EntryStatus(d["status"]),
            evidence=EvidenceLedger.from_dict(d["evidence"]),
            revision_log=[RevisionRecord(r["at"], Change(r["change"]), r["detail"], r["evidence"]) for r in d["revision_log"]],
            replaced_by=d["replaced_by"],
            contradicted_this_cycle=d["contradicted_this_cycle"],
        )


@dataclass(frozen=True)
class TierDecision:
    entry_id: str
    from_tier: Tier
    to_tier: Tier

    @property
    def promoted(self) -> bool:
        return self.to_tier is not self.from_tier


def gate_decision(tier: Tier, status: EntryStatus, ledger: EvidenceLedger, gate: GateConfig) -> Tier:
    """Tier an entry should hold after one review; never skips a tier."""
    if status is not EntryStatus.ACTIVE or ledger.contradiction_count != 0:
        return tier
    if tier is Tier.PREDICTION and len(ledger.session_ids) >= gate.core_min_sessions:
        return Tier.CORE
    if tier is Tier.CORE and ledger.cycles_survived >= gate.anchor_min_cycles:
        return Tier.ANCHOR
    return tier


class WisdomStore(EventSourcedStore):
    store_tag = "wisdom"
    event_kinds = frozenset({"proposed", "corroborated", "contradicted", "reviewed", "retired", "reinstated", "cycle_closed"})

    def __init__(self, log=None, clock=None, gate: GateConfig | None = None):
        super().__init__(log, clock)
        self.gate = gate or GateConfig()
        self.entries: dict[str, WisdomEntry] = {}

    def get(self, entry_id: str) -> WisdomEntry:
        try:
            return self.entries[entry_id]
        except KeyError:
            raise NotFoundError(f"unknown wisdom entry {entry_id}") from None

    def _open_entry(self, entry_id: str) -> WisdomEntry:
        entry = self.get(entry_id)
        if entry.status is EntryStatus.RETIRED:
            raise StateError(f"wisdom entry {entry_id} is retired")
        return entry

    # -- writes -------------------------------------------------------------

    def propose(
        self,
        directive: str,
        episode_ref: str | None,
        session_id: str | None,
        provenance: Provenance,
        now: int | None = None,
        context_id: str | None = None,
    ) -> str:
        if not directive or not directive.strip():
            raise ValidationError("directive must be non-empty")
        with self.log.lock:
            now = self._now(now)
            wid = f"w{self.log.last_seq + 1:07d}"
            self._emit(
                "proposed", id=wid, directive=directive, provenance=provenance.to_dict(), at=now,
                context_id=context_id,
                episode_refs=[episode_ref] if episode_ref else [],
                session_ids=[session_id] if session_id else [],
            )
        return wid

    def corroborate(self, entry_id: str, episode_ref: str | None, session_id: str | None, now: int | None = None) -> None:
        with self.log.lock:
            self._open_entry(entry_id)
            self._emit("corroborated", id=entry_id, episode_ref=episode_ref, session_id=session_id, at=self._now(now))

    def contradict(self, entry_id: str, episode_ref: str | None, detail: str = "", now: int | None = None) -> None:
        with self.log.lock:
            self._open_entry(entry_id)
            self._emit("contradicted", id=entry_id, episode_ref=episode_ref, detail=detail, at=self._now(now))

    def review(self, entry_id: str, gate: GateConfig | None = None, now: int | None = None) -> TierDecision:
        gate = gate or self.gate
        with self.log.lock:
            entry = self.get(entry_id)
            target = gate_decision(entry.tier, entry.status, entry.evidence, gate)
            decision = TierDecision(entry_id, entry.tier, target)
            if entry.status is not EntryStatus.RETIRED:
                self._emit("reviewed", id=entry_id, to_tier=target.value, at=self._now(now),
                           gate={"core_min_sessions": gate.core_min_sessions, "anchor_min_cycles": gate.anchor_min_cycles})
        return decision

    def retire(self, entry_id: str, replacement: str | None = None, reason: str = "", now: int | None = None) -> None:
        with self.log.lock:
            self._open_entry(entry_id)
            if replacement is not None:
                if replacement == entry_id:
                    raise ValidationError("an entry cannot replace itself")
                self._open_entry(replacement)
            self._emit("retired", id=entry_id, replacement=replacement, reason=reason, at=self._now(now))

    def reinstate(self, entry_id: str, note: str = "", now: int | None = None) -> None:
        """Close a review without retiring; the contradiction stays on record."""
        with self.log.lock:
            entry = self.get(entry_id)
            if entry.status is not EntryStatus.UNDER_REVIEW:
                raise StateError(f"wisdom entry {entry_id} is not under review")
            self._emit("reinstated", id=entry_id, note=note, at=self._now(now))

    def close_cycle(self, cycle_number: int, now: int | None = None, exclude=()) -> list[str]:
        """Credit one survived cycle to every active entry not contradicted since the last one."""
        with self.log.lock:
            now = self._now(now)
            live = sorted(e.id for e in self.entries.values() if e.status is EntryStatus.ACTIVE and e.id not in exclude)
            credited = [i for i in live if not self.entries[i].contradicted_this_cycle]
            touched = sorted(i for i, e in self.entries.items() if e.contradicted_this_cycle)
            if credited or touched:
                self._emit("cycle_closed", cycle=cycle_number, credited=credited, cleared=touched, at=now)
        return credited

    # -- projection ---------------------------------------------------------

    def _log_change(self, entry: WisdomEntry, at: int, change: Change, detail: str) -> None:
        entry.revision_log.append(RevisionRecord(at, change, detail, entry.evidence.snapshot()))

    def _apply_proposed(self, rec):
        b = rec.body
        entry = WisdomEntry(
            b["id"], b["directive"], Provenance.from_dict(b["provenance"]), b["at"], b["context_id"],
            evidence=EvidenceLedger(set(b["episode_refs"]), set(b["session_ids"])),
        )
        self.entries[entry.id] = entry
        self._log_change(entry, b["at"], Change.PROPOSED, "single-episode prediction")

    def _apply_corroborated(self, rec):
        b = rec.body
        entry = self.entries[b["id"]]
        if b["episode_ref"]:
            entry.evidence.episode_refs.add(b["episode_ref"])
        if b["session_id"]:
            entry.evidence.session_ids.add(b["session_id"])
        self._log_change(entry, b["at"], Change.CORROBORATED, f"session={b['session_id']} episode={b['episode_ref']}")

    def _apply_contradicted(self, rec):
        b = rec.body
        entry = self.entries[b["id"]]
        entry.evidence.contradiction_count += 1
        entry.evidence.cycles_survived = 0
        entry.status = EntryStatus.UNDER_REVIEW
        entry.contradicted_this_cycle = True
        self._log_change(entry, b["at"], Change.CONTRADICTED, b["detail"])

    def _apply_reviewed(self, rec):
        b = rec.body
        entry = self.entries[b["id"]]
        target = Tier(b["to_tier"])
        if target is entry.tier:
            self._log_change(entry, b["at"], Change.REVIEWED, f"held at {target.value}")
        else:
            detail = f"{entry.tier.value} -> {target.value}"
            entry.tier = target
            self._log_change(entry, b["at"], Change.PROMOTED, detail)

    def _apply_retired(self, rec):
        b = rec.body
        entry = self.entries[b["id"]]
        entry.status = EntryStatus.RETIRED
        entry.replaced_by = b["replacement"]
        detail = b["reason"] + (f" (replaced by {b['replacement']})" if b["replacement"] else "")
        self._log_change(entry, b["at"], Change.RETIRED, detail)
        if b["replacement"]:
            self._log_change(self.entries[b["replacement"]], b["at"], Change.REPLACED, f"replaces {entry.id}: {b['reason']}")

    def _apply_reinstated(self, rec):
        b = rec.body
        entry = self.entries[b["id"]]
        entry.status = EntryStatus.ACTIVE
        self._log_change(entry, b["at"], Change.REINSTATED, b["note"])

    def _apply_cycle_closed(self, rec):
        b = rec.body
        for i in b["credited"]:
            entry = self.entries[i]
            entry.evidence.cycles_survived += 1
            self._log_change(entry, b["at"], Change.CYCLE_SURVIVED, f"cycle {b['cycle']}")
        for i in b["cleared"]:
            self.entries[i].contradicted_this_cycle = False

    # -- reads --------------------------------------------------------------

    def _ordered(self, entries) -> list[WisdomEntry]:
        return sorted(entries, key=lambda e: (-TIER_RANK[e.tier], e.created_at, e.id))

    def active_directives(self, context: str | None = None) -> list[WisdomEntry]:
        """The preload set: active entries, anchors first, then core, then predictions."""
        return self._ordered(
            e for e in self.entries.values()
            if e.status is EntryStatus.ACTIVE and (context is None or e.context_id in (None, context))
        )

    def review_queue(self) -> list[WisdomEntry]:
        return self._ordered(e for e in self.entries.values() if e.status is EntryStatus.UNDER_REVIEW)

    def search_directives(self, query: str, k: int = 10, context: str | None = None) -> list[tuple[WisdomEntry, float]]:
        active = {e.id: e for e in self.active_directives(context)}
        if not active:
            return []
        ranked = lexical_rank({i: e.directive for i, e in active.items()}, query, k)
        return [(active[i], s) for i, s in ranked]

    def preload_block(self, context: str | None = None) -> str:
        lines = [f"[{e.tier.value}] {e.directive}" for e in self.active_directives(context)]
        return "\n".join(lines)

    # -- state --------------------------------------------------------------

    def canonical_state(self) -> dict:
        return {"entries": [self.entries[i].to_dict() for i in sorted(self.entries)]}

    def load_state(self, state: dict) -> None:
        self.__init__(self.log, self.clock, self.gate)
        for e in state["entries"]:
            self.entries[e["id"]] = WisdomEntry.from_dict(e)
