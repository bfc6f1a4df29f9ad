"""Factual substrate: claims with provenance, linked by supersession.

Nothing here decays. A claim is never deleted or edited; a newer claim can
supersede it, after which it drops out of the current view but remains
readable and reachable through :meth:`KnowledgeStore.provenance_chain`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ._store import EventSourcedStore
from .chrono import BitemporalStamp, check_timestamp
from .errors import CycleError, NotFoundError, ValidationError
from .hooks import HookSet, embed_all
from .retrieval import FusionConfig, RankedList, lexical_rank, rerank, rrf_fuse, vector_rank


class SourceKind(str, enum.Enum):
    DOCUMENT = "document"
    CONVERSATION = "conversation"
    AGENT = "agent"
    HUMAN = "human"


class Status(str, enum.Enum):
    CURRENT = "current"
    SUPERSEDED = "superseded"


@dataclass(frozen=True)
class Provenance:
    source_id: str
    source_kind: SourceKind = SourceKind.DOCUMENT
    asserted_at: int = 0
    author: str | None = None
    evidence_note: str | None = None

    def __post_init__(self):
        if not self.source_id:
            raise ValidationError("provenance source_id must be non-empty")
        object.__setattr__(self, "source_kind", SourceKind(self.source_kind))
        check_timestamp(self.asserted_at, "asserted_at")

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "source_kind": self.source_kind.value,
            "asserted_at": self.asserted_at,
            "author": self.author,
            "evidence_note": self.evidence_note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Provenance:
        return cls(**d)


@dataclass
class Claim:
    id: str
    statement: str
    entity_refs: frozenset[str]
    provenance: Provenance
    stamp: BitemporalStamp
    confidence: float | None = None
    status: Status = Status.CURRENT

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "statement": self.statement,
            "entity_refs": sorted(self.entity_refs),
            "provenance": self.provenance.to_dict(),
            "stamp": self.stamp.to_dict(),
            "confidence": self.confidence,
            "status": self.status.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Claim:
        return cls(
            id=d["id"],
            statement=d["statement"],
            entity_refs=frozenset(d["entity_refs"]),
            provenance=Provenance.from_dict(d["provenance"]),
            stamp=BitemporalStamp.from_dict(d["stamp"]),
            confidence=d["confidence"],
            status=Status(d["status"]),
        )


@dataclass(frozen=True)
class SupersessionLink:
    old_id: str
    new_id: str
    reason: str
    recorded_at: int

    def to_dict(self) -> dict:
        return {"old_id": self.old_id, "new_id": self.new_id, "reason": self.reason, "recorded_at": self.recorded_at}


@dataclass(frozen=True)
class Entity:
    id: str
    name: str
    kind: str = "thing"
    aliases: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"id": self.id, "name": self.name, "kind": self.kind, "aliases": list(self.aliases)}


@dataclass(frozen=True)
class Relationship:
    id: str
    src: str
    dst: str
    label: str
    provenance: Provenance
    stamp: BitemporalStamp

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "src": self.src,
            "dst": self.dst,
            "label": self.label,
            "provenance": self.provenance.to_dict(),
            "stamp": self.stamp.to_dict(),
        }


@dataclass
class Conclusion:
    id: str
    statement: str
    supporting_claims: frozenset[str]
    provenance: Provenance
    recorded_at: int
    status: Status = Status.CURRENT

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "statement": self.statement,
            "supporting_claims": sorted(self.supporting_claims),
            "provenance": self.provenance.to_dict(),
            "recorded_at": self.recorded_at,
            "status": self.status.value,
        }


@dataclass
class SearchHit:
    item_id: str
    score: float
    text: str
    layer: str
    explanation: dict = field(default_factory=dict)


class _LinkGraph:
    """Append-only DAG of supersession links between ids of one kind."""

    def __init__(self):
        self.links: list[SupersessionLink] = []
        self.successors: dict[str, list[str]] = {}
        self.predecessors: dict[str, list[SupersessionLink]] = {}

    def reaches(self, start: str, target: str) -> bool:
        stack, seen = [start], set()
        while stack:
            node = stack.pop()
            if node == target:
                return True
            if node in seen:
                continue
            seen.add(node)
            stack.extend(self.successors.get(node, ()))
        return False

    def check(self, old_id: str, new_id: str) -> None:
        if old_id == new_id:
            raise CycleError(f"{old_id} cannot supersede itself")
        if self.reaches(new_id, old_id):
            raise CycleError(f"superseding {old_id} by {new_id} would close a cycle")

    def add(self, link: SupersessionLink) -> None:
        self.links.append(link)
        self.successors.setdefault(link.old_id, []).append(link.new_id)
        self.predecessors.setdefault(link.new_id, []).append(link)


class KnowledgeStore(EventSourcedStore):
    store_tag = "knowledge"
    event_kinds = frozenset(
        {
            "claim_ingested",
            "claim_superseded",
            "entity_added",
            "relationship_added",
            "conclusion_recorded",
            "conclusion_superseded",
        }
    )

    def __init__(self, log=None, clock=None):
        super().__init__(log, clock)
        self.claims: dict[str, Claim] = {}
        self.entities: dict[str, Entity] = {}
        self.relationships: dict[str, Relationship] = {}
        self.conclusions: dict[str, Conclusion] = {}
        self._claim_links = _LinkGraph()
        self._conclusion_links = _LinkGraph()

    # -- writes -------------------------------------------------------------

    def add_entity(self, name: str, kind: str = "thing", aliases=()) -> str:
        if not name:
            raise ValidationError("entity name must be non-empty")
        with self.log.lock:
            eid = f"e{self.log.last_seq + 1:07d}"
            self._emit("entity_added", entity={"id": eid, "name": name, "kind": kind, "aliases": list(aliases)})
        return eid

    def add_relationship(self, src: str, dst: str, label: str, provenance: Provenance, valid_from=None, now=None) -> str:
        with self.log.lock:
            for end in (src, dst):
                if end not in self.entities:
                    raise NotFoundError(f"unknown entity {end}")
            now = self._now(now)
            stamp = BitemporalStamp(now, provenance.asserted_at if valid_from is None else valid_from)
            rid = f"r{self.log.last_seq + 1:07d}"
            self._emit(
                "relationship_added",
                relationship={
                    "id": rid,
                    "src": src,
                    "dst": dst,
                    "label": label,
                    "provenance": provenance.to_dict(),
                    "stamp": stamp.to_dict(),
                },
            )
        return rid

    def ingest_claim(
        self,
        statement: str,
        provenance: Provenance,
        entity_refs=(),
        valid_from: int | None = None,
        confidence: float | None = None,
        now: int | None = None,
    ) -> str:
        if not statement or not statement.strip():
            raise ValidationError("claim statement must be non-empty")
        if confidence is not None and not 0.0 <= confidence <= 1.0:
            raise ValidationError("confidence must lie in [0, 1]")
        with self.log.lock:
            for ref in entity_refs:
                if ref not in self.entities:
                    raise NotFoundError(f"unknown entity {ref}")
            now = self._now(now)
            stamp = BitemporalStamp(now, provenance.asserted_at if valid_from is None else valid_from)
            cid = f"c{self.log.last_seq + 1:07d}"
            claim = Claim(cid, statement, frozenset(entity_refs), provenance, stamp, confidence)
            self._emit("claim_ingested", claim=claim.to_dict())
        return cid

    def supersede(self, old_id: str, new_id: str, reason: str = "", now: int | None = None) -> SupersessionLink:
        with self.log.lock:
            for cid in (old_id, new_id):
                if cid not in self.claims:
                    raise NotFoundError(f"unknown claim {cid}")
            self._claim_links.check(old_id, new_id)
            link = SupersessionLink(old_id, new_id, reason, self._now(now))
            self._emit("claim_superseded", link=link.to_dict())
        return link

    def record_conclusion(self, statement: str, supporting_claims, provenance: Provenance, now: int | None = None) -> str:
        support = frozenset(supporting_claims)
        if not statement or not statement.strip():
            raise ValidationError("conclusion statement must be non-empty")
        if not support:
            raise ValidationError("a conclusion needs at least one supporting claim")
        with self.log.lock:
            missing = sorted(c for c in support if c not in self.claims)
            if missing:
                raise NotFoundError(f"unknown supporting claims {missing}")
            cid = f"k{self.log.last_seq + 1:07d}"
            conc = Conclusion(cid, statement, support, provenance, self._now(now))
            self._emit("conclusion_recorded", conclusion=conc.to_dict())
        return cid

    def supersede_conclusion(self, old_id: str, new_id: str, reason: str = "", now: int | None = None) -> SupersessionLink:
        with self.log.lock:
            for cid in (old_id, new_id):
                if cid not in self.conclusions:
                    raise NotFoundError(f"unknown conclusion {cid}")
            self._conclusion_links.check(old_id, new_id)
            link = SupersessionLink(old_id, new_id, reason, self._now(now))
            self._emit("conclusion_superseded", link=link.to_dict())
        return link

    # -- projection ---------------------------------------------------------

    def _apply_entity_added(self, rec):
        e = rec.body["entity"]
        self.entities[e["id"]] = Entity(e["id"], e["name"], e["kind"], tuple(e["aliases"]))

    def _apply_relationship_added(self, rec):
        r = rec.body["relationship"]
        self.relationships[r["id"]] = Relationship(
            r["id"], r["src"], r["dst"], r["label"], Provenance.from_dict(r["provenance"]),
            BitemporalStamp.from_dict(r["stamp"]),
        )

    def _apply_claim_ingested(self, rec):
        claim = Claim.from_dict(rec.body["claim"])
        self.claims[claim.id] = claim

    def _apply_claim_superseded(self, rec):
        link = SupersessionLink(**rec.body["link"])
        self._claim_links.add(link)
        self.claims[link.old_id].status = Status.SUPERSEDED

    def _apply_conclusion_recorded(self, rec):
        c = rec.body["conclusion"]
        self.conclusions[c["id"]] = Conclusion(
            c["id"], c["statement"], frozenset(c["supporting_claims"]), Provenance.from_dict(c["provenance"]),
            c["recorded_at"], Status(c["status"]),
        )

    def _apply_conclusion_superseded(self, rec):
        link = SupersessionLink(**rec.body["link"])
        self._conclusion_links.add(link)
        self.conclusions[link.old_id].status = Status.SUPERSEDED

    # -- reads --------------------------------------------------------------

    @property
    def links(self) -> list[SupersessionLink]:
        return list(self._claim_links.links)

    @property
    def conclusion_links(self) -> list[SupersessionLink]:
        return list(self._conclusion_links.links)

    def get_claim(self, claim_id: str) -> Claim:
        try:
            return self.claims[claim_id]
        except KeyError:
            raise NotFoundError(f"unknown claim {claim_id}") from None

    def get_conclusion(self, conclusion_id: str) -> Conclusion:
        try:
            return self.conclusions[conclusion_id]
        except KeyError:
            raise NotFoundError(f"unknown conclusion {conclusion_id}") from None

    def current_claims(self, predicate=None, entity: str | None = None, text: str | None = None) -> list[Claim]:
        """Claims not superseded by anything, ordered by (system_created, id).

        ``entity`` keeps claims referencing that entity id, ``text`` keeps
        claims whose statement contains it (case-insensitive), and
        ``predicate`` is an arbitrary callable filter.
        """
        out = []
        for c in self.claims.values():
            if c.status is not Status.CURRENT:
                continue
            if entity is not None and entity not in c.entity_refs:
                continue
            if text is not None and text.lower() not in c.statement.lower():
                continue
            if predicate is not None and not predicate(c):
                continue
            out.append(c)
        return sorted(out, key=lambda c: (c.stamp.system_created, c.id))

    def current_conclusions(self) -> list[Conclusion]:
        out = [c for c in self.conclusions.values() if c.status is Status.CURRENT]
        return sorted(out, key=lambda c: (c.recorded_at, c.id))

    def stale_support(self, conclusion_id: str) -> list[str]:
        """Supporting claims of a conclusion that have since been superseded."""
        conc = self.get_conclusion(conclusion_id)
        return sorted(c for c in conc.supporting_claims if self.claims[c].status is Status.SUPERSEDED)

    def conclusions_citing(self, claim_id: str) -> list[str]:
        return sorted(k for k, c in self.conclusions.items() if claim_id in c.supporting_claims)

    def _chain(self, graph: _LinkGraph, items: dict, start: str):
        if start not in items:
            raise NotFoundError(f"unknown id {start}")
        out = [(items[start], None)]
        seen = {start}
        frontier = [start]
        while frontier:
            nxt = []
            for node in frontier:
                preds = sorted(graph.predecessors.get(node, ()), key=lambda l: (l.recorded_at, l.old_id))
                for link in preds:
                    if link.old_id in seen:
                        continue
                    seen.add(link.old_id)
                    out.append((items[link.old_id], link))
                    nxt.append(link.old_id)
            frontier = nxt
        return out

    def provenance_chain(self, claim_id: str) -> list[tuple[Claim, SupersessionLink | None]]:
        """The claim followed by everything it transitively superseded, newest first.

        Each entry carries the link through which that predecessor was reached
        (``None`` for the starting claim).
        """
        return self._chain(self._claim_links, self.claims, claim_id)

    def conclusion_chain(self, conclusion_id: str):
        return self._chain(self._conclusion_links, self.conclusions, conclusion_id)

    def search_knowledge(
        self,
        query: str,
        k: int = 10,
        include_superseded: bool = False,
        hooks: HookSet | None = None,
        fusion: FusionConfig | None = None,
    ) -> list[SearchHit]:
        if k < 1:
            raise ValidationError("k must be >= 1")
        pool = {
            cid: c.statement
            for cid, c in self.claims.items()
            if include_superseded or c.status is Status.CURRENT
        }
        if not pool:
            return []
        lexical = lexical_rank(pool, query, len(pool))
        lists = [lexical]
        vectors = embed_all(pool, hooks)
        if vectors is not None:
            qvec = embed_all({"q": query}, hooks)["q"]
            lists.append(vector_rank(vectors, qvec, len(pool)))
            ranked = rrf_fuse(lists, fusion)
        else:
            ranked = lexical
        ranked = rerank(query, ranked, hooks.reranker if hooks else None)
        contributors = {lst.source_label: set(lst.ids) for lst in lists}
        hits = []
        for cid, score in ranked.items[:k]:
            claim = self.claims[cid]
            expl = {
                "lists": sorted(label for label, ids in contributors.items() if cid in ids),
                "superseded": claim.status is Status.SUPERSEDED,
            }
            if claim.status is Status.SUPERSEDED:
                expl["superseded_by"] = sorted(self._claim_links.successors.get(cid, ()))
                expl["stale_support"] = [
                    k_id for k_id in self.conclusions_citing(cid) if self.conclusions[k_id].status is Status.CURRENT
                ]
            hits.append(SearchHit(cid, score, claim.statement, "knowledge", expl))
        return hits

    # -- state --------------------------------------------------------------

    def canonical_state(self) -> dict:
        return {
            "claims": [self.claims[c].to_dict() for c in sorted(self.claims)],
            "claim_links": [l.to_dict() for l in self._claim_links.links],
            "entities": [self.entities[e].to_dict() for e in sorted(self.entities)],
            "relationships": [self.relationships[r].to_dict() for r in sorted(self.relationships)],
            "conclusions": [self.conclusions[c].to_dict() for c in sorted(self.conclusions)],
            "conclusion_links": [l.to_dict() for l in self._conclusion_links.links],
        }

    def load_state(self, state: dict) -> None:
        self.__init__(self.log, self.clock)
        for c in state["claims"]:
            self.claims[c["id"]] = Claim.from_dict(c)
        for l in state["claim_links"]:
            self._claim_links.add(SupersessionLink(**l))
        for e in state["entities"]:
            self.entities[e["id"]] = Entity(e["id"], e["name"], e["kind"], tuple(e["aliases"]))
        for r in state["relationships"]:
            self._apply_relationship_added(_Body({"relationship": r}))
        for c in state["conclusions"]:
            self._apply_conclusion_recorded(_Body({"conclusion": c}))
        for l in state["conclusion_links"]:
            self._conclusion_links.add(SupersessionLink(**l))


class _Body:
    def __init__(self, body):
        self.body = body
