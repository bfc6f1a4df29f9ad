"""
Supersession in the knowledge layer
===================================

Knowledge does not decay. When a newer claim improves on an older one, the
older claim is marked superseded and stays readable with its provenance.
Searches return current claims unless asked otherwise.
"""

from strata import ManualClock, Provenance, Substrate
from strata.router import FlatStore

sub = Substrate(clock=ManualClock(0))
k = sub.knowledge

lora = k.ingest_claim("Project Alpha fine-tunes with LoRA", Provenance("design-doc-v1", asserted_at=0))
sub.clock.set(10_000)
dora = k.ingest_claim("Project Alpha fine-tunes with DoRA", Provenance("design-doc-v2", asserted_at=10_000))

# A conclusion built on the older claim.
summary = k.record_conclusion("Alpha uses a low-rank adapter", [lora], Provenance("analyst"))

k.supersede(lora, dora, "design doc revised")

print("current claims:")
for c in k.current_claims():
    print("  ", c.id, c.statement)

print("history behind the current claim:")
for claim, link in k.provenance_chain(dora):
    via = f" (superseded via: {link.reason})" if link else ""
    print("  ", claim.id, claim.statement, "from", claim.provenance.source_id, via)

# The conclusion keeps pointing at the old claim and is flagged rather than rewritten.
print("stale support for", summary, "->", k.stale_support(summary))

# The typed search filters the stale claim; the flat control keeps both.
query = "what does Project Alpha fine-tune with"
print("typed:", [h.text for h in k.search_knowledge(query, 3)])
print("flat: ", [a.text for a in FlatStore.from_substrate(sub).flat_query(query, 3)])
