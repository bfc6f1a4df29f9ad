"""
Decay and recall in the memory layer
====================================

Memories lose retrievability over time unless they are reinforced. This
walkthrough observes a few facts, lets the clock run, and shows how
reinforcement keeps one of them alive while its twin fades out.
"""

from strata import DAY_MS, ManualClock, MemoryStore

# All time enters through an injected clock, so the run is reproducible.
clock = ManualClock(0)
memory = MemoryStore(clock=clock)
memory.create_context("editor")

plain = memory.observe("user switched the editor to dark mode", "editor")
kept = memory.observe("user switched the editor to dark mode", "editor")

# Reinforce one twin every few days; the other is left alone.
for day in (3, 9, 20):
    clock.set(day * DAY_MS)
    memory.reinforce(kept)

print("day  plain   reinforced")
for day in (0, 7, 14, 30, 60):
    t = day * DAY_MS
    print(f"{day:>3}  {memory.get(plain).retrievability(t):.4f}  {memory.get(kept).retrievability(t):.4f}")

# Recall multiplies lexical relevance by retrievability and drops anything
# below the recall threshold (0.05 by default).
clock.set(40 * DAY_MS)
for hit in memory.recall("dark mode", "editor"):
    print(hit.fact.id, f"score={hit.score:.3f}", f"retrievability={hit.retrievability:.3f}")

# Forgetting is not deletion: a sweep archives the faded fact, but it can
# still be reached on request.
archived = memory.sweep()
print("archived:", archived)
print("still reachable:", [h.fact.id for h in memory.recall("dark mode", "editor", include_archived=True)])
