"""
A consolidation cycle
=====================

A consolidation cycle archives faded memories, clusters what remains into
recurring patterns, and proposes each pattern as a wisdom entry that cites
its source memories. Cycles are run explicitly; nothing happens in the
background.
"""

import json

from strata import DAY_MS, ManualClock, Substrate
from strata.dreamcycle import run_cycle

sub = Substrate(clock=ManualClock(0))
sub.memory.create_context("project-a")

# The same habit shows up in three separate sessions, plus some noise.
for day, session in enumerate(("mon", "wed", "fri")):
    sub.memory.observe("user runs the linter before every commit", "project-a",
                       session_id=session, now=day * DAY_MS)
sub.memory.observe("lunch order was late", "project-a", session_id="wed", now=DAY_MS)

report = run_cycle(sub, now=3 * DAY_MS)
print(json.dumps(report.to_dict()["counts"]))

entry = sub.wisdom.get(report.promoted[0])
print(f"[{entry.tier.value}] {entry.directive}")
print("cites memories:", sorted(entry.evidence.episode_refs))
print("from sessions:", sorted(entry.evidence.session_ids))

# Running again at the same instant changes nothing new: the pattern is
# already recorded as consolidated.
again = run_cycle(sub, now=3 * DAY_MS)
print("second cycle promotions:", again.promoted)

# Ten more quiet cycles earn the entry anchor status.
for n in range(10):
    run_cycle(sub, now=(4 + n) * DAY_MS)
print("tier after ten more cycles:", sub.wisdom.get(entry.id).tier.value)
