"""
Evidence-gated wisdom
=====================

Wisdom entries are promoted only when their evidence ledger crosses a
threshold: three independent sessions take a prediction to core, and ten
contradiction-free consolidation cycles take core to anchor. Repeating the
same thing within one session does not count.
"""

from strata import ManualClock, Provenance
from strata.wisdom import WisdomStore

wisdom = WisdomStore(clock=ManualClock(0))
user = Provenance("user", "human")

tip = wisdom.propose("set gradient clipping to 1.0 or below", "m1", "session-1", user)

# Many corroborations inside one session leave the entry where it is.
for i in range(20):
    wisdom.corroborate(tip, f"m{i + 2}", "session-1")
print("after a single-session flood:", wisdom.review(tip).to_tier.value)

for session in ("session-2", "session-3"):
    wisdom.corroborate(tip, None, session)
print("after three sessions:", wisdom.review(tip).to_tier.value)

for cycle in range(1, 11):
    wisdom.close_cycle(cycle)
print("after ten quiet cycles:", wisdom.review(tip).to_tier.value)

# A contradiction parks the entry for review and resets its cycle count.
wisdom.contradict(tip, "m99", "loss diverged with clipping at 1.0")
entry = wisdom.get(tip)
print("status:", entry.status.value, "cycles survived:", entry.evidence.cycles_survived)

# Replacing a directive retires the old one with a link to its successor.
better = wisdom.propose("set gradient clipping to 0.5 for this model family", "m100", "session-4", user)
wisdom.retire(tip, replacement=better, reason="clipping at 1.0 diverged")
print("preload block:")
print(wisdom.preload_block())
print("revision history of the retired entry:")
for rec in wisdom.get(tip).revision_log:
    if rec.change.value not in ("corroborated", "cycle_survived"):
        print("  ", rec.change.value, "-", rec.detail)
