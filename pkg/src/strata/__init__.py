"""strata: a deterministic, offline persistence engine for agents.

Four layers with different persistence rules share one event log:

* knowledge: append-only claims linked by supersession, no decay
* memory: per-context experiential facts with forgetting-curve decay
* wisdom: directives promoted only through evidence gates
* sessions/routing: ephemeral, nothing persisted implicitly
"""

from .chrono import (
    DAY_MS,
    HOUR_MS,
    BitemporalStamp,
    DecayParams,
    ManualClock,
    SystemClock,
    days,
    reinforced_half_life,
    retention,
    visible_as_of,
)
from .config import EngineConfig, RouterLexicon
from .engine import Substrate
from .errors import (
    ContractViolation,
    CycleError,
    HookError,
    LockError,
    LogFormatError,
    NotFoundError,
    ParameterError,
    StateError,
    StrataError,
    ValidationError,
)
from .hooks import HookSet, LayerLabel, Verdict
from .knowledge import KnowledgeStore, Provenance, SourceKind
from .memory import EventTrigger, MemoryStore, TimeTrigger
from .retrieval import FusionConfig, RankedList, lexical_rank, rerank, rrf_fuse, vector_rank
from .router import FlatStore, LabelSource, RoutedQuery, Session, classify_heuristic, route
from .storage import canonical_hash
from .wisdom import GateConfig, Tier, WisdomStore

__version__ = "0.1.0"
