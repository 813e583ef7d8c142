"""Per-neighbor behavior accounting and trust-level scoring.

Every node keeps one record per neighbor it has observed.  A record
accumulates success/failure counts in three phases: route-request
relaying (RREQ), route-reply relaying (RREP), and data forwarding
(DATA).  Each phase contributes a success ratio in [-1, +1]; the
weighted sum of the three ratios is the neighbor's trust level.  A
trust level below the threshold marks the neighbor as misbehaving and
bars it from being used as a next hop.

The default weights form the factorial ladder 1, 2, 6 (= 1!, 2!, 3!),
so data-forwarding behavior dominates the verdict.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class Phase(enum.Enum):
    RREQ = "rreq"
    RREP = "rrep"
    DATA = "data"


class Outcome(enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"


class Verdict(enum.Enum):
    TRUSTED = "trusted"
    MISBEHAVING = "misbehaving"
    INSUFFICIENT_EVIDENCE = "insufficient_evidence"


@dataclass
class PhaseCounters:
    """Lifetime success/failure tallies for one observation phase."""

    success: int = 0
    failure: int = 0

    @property
    def total(self) -> int:
        return self.success + self.failure


@dataclass
class NeighborTrustRecord:
    """All phase counters one observer holds about one neighbor."""

    neighbor: int
    rreq: PhaseCounters = field(default_factory=PhaseCounters)
    rrep: PhaseCounters = field(default_factory=PhaseCounters)
    data: PhaseCounters = field(default_factory=PhaseCounters)

    def counters(self, phase: Phase) -> PhaseCounters:
        if phase is Phase.RREQ:
            return self.rreq
        if phase is Phase.RREP:
            return self.rrep
        return self.data

    @property
    def total_observations(self) -> int:
        return self.rreq.total + self.rrep.total + self.data.total


@dataclass(frozen=True)
class TrustParams:
    """Scoring weights and decision thresholds.

    threshold must stay below the weight sum, otherwise no record can
    ever clear it.  min_observations gates verdicts: records below it
    are never classified, and a misbehaving verdict additionally needs
    that many resolved DATA observations (a record without data-phase
    evidence tops out at weight_rreq + weight_rrep, which sits below
    the default threshold by construction, so data evidence is the
    only thing that can separate honest from misbehaving).
    """

    weight_rreq: float = 1.0  # 1!
    weight_rrep: float = 2.0  # 2!
    weight_data: float = 6.0  # 3!
    threshold: float = 5.0
    min_observations: int = 10


DEFAULT_PARAMS = TrustParams()


@dataclass(frozen=True)
class TrustVerdict:
    verdict: Verdict
    tl_value: float | None = None


def record_observation(record: NeighborTrustRecord, phase: Phase,
                       outcome: Outcome) -> NeighborTrustRecord:
    """Increment exactly one counter; counters only ever grow."""
    counters = record.counters(phase)
    if outcome is Outcome.SUCCESS:
        counters.success += 1
    else:
        counters.failure += 1
    return record


def phase_ratio(counters: PhaseCounters) -> float:
    """(success - failure) / (success + failure), or 0 with no evidence.

    The empty-record ratio is defined as 0 so that missing evidence
    pulls trust neither up nor down.
    """
    total = counters.success + counters.failure
    if total == 0:
        return 0.0
    return (counters.success - counters.failure) / total


def _contribution(weight: float, counters: PhaseCounters) -> float:
    # weight * (s - f) / (s + f), fused so that exact boundary records
    # (e.g. a data ratio of exactly 1/3) evaluate without rounding.
    total = counters.success + counters.failure
    if total == 0:
        return 0.0
    return weight * (counters.success - counters.failure) / total


def trust_level(record: NeighborTrustRecord,
                params: TrustParams = DEFAULT_PARAMS) -> float:
    """Weighted sum of the three phase ratios; bounded by +-sum(weights)."""
    return (_contribution(params.weight_rreq, record.rreq)
            + _contribution(params.weight_rrep, record.rrep)
            + _contribution(params.weight_data, record.data))


def classify(record: NeighborTrustRecord,
             params: TrustParams = DEFAULT_PARAMS) -> TrustVerdict:
    """Decide trusted / misbehaving / insufficient evidence.

    A record with fewer than min_observations total observations is
    never classified.  Trust level at or above the threshold is
    trusted (the boundary itself counts as trusted).  Below the
    threshold the verdict is misbehaving only when at least
    min_observations DATA observations back it; otherwise the record
    cannot distinguish a data dropper from a neighbor that simply never
    carried data, and the verdict stays insufficient-evidence.
    """
    if record.total_observations < params.min_observations:
        return TrustVerdict(Verdict.INSUFFICIENT_EVIDENCE)
    tl = trust_level(record, params)
    if tl >= params.threshold:
        return TrustVerdict(Verdict.TRUSTED, tl)
    if record.data.total >= params.min_observations:
        return TrustVerdict(Verdict.MISBEHAVING, tl)
    return TrustVerdict(Verdict.INSUFFICIENT_EVIDENCE, tl)
