"""Run accounting: packet bookkeeping, QoS figures, protocol comparison.

Every data packet ends in exactly one terminal state (delivered or
dropped with a reason) or is still alive when the run ends.  The
collector enforces that; a packet reaching two terminal states or an
unknown packet id is an accounting bug and aborts the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

DROP_REASONS = ("no_route", "buffer_overflow", "adversary", "radio_loss",
                "hop_limit")

# Published comparison figures for the two protocols at several network
# sizes (PDR %, mean delay s, throughput bit/s).  Qualitative reference
# only: printed alongside our own comparison tables, never asserted.
REFERENCE_RESULTS = {
    25: {"aodv": (82.98, 0.24615, 75771.43), "tbraodv": (92.20, 0.22153, 75771.43)},
    50: {"aodv": (70.05, 0.84972, 114559.89), "tbraodv": (91.06, 0.64979, 114559.89)},
    100: {"aodv": (64.43, 1.44347, 148339.67), "tbraodv": (90.03, 0.92683, 148339.67)},
    200: {"aodv": (62.36, 1.65589, 150748.56), "tbraodv": (84.32, 0.93536, 150748.56)},
    300: {"aodv": (60.65, 1.78687, 150836.74), "tbraodv": (81.26, 0.94825, 150836.74)},
}


class AccountingError(Exception):
    """A packet was delivered/dropped that was never sent (or twice)."""


@dataclass
class FlowStats:
    flow_id: int
    sent: int = 0
    delivered: int = 0
    delay_sum: float = 0.0
    delivered_bytes: int = 0
    drops: dict = field(default_factory=lambda: {r: 0 for r in DROP_REASONS})
    in_flight: int = 0

    @property
    def dropped(self) -> int:
        return sum(self.drops.values())


@dataclass
class Detection:
    true_positives: int = 0
    false_positives: int = 0
    undetected_adversaries: int = 0


@dataclass
class RunReport:
    protocol: str
    seed: int
    node_count: int
    adversary_fraction: float
    duration: float
    pdr: float
    mean_delay: float | None
    throughput_bps: float
    sent: int
    delivered: int
    drops: dict
    per_flow: list
    detection: Detection
    final_trust: list  # (observer, neighbor, trust level)
    comparison_key: tuple = ()


class MetricsCollector:
    def __init__(self, flow_count: int):
        self.flows = [FlowStats(i) for i in range(flow_count)]
        self._alive: dict[tuple, float] = {}
        self._delivered: set = set()

    def record_send(self, packet, now: float):
        if packet.key in self._alive or packet.key in self._delivered:
            raise AccountingError(f"duplicate send of {packet.key}")
        self._alive[packet.key] = now
        self.flows[packet.flow_id].sent += 1

    def record_delivery(self, packet, now: float):
        if packet.key in self._delivered:
            return  # duplicate delivery counts once
        if packet.key not in self._alive:
            raise AccountingError(f"delivery of unknown packet {packet.key}")
        sent_at = self._alive.pop(packet.key)
        self._delivered.add(packet.key)
        stats = self.flows[packet.flow_id]
        stats.delivered += 1
        stats.delay_sum += now - sent_at
        stats.delivered_bytes += packet.size

    def record_drop(self, packet, reason: str, now: float):
        if packet.key not in self._alive:
            raise AccountingError(f"drop of unknown packet {packet.key}")
        del self._alive[packet.key]
        self.flows[packet.flow_id].drops[reason] += 1

    def finalize(self, *, protocol: str, seed: int, node_count: int,
                 adversary_fraction: float, duration: float,
                 trust_ledgers=None, blacklists=None, adversaries=frozenset(),
                 comparison_key=()) -> RunReport:
        in_flight_total = 0
        for stats in self.flows:
            alive = sum(1 for key in self._alive if key[1] == stats.flow_id)
            stats.in_flight = alive
            in_flight_total += alive
            if stats.delivered + stats.dropped + alive != stats.sent:
                raise AccountingError(
                    f"flow {stats.flow_id}: sent={stats.sent} != delivered="
                    f"{stats.delivered} + dropped={stats.dropped} + in_flight={alive}")
        sent = sum(f.sent for f in self.flows)
        delivered = sum(f.delivered for f in self.flows)
        delay_sum = sum(f.delay_sum for f in self.flows)
        delivered_bytes = sum(f.delivered_bytes for f in self.flows)
        drops = {r: sum(f.drops[r] for f in self.flows) for r in DROP_REASONS}
        pdr = 100.0 * delivered / sent if sent else 0.0
        mean_delay = delay_sum / delivered if delivered else None
        throughput = 8.0 * delivered_bytes / duration

        detection = Detection()
        final_trust = []
        if blacklists is not None:
            accused = set()
            for observer in sorted(blacklists):
                accused.update(blacklists[observer])
            detection.true_positives = len(accused & set(adversaries))
            detection.false_positives = len(accused - set(adversaries))
            detection.undetected_adversaries = (
                len(adversaries) - detection.true_positives)
        else:
            detection.undetected_adversaries = len(adversaries)
        if trust_ledgers is not None:
            from .trust import trust_level
            for observer in sorted(trust_ledgers):
                ledger = trust_ledgers[observer]
                for neighbor in sorted(ledger):
                    final_trust.append(
                        (observer, neighbor, trust_level(ledger[neighbor])))

        return RunReport(
            protocol=protocol, seed=seed, node_count=node_count,
            adversary_fraction=adversary_fraction, duration=duration,
            pdr=pdr, mean_delay=mean_delay, throughput_bps=throughput,
            sent=sent, delivered=delivered, drops=drops,
            per_flow=list(self.flows), detection=detection,
            final_trust=final_trust, comparison_key=comparison_key)


@dataclass
class ComparisonRow:
    seed: int | str
    pdr_a: float
    pdr_b: float
    delay_a: float | None
    delay_b: float | None
    throughput_a: float
    throughput_b: float

    @property
    def delta_pdr(self) -> float:
        return self.pdr_b - self.pdr_a

    @property
    def delta_delay(self) -> float | None:
        if self.delay_a is None or self.delay_b is None:
            return None
        return self.delay_b - self.delay_a

    @property
    def delta_throughput(self) -> float:
        return self.throughput_b - self.throughput_a


@dataclass
class ComparisonTable:
    protocol_a: str
    protocol_b: str
    rows: list          # one ComparisonRow per seed
    aggregate: ComparisonRow


class ComparisonError(Exception):
    """Reports being compared do not come from matching runs."""


def compare(report_a: RunReport, report_b: RunReport) -> ComparisonRow:
    """Per-metric deltas of two runs differing only in protocol."""
    if report_a.comparison_key != report_b.comparison_key:
        raise ComparisonError("reports come from different configurations")
    if report_a.seed != report_b.seed:
        raise ComparisonError("reports come from different seeds")
    return ComparisonRow(seed=report_a.seed,
                         pdr_a=report_a.pdr, pdr_b=report_b.pdr,
                         delay_a=report_a.mean_delay, delay_b=report_b.mean_delay,
                         throughput_a=report_a.throughput_bps,
                         throughput_b=report_b.throughput_bps)


def _mean(values):
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def compare_many(reports_a: list, reports_b: list) -> ComparisonTable:
    if len(reports_a) != len(reports_b) or not reports_a:
        raise ComparisonError("need one report per protocol per seed")
    rows = [compare(a, b) for a, b in zip(reports_a, reports_b)]
    aggregate = ComparisonRow(
        seed="aggregate",
        pdr_a=_mean([r.pdr_a for r in rows]),
        pdr_b=_mean([r.pdr_b for r in rows]),
        delay_a=_mean([r.delay_a for r in rows]),
        delay_b=_mean([r.delay_b for r in rows]),
        throughput_a=_mean([r.throughput_a for r in rows]),
        throughput_b=_mean([r.throughput_b for r in rows]))
    return ComparisonTable(protocol_a=reports_a[0].protocol,
                           protocol_b=reports_b[0].protocol,
                           rows=rows, aggregate=aggregate)
