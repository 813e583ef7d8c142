"""Trust-based AODV variant (TBRAODV).

Extends the baseline node with a promiscuous watchdog: whenever this
node hands a packet to a neighbor whose onward relaying it can verify,
it registers a watch.  Overhearing the neighbor relay the packet before
the deadline resolves the watch as a success; unexplained silence
resolves it as a failure.  The watchdog is protocol-aware so that only
genuine misbehavior counts:

* Answering a route request with a reply proves receipt just as well
  as rebroadcasting it, so overheard replies resolve RREQ watches.
* Terminal hops never forward; a watch on the packet's final consumer
  resolves on the link-level delivery acknowledgment instead.
* A unicast watch whose handoff was never acknowledged is cancelled:
  the neighbor cannot relay what it never received.  Broadcast RREQ
  watches have no acknowledgment and count silence as failure, which
  matches their meaning of "neighbor did not receive the request".
* A neighbor that declares itself routeless (route error naming the
  packet's destination) or starts its own rediscovery for it has
  explained the silence; such data watches are cancelled too.

Observations feed per-neighbor trust records.  A neighbor classified
misbehaving enters this node's blacklist permanently (for the rest of
the run): it is dropped as a next hop, its route replies are discarded,
no route is ever installed through it, and every invalidated route that
was carrying traffic triggers an immediate rediscovery so an alternate
path takes over.  Relayed RREQs from blacklisted nodes are still
flooded to keep discovery connectivity high.  Because per-hop delays
are constant, a rediscovery could deterministically keep electing the
same reverse path through a node someone has blacklisted; destinations
therefore answer a few duplicate flood copies arriving over distinct
previous hops, giving originators path diversity to choose from.

Trust state is strictly local: nodes never exchange opinions.  With
the threshold set to -inf no verdict can ever condemn a neighbor, so
the whole watchdog is skipped and the node behaves packet-for-packet
like the baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .aodv import AodvNode, DataPacket, NodeIO, Rerr, Rrep, Rreq, RouteState, Timers
from .trust import (
    NeighborTrustRecord,
    Outcome,
    Phase,
    TrustParams,
    Verdict,
    classify,
    record_observation,
)

REPLY_DIVERSITY = 3  # distinct previous hops a destination answers per flood


@dataclass
class WatchdogEntry:
    neighbor: int
    phase: Phase
    packet_key: tuple
    deadline: float
    expect_forward: bool   # False: terminal hop, resolve on link ack
    dest: int | None = None  # destination the relaying should serve
    acked: bool = False


class TrustState:
    """One node's trust ledger, live watches and derived blacklist."""

    def __init__(self, params: TrustParams):
        self.params = params
        self.ledger: dict[int, NeighborTrustRecord] = {}
        self.blacklist: set[int] = set()
        self.watches: dict[tuple, WatchdogEntry] = {}
        self.flood_relayers: dict[tuple, set[int]] = {}
        self.recent_replies: dict[tuple, float] = {}  # (node, origin, dest)
        # watch accounting: registered == successes + failures
        #                               + cancelled + len(watches)
        self.registered = 0
        self.successes = 0
        self.failures = 0
        self.cancelled = 0

    def record_for(self, neighbor: int) -> NeighborTrustRecord:
        record = self.ledger.get(neighbor)
        if record is None:
            record = NeighborTrustRecord(neighbor)
            self.ledger[neighbor] = record
        return record


class TbraodvNode(AodvNode):
    def __init__(self, node_id: int, timers: Timers, io: NodeIO,
                 trust_params: TrustParams):
        super().__init__(node_id, timers, io)
        self.trust = TrustState(trust_params)
        # -inf threshold disables trust entirely; skipping the watchdog
        # then keeps the event stream identical to the baseline
        self.trust_enabled = not math.isinf(trust_params.threshold)
        self._flood_replies: dict[tuple, set[int]] = {}
        self.counters["rrep_from_blacklisted"] = 0

    # ---------------- reply diversity at the destination ----------------

    def on_rreq(self, rreq: Rreq, sender: int, now: float):
        if (self.trust_enabled and rreq.dest == self.node_id
                and rreq.flood_key in self.seen_rreqs):
            replied = self._flood_replies.setdefault(rreq.flood_key, set())
            if sender not in replied and len(replied) < REPLY_DIVERSITY:
                replied.add(sender)
                reply = Rrep(origin=rreq.origin, dest=self.node_id,
                             dest_seq=self.own_seq, hop_count=0,
                             lifetime=self.timers.active_route_timeout)
                self.io.unicast(sender, reply)
                self._after_unicast_rrep(reply, sender, now)
            return
        first_copy = rreq.flood_key not in self.seen_rreqs
        super().on_rreq(rreq, sender, now)
        if first_copy and self.trust_enabled and rreq.dest == self.node_id:
            self._flood_replies.setdefault(rreq.flood_key, set()).add(sender)

    # ---------------- watch registration ----------------

    def _after_broadcast_rreq(self, rreq: Rreq, now: float):
        if not self.trust_enabled:
            return
        relayed = self.trust.flood_relayers.get(rreq.flood_key, ())
        replies = self.trust.recent_replies
        fresh_cutoff = now - self.timers.allowed_hello_loss * self.timers.hello_interval
        for neighbor in sorted(self.neighbors):
            if neighbor == rreq.origin:
                continue  # the origin never relays its own flood
            if self.neighbors[neighbor] <= fresh_cutoff:
                continue
            if (neighbor in relayed
                    or (neighbor, rreq.origin, rreq.dest) in replies):
                # already proven receipt of this request
                self.trust.registered += 1
                self._resolve_success(neighbor, Phase.RREQ, now)
            else:
                self._register_watch(neighbor, Phase.RREQ, rreq.flood_key,
                                     expect_forward=True, dest=rreq.dest,
                                     now=now)

    def _after_unicast_data(self, packet: DataPacket, next_hop: int, now: float):
        if not self.trust_enabled:
            return
        self._register_watch(next_hop, Phase.DATA, packet.key,
                             expect_forward=next_hop != packet.dst,
                             dest=packet.dst, now=now)

    def _after_unicast_rrep(self, rrep: Rrep, next_hop: int, now: float):
        if not self.trust_enabled:
            return
        # receipt semantics: a neighbor holding an equal-or-better route
        # rightly swallows the reply instead of re-forwarding it, so the
        # acknowledged handoff is the only sound success signal
        self._register_watch(next_hop, Phase.RREP, rrep.key,
                             expect_forward=False, dest=None, now=now)

    def _register_watch(self, neighbor: int, phase: Phase, packet_key: tuple,
                        expect_forward: bool, dest: int | None, now: float):
        key = (neighbor, phase, packet_key)
        if key in self.trust.watches:
            return  # first registration wins
        entry = WatchdogEntry(neighbor=neighbor, phase=phase,
                              packet_key=packet_key,
                              deadline=now + self.timers.t_obs,
                              expect_forward=expect_forward, dest=dest)
        self.trust.watches[key] = entry
        self.trust.registered += 1
        self.io.schedule_watch(key, entry.deadline)

    # ---------------- watch resolution ----------------

    def on_overhear(self, transmitter: int, msg, now: float):
        if not self.trust_enabled:
            return
        kind = type(msg)
        if kind is Rreq:
            self.trust.flood_relayers.setdefault(msg.flood_key,
                                                 set()).add(transmitter)
            self._resolve_watch(transmitter, Phase.RREQ, msg.flood_key, now)
            if msg.origin == transmitter:
                # the neighbor is rediscovering this destination itself;
                # held-back data is explained, not suspicious
                self._cancel_data_watches(transmitter, (msg.dest,))
        elif kind is DataPacket:
            self._resolve_watch(transmitter, Phase.DATA, msg.key, now)
        elif kind is Rrep:
            self.trust.recent_replies[(transmitter, msg.origin, msg.dest)] = now
            self._resolve_watch(transmitter, Phase.RREP, msg.key, now)
            self._resolve_rreq_watches_by_reply(transmitter, msg.origin,
                                                msg.dest, now)
        elif kind is Rerr:
            self._cancel_data_watches(transmitter,
                                      tuple(d for d, _ in msg.unreachable))

    def on_link_ack(self, target: int, msg, now: float):
        if not self.trust_enabled:
            return
        if isinstance(msg, DataPacket):
            key = (target, Phase.DATA, msg.key)
        elif isinstance(msg, Rrep):
            key = (target, Phase.RREP, msg.key)
        else:
            return
        watch = self.trust.watches.get(key)
        if watch is None:
            return
        if watch.expect_forward:
            watch.acked = True
        else:
            # terminal hop: receipt is all that can be expected
            del self.trust.watches[key]
            self._resolve_success(target, watch.phase, now)

    def on_watch_timeout(self, watch_key, now: float):
        watch = self.trust.watches.pop(watch_key, None)
        if watch is None:
            return  # resolved before the deadline
        if watch.phase is Phase.RREQ or watch.acked:
            self.trust.failures += 1
            self._observe(watch.neighbor, watch.phase, Outcome.FAILURE, now)
            return
        # handoff never happened; not the neighbor's doing
        self.trust.cancelled += 1
        if watch.phase is Phase.DATA and watch.neighbor in self.neighbors:
            # an unacknowledged data handoff means the link is gone; react
            # now instead of waiting out the HELLO-loss window, so that
            # upstream watchers see a route error rather than silence
            self.on_link_break(watch.neighbor, now)

    def _resolve_watch(self, neighbor: int, phase: Phase, packet_key: tuple,
                       now: float):
        if self.trust.watches.pop((neighbor, phase, packet_key), None) is not None:
            self._resolve_success(neighbor, phase, now)

    def _resolve_rreq_watches_by_reply(self, neighbor: int, origin: int,
                                       dest: int, now: float):
        matches = [key for key, watch in self.trust.watches.items()
                   if key[0] == neighbor and key[1] is Phase.RREQ
                   and key[2][0] == origin and watch.dest == dest]
        for key in matches:
            del self.trust.watches[key]
            self._resolve_success(neighbor, Phase.RREQ, now)

    def _cancel_data_watches(self, neighbor: int, dests: tuple):
        matches = [key for key, watch in self.trust.watches.items()
                   if key[0] == neighbor and key[1] is Phase.DATA
                   and watch.dest in dests]
        for key in matches:
            del self.trust.watches[key]
            self.trust.cancelled += 1

    def _resolve_success(self, neighbor: int, phase: Phase, now: float):
        self.trust.successes += 1
        self._observe(neighbor, phase, Outcome.SUCCESS, now)

    def _observe(self, neighbor: int, phase: Phase, outcome: Outcome,
                 now: float):
        record = self.trust.record_for(neighbor)
        record_observation(record, phase, outcome)
        if neighbor in self.trust.blacklist:
            return
        verdict = classify(record, self.trust.params)
        if verdict.verdict is Verdict.MISBEHAVING:
            self.trust.blacklist.add(neighbor)
            self.on_misbehavior_detected(neighbor, now)

    # ---------------- routing reactions ----------------

    def on_misbehavior_detected(self, neighbor: int, now: float):
        """Cut the offender out and reroute whatever it was carrying."""
        needs_rediscovery = []
        for dest, entry in self.routes.items():
            if entry.state is RouteState.ACTIVE and entry.next_hop == neighbor:
                carried = entry.used or dest in self.pending
                self._invalidate(entry, bump_seq=True)
                if carried:
                    needs_rediscovery.append(dest)
        for dest in sorted(needs_rediscovery):
            self.originate_discovery(dest, now)

    def _next_hop_for(self, dest: int, now: float):
        next_hop = super()._next_hop_for(dest, now)
        if next_hop is not None and next_hop in self.trust.blacklist:
            self._invalidate(self.routes[dest], bump_seq=True)
            return None
        return next_hop

    def _accept_rrep_from(self, sender: int) -> bool:
        if self.trust_enabled and sender in self.trust.blacklist:
            self.counters["rrep_from_blacklisted"] += 1
            return False
        return True

    def _may_install_via(self, next_hop: int) -> bool:
        return not (self.trust_enabled and next_hop in self.trust.blacklist)

    def _purge_flood_memory(self, flood_keys, now: float):
        for key in flood_keys:
            self.trust.flood_relayers.pop(key, None)
            self._flood_replies.pop(key, None)
        if self.trust.recent_replies:
            cutoff = now - self.timers.seen_rreq_cache
            stale = [k for k, t in self.trust.recent_replies.items()
                     if t <= cutoff]
            for k in stale:
                del self.trust.recent_replies[k]
