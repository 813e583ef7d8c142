"""On-demand distance-vector routing (AODV subset).

Routes are discovered on demand: the originator floods a route request
(RREQ), the destination (or an intermediate node holding a fresh enough
route) answers with a route reply (RREP) unicast back along the reverse
path, and route errors (RERR) tear broken routes down.  Destination
sequence numbers enforce freshness and keep forwarding loop-free.
Neighbor liveness comes from periodic HELLO beacons.

Subset deliberately implemented: no gratuitous RREP, no local repair,
no expanding-ring search (fixed RREQ TTL).  Sequence numbers are plain
unbounded integers; runs are short so wraparound never happens.

Nodes are engine-agnostic: all outward effects go through the NodeIO
interface, which the simulation engine (and the unit tests) implement.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field, replace

RREQ_TTL = 32        # fixed flood radius, no expanding ring
BUFFER_CAP = 64      # per-destination pending-packet cap, FIFO eviction
DATA_HOP_LIMIT = 32  # bounds pathological forwarding during convergence


@dataclass(frozen=True)
class Timers:
    """Protocol timing constants, all configurable per scenario."""

    hello_interval: float = 1.0
    allowed_hello_loss: int = 2
    active_route_timeout: float = 10.0
    rreq_retry_timeout: float = 1.0
    rreq_retries: int = 2
    seen_rreq_cache: float = 5.0
    t_obs: float = 0.5  # watchdog observation deadline (trust variant)


DEFAULT_TIMERS = Timers()


# --------------------------------------------------------------------
# wire messages


@dataclass(frozen=True)
class Hello:
    node: int

    @property
    def key(self):
        return ("hello", self.node)


@dataclass(frozen=True)
class Rreq:
    origin: int
    origin_seq: int
    rreq_id: int
    dest: int
    dest_seq_known: int | None
    hop_count: int
    ttl: int

    @property
    def flood_key(self):
        return (self.origin, self.rreq_id)

    @property
    def key(self):
        return ("rreq", self.origin, self.rreq_id)


@dataclass(frozen=True)
class Rrep:
    origin: int     # discovery originator the reply travels toward
    dest: int       # destination the route leads to
    dest_seq: int
    hop_count: int
    lifetime: float

    @property
    def key(self):
        return ("rrep", self.origin, self.dest, self.dest_seq)


@dataclass(frozen=True)
class Rerr:
    unreachable: tuple  # ((dest, dest_seq), ...) non-empty

    @property
    def key(self):
        return ("rerr",) + tuple(d for d, _ in self.unreachable)


@dataclass
class DataPacket:
    flow_id: int
    seq: int
    src: int
    dst: int
    size: int
    sent_at: float
    hops_left: int = DATA_HOP_LIMIT

    @property
    def key(self):
        return ("data", self.flow_id, self.seq)


# --------------------------------------------------------------------
# routing state


class RouteState(enum.Enum):
    ACTIVE = "active"
    INVALID = "invalid"


@dataclass
class RouteEntry:
    dest: int
    next_hop: int
    hop_count: int
    dest_seq: int
    seq_valid: bool
    expiry: float
    state: RouteState = RouteState.ACTIVE
    used: bool = False  # carried data since install


@dataclass
class Discovery:
    retries_left: int
    token: int


class NodeIO:
    """Outward effects of a routing node; the engine supplies the real one."""

    def broadcast(self, msg):
        raise NotImplementedError

    def unicast(self, target, msg):
        raise NotImplementedError

    def deliver_local(self, packet):
        raise NotImplementedError

    def drop_data(self, packet, reason):
        raise NotImplementedError

    def schedule_retry(self, dest, delay, token):
        raise NotImplementedError

    def schedule_watch(self, watch_key, deadline):
        raise NotImplementedError

    def route_changed(self, dest):
        pass


class AodvNode:
    """Routing state machine of one node, driven by the event loop."""

    def __init__(self, node_id: int, timers: Timers, io: NodeIO):
        self.node_id = node_id
        self.timers = timers
        self.io = io
        self.own_seq = 0
        self.next_rreq_id = 0
        self.routes: dict[int, RouteEntry] = {}
        self.seen_rreqs: dict[tuple, float] = {}
        self.pending: dict[int, deque] = {}
        self.neighbors: dict[int, float] = {}  # neighbor -> last heard
        self.discoveries: dict[int, Discovery] = {}
        self._next_token = 0
        self.counters = {
            "rrep_no_reverse": 0,
            "rreq_sent": 0,
            "rerr_sent": 0,
        }

    # ---------------- inbound handlers ----------------

    def on_hello(self, sender: int, now: float):
        self.neighbors[sender] = now

    def on_rreq(self, rreq: Rreq, sender: int, now: float):
        self.neighbors[sender] = now
        if rreq.flood_key in self.seen_rreqs:
            return  # duplicate copy of the flood
        self.seen_rreqs[rreq.flood_key] = now + self.timers.seen_rreq_cache

        # reverse route toward the originator
        self._install_route(rreq.origin, sender, rreq.hop_count + 1,
                            rreq.origin_seq, now,
                            self.timers.active_route_timeout)

        if rreq.dest == self.node_id:
            known = rreq.dest_seq_known or 0
            self.own_seq = max(self.own_seq, known) + 1
            reply = Rrep(origin=rreq.origin, dest=self.node_id,
                         dest_seq=self.own_seq, hop_count=0,
                         lifetime=self.timers.active_route_timeout)
            self._send_rrep(reply, now)
            return

        entry = self.routes.get(rreq.dest)
        if (entry is not None and entry.state is RouteState.ACTIVE
                and entry.seq_valid and entry.expiry > now
                and (rreq.dest_seq_known is None
                     or entry.dest_seq >= rreq.dest_seq_known)):
            reply = Rrep(origin=rreq.origin, dest=rreq.dest,
                         dest_seq=entry.dest_seq, hop_count=entry.hop_count,
                         lifetime=max(0.0, entry.expiry - now))
            self._send_rrep(reply, now)
            return

        if rreq.ttl <= 1:
            return  # hop budget exhausted
        fwd = replace(rreq, hop_count=rreq.hop_count + 1, ttl=rreq.ttl - 1)
        self.io.broadcast(fwd)
        self._after_broadcast_rreq(fwd, now)

    def on_rrep(self, rrep: Rrep, sender: int, now: float):
        if not self._accept_rrep_from(sender):
            return
        self.neighbors[sender] = now
        hop = rrep.hop_count + 1
        installed = self._install_route(rrep.dest, sender, hop, rrep.dest_seq,
                                        now, rrep.lifetime)
        if rrep.origin == self.node_id:
            self.discoveries.pop(rrep.dest, None)
            self._flush_pending(rrep.dest, now)
            return
        if installed:
            self._send_rrep(replace(rrep, hop_count=hop), now)

    def on_rerr(self, rerr: Rerr, sender: int, now: float):
        cascade = []
        for dest, seq in rerr.unreachable:
            entry = self.routes.get(dest)
            if (entry is not None and entry.state is RouteState.ACTIVE
                    and entry.next_hop == sender):
                entry.dest_seq = max(entry.dest_seq, seq)
                self._invalidate(entry, bump_seq=False)
                cascade.append((dest, entry.dest_seq))
        if cascade:
            self._emit_rerr(cascade)

    def on_data(self, packet: DataPacket, sender: int, now: float):
        self.forward_data(packet, now)

    def on_link_ack(self, target: int, msg, now: float):
        pass  # trust variant hooks in here

    def on_overhear(self, transmitter: int, msg, now: float):
        pass  # trust variant hooks in here

    def on_watch_timeout(self, watch_key, now: float):
        pass  # trust variant hooks in here

    def on_tick(self, now: float):
        """Periodic maintenance: HELLO beacon, expiries, liveness."""
        self.io.broadcast(Hello(self.node_id))
        for entry in self.routes.values():
            if entry.state is RouteState.ACTIVE and entry.expiry <= now:
                self._invalidate(entry, bump_seq=False)
        stale = [k for k, exp in self.seen_rreqs.items() if exp <= now]
        for k in stale:
            del self.seen_rreqs[k]
        self._purge_flood_memory(stale, now)
        cutoff = now - self.timers.allowed_hello_loss * self.timers.hello_interval
        dead = sorted(n for n, last in self.neighbors.items() if last <= cutoff)
        for neighbor in dead:
            self.on_link_break(neighbor, now)

    def on_retry_timer(self, dest: int, token: int, now: float):
        disc = self.discoveries.get(dest)
        if disc is None or disc.token != token:
            return  # answered or superseded
        if disc.retries_left > 0:
            disc.retries_left -= 1
            disc.token = self._fresh_token()
            self._send_rreq(dest, now)
            self.io.schedule_retry(dest, self.timers.rreq_retry_timeout,
                                   disc.token)
            return
        del self.discoveries[dest]
        queue = self.pending.pop(dest, None)
        if queue:
            for packet in queue:
                self.io.drop_data(packet, "no_route")

    # ---------------- data plane ----------------

    def originate_data(self, packet: DataPacket, now: float):
        self.forward_data(packet, now)

    def forward_data(self, packet: DataPacket, now: float):
        if packet.dst == self.node_id:
            self.io.deliver_local(packet)
            return
        next_hop = self._next_hop_for(packet.dst, now)
        if next_hop is not None:
            if packet.hops_left <= 0:
                self.io.drop_data(packet, "hop_limit")
                return
            packet.hops_left -= 1
            entry = self.routes[packet.dst]
            entry.expiry = now + self.timers.active_route_timeout
            entry.used = True
            self.io.unicast(next_hop, packet)
            self._after_unicast_data(packet, next_hop, now)
            return
        if packet.src == self.node_id:
            self._buffer(packet)
            self.originate_discovery(packet.dst, now)
        elif packet.dst in self.discoveries:
            # a self-originated rediscovery is in flight; hold the packet
            self._buffer(packet)
        else:
            entry = self.routes.get(packet.dst)
            seq = entry.dest_seq if entry is not None else 0
            self._emit_rerr([(packet.dst, seq)])
            self.io.drop_data(packet, "no_route")

    def originate_discovery(self, dest: int, now: float):
        if dest in self.discoveries:
            return
        disc = Discovery(retries_left=self.timers.rreq_retries,
                         token=self._fresh_token())
        self.discoveries[dest] = disc
        self._send_rreq(dest, now)
        self.io.schedule_retry(dest, self.timers.rreq_retry_timeout, disc.token)

    def on_link_break(self, neighbor: int, now: float):
        self.neighbors.pop(neighbor, None)
        broken = []
        for dest, entry in self.routes.items():
            if entry.state is RouteState.ACTIVE and entry.next_hop == neighbor:
                self._invalidate(entry, bump_seq=True)
                broken.append((dest, entry.dest_seq))
        if broken:
            self._emit_rerr(sorted(broken))

    # ---------------- internals ----------------

    def _send_rreq(self, dest: int, now: float):
        self.own_seq += 1
        self.next_rreq_id += 1
        entry = self.routes.get(dest)
        known = entry.dest_seq if entry is not None and entry.seq_valid else None
        rreq = Rreq(origin=self.node_id, origin_seq=self.own_seq,
                    rreq_id=self.next_rreq_id, dest=dest,
                    dest_seq_known=known, hop_count=0, ttl=RREQ_TTL)
        # never re-process our own flood
        self.seen_rreqs[rreq.flood_key] = now + self.timers.seen_rreq_cache
        self.counters["rreq_sent"] += 1
        self.io.broadcast(rreq)
        self._after_broadcast_rreq(rreq, now)

    def _send_rrep(self, rrep: Rrep, now: float):
        entry = self.routes.get(rrep.origin)
        if (entry is None or entry.state is not RouteState.ACTIVE
                or entry.expiry <= now):
            self.counters["rrep_no_reverse"] += 1
            return
        self.io.unicast(entry.next_hop, rrep)
        self._after_unicast_rrep(rrep, entry.next_hop, now)

    def _emit_rerr(self, unreachable):
        self.counters["rerr_sent"] += 1
        self.io.broadcast(Rerr(tuple(unreachable)))

    def _install_route(self, dest: int, next_hop: int, hop_count: int,
                       dest_seq: int, now: float, lifetime: float) -> bool:
        if dest == self.node_id:
            return False
        if not self._may_install_via(next_hop):
            return False
        entry = self.routes.get(dest)
        if entry is not None and entry.seq_valid:
            fresher = (dest_seq > entry.dest_seq
                       or (dest_seq == entry.dest_seq
                           and (entry.state is not RouteState.ACTIVE
                                or hop_count < entry.hop_count)))
            if not fresher:
                return False
        self.routes[dest] = RouteEntry(dest=dest, next_hop=next_hop,
                                       hop_count=hop_count, dest_seq=dest_seq,
                                       seq_valid=True, expiry=now + lifetime)
        self.io.route_changed(dest)
        return True

    def _invalidate(self, entry: RouteEntry, bump_seq: bool):
        entry.state = RouteState.INVALID
        entry.used = False
        if bump_seq:
            entry.dest_seq += 1
        self.io.route_changed(entry.dest)

    def _next_hop_for(self, dest: int, now: float):
        entry = self.routes.get(dest)
        if entry is None or entry.state is not RouteState.ACTIVE:
            return None
        if entry.expiry <= now:
            self._invalidate(entry, bump_seq=False)
            return None
        return entry.next_hop

    def _buffer(self, packet: DataPacket):
        queue = self.pending.setdefault(packet.dst, deque())
        if len(queue) >= BUFFER_CAP:
            oldest = queue.popleft()
            self.io.drop_data(oldest, "buffer_overflow")
        queue.append(packet)

    def _flush_pending(self, dest: int, now: float):
        queue = self.pending.pop(dest, None)
        if not queue:
            return
        while queue:
            self.forward_data(queue.popleft(), now)

    def _fresh_token(self) -> int:
        self._next_token += 1
        return self._next_token

    # hooks the trust variant overrides
    def _accept_rrep_from(self, sender: int) -> bool:
        return True

    def _may_install_via(self, next_hop: int) -> bool:
        return True

    def _after_broadcast_rreq(self, rreq: Rreq, now: float):
        pass

    def _after_unicast_data(self, packet: DataPacket, next_hop: int, now: float):
        pass

    def _after_unicast_rrep(self, rrep: Rrep, next_hop: int, now: float):
        pass

    def _purge_flood_memory(self, flood_keys, now: float):
        pass
