"""The simulation run: one scenario, one seed, one protocol.

Everything observable about a run is a pure function of the scenario
configuration (seed included).  The loop pops events in (time,
insertion) order; handlers may only schedule into the present or
future.  Radio semantics: a transmission reaches every in-range node
independently with probability 1 - loss_prob after a fixed per-hop
delay; every reception is also offered to the receiver's promiscuous
watchdog, and a delivered unicast additionally acknowledges receipt to
the sender.  A unicast toward an out-of-range target produces nothing
at all; HELLO-loss (or the watchdog) is what notices dead links.

Misbehaving nodes drop data packets they are asked to forward (always
for blackholes, with a fixed probability for grayholes) but take part
in the control plane exactly like honest nodes, so they attract routes
before dropping.
"""

from __future__ import annotations

from .aodv import AodvNode, DataPacket, Hello, NodeIO, Rerr, Rrep, Rreq
from .metrics import MetricsCollector
from .scenario import AdversaryModel, ScenarioConfig, instantiate, validate
from .simcore import (
    DELIVER,
    END_OF_RUN,
    MOBILITY_DT,
    MOBILITY_STEP,
    TIMER,
    TRAFFIC_SEND,
    TRANSMIT,
    WATCH_TIMEOUT,
    EventQueue,
    InvariantViolation,
    MobilityField,
    NeighborGraph,
    Prng,
    RadioModel,
)
from .tbraodv import TbraodvNode

# deliver modes
_BROADCAST = 0
_UNICAST_TARGET = 1
_BYSTANDER = 2


class _EngineIO(NodeIO):
    __slots__ = ("sim", "node")

    def __init__(self, sim, node):
        self.sim = sim
        self.node = node

    def broadcast(self, msg):
        queue = self.sim.queue
        queue.schedule(queue.now, TRANSMIT, (self.node, msg, None))

    def unicast(self, target, msg):
        queue = self.sim.queue
        queue.schedule(queue.now, TRANSMIT, (self.node, msg, target))

    def deliver_local(self, packet):
        self.sim._data_delivered(self.node, packet)

    def drop_data(self, packet, reason):
        self.sim._data_dropped(self.node, packet, reason)

    def schedule_retry(self, dest, delay, token):
        queue = self.sim.queue
        queue.schedule(queue.now + delay, TIMER,
                       ("retry", self.node, dest, token))

    def schedule_watch(self, watch_key, deadline):
        self.sim.queue.schedule(deadline, WATCH_TIMEOUT,
                                (self.node, watch_key))

    def route_changed(self, dest):
        if self.sim.check_loops:
            self.sim.assert_loop_free(dest)


def _key_str(msg) -> str:
    return ":".join(str(part) for part in msg.key)


class Simulation:
    """One deterministic run; create, call run(), read the report."""

    def __init__(self, config: ScenarioConfig, *, positions=None,
                 collect_trace: bool = False, check_loops: bool = False):
        validate(config)
        self.config = config
        self.radio = config.radio
        self.prng = Prng(config.seed)
        setup = instantiate(config, self.prng, positions)
        self.adversaries = setup.adversaries
        self.adversary_model = AdversaryModel(config.adversary,
                                              setup.adversaries,
                                              self.prng.adversary)
        self.mobility = MobilityField(config.field[0], config.field[1],
                                      config.mobility.v_min,
                                      config.mobility.v_max,
                                      config.mobility.pause_max,
                                      self.prng.mobility)
        self.mobility.populate(config.node_count, setup.positions)
        self.graph = NeighborGraph(config.node_count, config.radio.range)
        self.graph.rebuild(self.mobility.px, self.mobility.py)
        self.queue = EventQueue()
        self.metrics = MetricsCollector(len(config.flows))
        self.check_loops = check_loops
        self.trace = [] if collect_trace else None

        if config.protocol == "tbraodv":
            self.nodes = [TbraodvNode(i, config.timers, _EngineIO(self, i),
                                      config.trust)
                          for i in range(config.node_count)]
            # with trust disabled nobody consumes overhearings, and the
            # run must be indistinguishable from the baseline
            self._wants_overhear = self.nodes[0].trust_enabled
        else:
            self.nodes = [AodvNode(i, config.timers, _EngineIO(self, i))
                          for i in range(config.node_count)]
            self._wants_overhear = False

        self.queue.schedule(config.duration, END_OF_RUN, None)
        if not self.mobility.static:
            self.queue.schedule(MOBILITY_DT, MOBILITY_STEP, 1)
        for node in range(config.node_count):
            self.queue.schedule(0.0, TIMER, ("tick", node, 0))
        for send_time, flow_index, seq in setup.sends:
            self.queue.schedule(send_time, TRAFFIC_SEND, (flow_index, seq))

    # ---------------- main loop ----------------

    def run(self):
        queue = self.queue
        trace = self.trace
        while len(queue):
            now, kind, payload = queue.pop()
            if trace is not None:
                trace.append(self._trace_line(now, kind, payload))
            if kind is DELIVER:
                self._process_deliver(payload, now)
            elif kind is TRANSMIT:
                self._process_transmit(payload, now)
            elif kind is WATCH_TIMEOUT:
                node, watch_key = payload
                self.nodes[node].on_watch_timeout(watch_key, now)
            elif kind is TIMER:
                self._process_timer(payload, now)
            elif kind is TRAFFIC_SEND:
                self._process_traffic(payload, now)
            elif kind is MOBILITY_STEP:
                self._process_mobility(payload, now)
            else:  # END_OF_RUN
                break
        return self._finalize()

    def _process_transmit(self, payload, now):
        sender, msg, target = payload
        if target is None or self._wants_overhear:
            # bystanders hear the transmission whether or not the
            # addressed target is still in range
            receivers = self.graph.neighbors(sender)
        elif self.graph.matrix[sender, target]:
            receivers = (target,)
        else:
            receivers = ()
        loss = self.radio.loss_prob
        schedule = self.queue.schedule
        deliver_at = now + self.radio.per_hop_delay
        rng = self.prng.radio_loss
        target_reached = False
        for receiver in receivers:
            if loss and rng.random() < loss:
                continue
            if target is None:
                mode = _BROADCAST
            elif receiver == target:
                mode = _UNICAST_TARGET
                target_reached = True
            else:
                mode = _BYSTANDER
            schedule(deliver_at, DELIVER, (sender, msg, receiver, mode))
        if target is not None and not target_reached and type(msg) is DataPacket:
            self._data_dropped(sender, msg, "radio_loss")

    def _process_deliver(self, payload, now):
        sender, msg, receiver, mode = payload
        node = self.nodes[receiver]
        if self._wants_overhear:
            node.on_overhear(sender, msg, now)
        if mode == _BYSTANDER:
            return
        kind = type(msg)
        if kind is Hello:
            node.on_hello(sender, now)
        elif kind is DataPacket:
            if receiver != msg.dst and receiver in self.adversaries:
                if self.adversary_model.filter(receiver, True) == AdversaryModel.DROP:
                    self._data_dropped(receiver, msg, "adversary")
                    if mode == _UNICAST_TARGET:
                        self.nodes[sender].on_link_ack(receiver, msg, now)
                    return
            node.on_data(msg, sender, now)
        elif kind is Rreq:
            node.on_rreq(msg, sender, now)
        elif kind is Rrep:
            node.on_rrep(msg, sender, now)
        else:
            node.on_rerr(msg, sender, now)
        if mode == _UNICAST_TARGET:
            self.nodes[sender].on_link_ack(receiver, msg, now)

    def _process_timer(self, payload, now):
        if payload[0] == "tick":
            _, node, k = payload
            self.nodes[node].on_tick(now)
            next_time = (k + 1) * self.config.timers.hello_interval
            if next_time < self.config.duration:
                self.queue.schedule(next_time, TIMER, ("tick", node, k + 1))
        else:
            _, node, dest, token = payload
            self.nodes[node].on_retry_timer(dest, token, now)

    def _process_traffic(self, payload, now):
        flow_index, seq = payload
        flow = self.config.flows[flow_index]
        packet = DataPacket(flow_id=flow_index, seq=seq, src=flow.src,
                            dst=flow.dst, size=flow.packet_size, sent_at=now)
        self.metrics.record_send(packet, now)
        self.nodes[flow.src].originate_data(packet, now)

    def _process_mobility(self, k, now):
        self.mobility.step(now)
        self.graph.rebuild(self.mobility.px, self.mobility.py)
        next_time = (k + 1) * MOBILITY_DT
        if next_time < self.config.duration:
            self.queue.schedule(next_time, MOBILITY_STEP, k + 1)

    # ---------------- packet terminals ----------------

    def _data_delivered(self, node, packet):
        self.metrics.record_delivery(packet, self.queue.now)
        if self.trace is not None:
            self.trace.append(
                f"{self.queue.now:.6f} delivered {node} {_key_str(packet)}")

    def _data_dropped(self, node, packet, reason):
        self.metrics.record_drop(packet, reason, self.queue.now)
        if self.trace is not None:
            self.trace.append(
                f"{self.queue.now:.6f} drop_{reason} {node} {_key_str(packet)}")

    # ---------------- reporting ----------------

    def _finalize(self):
        trust_ledgers = None
        blacklists = None
        if self.config.protocol == "tbraodv":
            trust_ledgers = {n.node_id: n.trust.ledger for n in self.nodes}
            blacklists = {n.node_id: n.trust.blacklist for n in self.nodes}
        fraction = (len(self.adversaries) / self.config.node_count
                    if self.config.node_count else 0.0)
        return self.metrics.finalize(
            protocol=self.config.protocol, seed=self.config.seed,
            node_count=self.config.node_count,
            adversary_fraction=fraction,
            duration=self.config.duration,
            trust_ledgers=trust_ledgers, blacklists=blacklists,
            adversaries=self.adversaries,
            comparison_key=self.config.comparison_key())

    def _trace_line(self, now, kind, payload) -> str:
        if kind is DELIVER:
            sender, msg, receiver, _mode = payload
            return f"{now:.6f} deliver {receiver} {_key_str(msg)}<{sender}"
        if kind is TRANSMIT:
            sender, msg, target = payload
            suffix = "" if target is None else f">{target}"
            return f"{now:.6f} transmit {sender} {_key_str(msg)}{suffix}"
        if kind is TIMER:
            if payload[0] == "tick":
                return f"{now:.6f} timer {payload[1]} tick:{payload[2]}"
            return f"{now:.6f} timer {payload[1]} retry:{payload[2]}:{payload[3]}"
        if kind is TRAFFIC_SEND:
            flow_index, seq = payload
            flow = self.config.flows[flow_index]
            return f"{now:.6f} traffic_send {flow.src} data:{flow_index}:{seq}"
        if kind is WATCH_TIMEOUT:
            node, (neighbor, phase, packet_key) = payload
            key = ":".join(str(p) for p in packet_key)
            return f"{now:.6f} watch_timeout {node} {neighbor}:{phase.value}:{key}"
        if kind is MOBILITY_STEP:
            return f"{now:.6f} mobility_step -1 step:{payload}"
        return f"{now:.6f} end_of_run -1 -"

    # ---------------- invariants ----------------

    def assert_loop_free(self, dest: int):
        """No next-hop cycle among currently active routes toward dest."""
        from .aodv import RouteState
        state: dict[int, int] = {}
        for start in range(len(self.nodes)):
            if state.get(start) == 1:
                continue
            path = []
            node = start
            while True:
                mark = state.get(node)
                if mark == 1:
                    break
                if mark == 0:
                    raise InvariantViolation(
                        f"routing loop toward {dest} via {path + [node]}")
                if node == dest:
                    break
                entry = self.nodes[node].routes.get(dest)
                if entry is None or entry.state is not RouteState.ACTIVE:
                    break
                state[node] = 0
                path.append(node)
                node = entry.next_hop
            for visited in path:
                state[visited] = 1

    def watch_accounting(self):
        """(registered, successes, failures, cancelled, live) over all nodes."""
        registered = successes = failures = cancelled = live = 0
        for node in self.nodes:
            trust = getattr(node, "trust", None)
            if trust is None:
                continue
            registered += trust.registered
            successes += trust.successes
            failures += trust.failures
            cancelled += trust.cancelled
            live += len(trust.watches)
        return registered, successes, failures, cancelled, live
