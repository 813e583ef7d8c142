"""Scenario configuration: parsing, validation, instantiation, adversaries.

Config files are line oriented: ``#`` starts a comment, section headers
are ``[general]``, ``[radio]``, ``[mobility]``, ``[trust]``, ``[timers]``,
``[adversary]`` and one ``[flow]`` section per traffic flow.  Inside a
section each line is ``key = value`` with keys named exactly after the
corresponding configuration fields; lists are comma separated and
booleans are ``true``/``false``.  Unknown sections or keys are errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from dataclasses import field as _field

import numpy as np

from .aodv import Timers
from .simcore import RadioModel
from .trust import TrustParams


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class FlowSpec:
    src: int
    dst: int
    rate: float = 4.0        # packets per second
    packet_size: int = 512   # bytes
    start: float = 1.0
    stop: float | None = None  # None: runs until the scenario ends


@dataclass(frozen=True)
class AdversarySpec:
    mode: str = "none"            # none | fraction | explicit
    fraction: float = 0.0
    nodes: tuple = ()
    behavior: str = "blackhole"   # blackhole | grayhole
    drop_prob: float = 1.0


@dataclass(frozen=True)
class MobilitySpec:
    v_min: float = 1.0
    v_max: float = 10.0
    pause_max: float = 2.0


@dataclass(frozen=True)
class ScenarioConfig:
    node_count: int
    field: tuple = (1600.0, 1600.0)
    duration: float = 300.0
    protocol: str = "aodv"
    seed: int = 1
    radio: RadioModel = _field(default_factory=RadioModel)
    mobility: MobilitySpec = _field(default_factory=MobilitySpec)
    trust: TrustParams = _field(default_factory=TrustParams)
    timers: Timers = _field(default_factory=Timers)
    adversary: AdversarySpec = _field(default_factory=AdversarySpec)
    flows: tuple = ()

    def flow_stop(self, flow: FlowSpec) -> float:
        return self.duration if flow.stop is None else flow.stop

    def comparison_key(self) -> tuple:
        """Everything that must match for an A/B comparison."""
        return (self.node_count, self.field, self.duration, self.radio,
                self.mobility, self.trust, self.timers, self.adversary,
                self.flows)


def validate(config: ScenarioConfig) -> ScenarioConfig:
    if config.node_count < 2:
        raise ConfigError("node_count must be at least 2")
    if config.duration <= 0:
        raise ConfigError("duration must be positive")
    if config.protocol not in ("aodv", "tbraodv"):
        raise ConfigError(f"unknown protocol {config.protocol!r}")
    if config.field[0] <= 0 or config.field[1] <= 0:
        raise ConfigError("field dimensions must be positive")
    mob = config.mobility
    if mob.v_min < 0 or mob.v_max < mob.v_min or mob.pause_max < 0:
        raise ConfigError("mobility speeds need 0 <= v_min <= v_max")
    adv = config.adversary
    if adv.mode not in ("none", "fraction", "explicit"):
        raise ConfigError(f"unknown adversary mode {adv.mode!r}")
    if adv.behavior not in ("blackhole", "grayhole"):
        raise ConfigError(f"unknown adversary behavior {adv.behavior!r}")
    if not 0.0 <= adv.fraction <= 1.0:
        raise ConfigError("adversary fraction must lie in [0, 1]")
    if not 0.0 < adv.drop_prob <= 1.0:
        raise ConfigError("grayhole drop_prob must lie in (0, 1]")
    for node in adv.nodes:
        if not 0 <= node < config.node_count:
            raise ConfigError(f"adversary node id {node} out of range")
    trust = config.trust
    if min(trust.weight_rreq, trust.weight_rrep, trust.weight_data) <= 0:
        raise ConfigError("trust weights must be positive")
    weight_sum = trust.weight_rreq + trust.weight_rrep + trust.weight_data
    if not math.isinf(trust.threshold) and trust.threshold >= weight_sum:
        raise ConfigError("trust threshold must stay below the weight sum")
    for i, flow in enumerate(config.flows):
        if not 0 <= flow.src < config.node_count:
            raise ConfigError(f"flow {i}: src node id out of range")
        if not 0 <= flow.dst < config.node_count:
            raise ConfigError(f"flow {i}: dst node id out of range")
        if flow.src == flow.dst:
            raise ConfigError(f"flow {i}: src and dst must differ")
        if flow.rate <= 0 or flow.packet_size <= 0:
            raise ConfigError(f"flow {i}: rate and packet_size must be positive")
        stop = config.flow_stop(flow)
        if not flow.start < stop <= config.duration:
            raise ConfigError(f"flow {i}: need start < stop <= duration")
    return config


# --------------------------------------------------------------------
# config file format

_SECTIONS = ("general", "radio", "mobility", "trust", "timers", "adversary",
             "flow")

_KEYS = {
    "general": ("field", "node_count", "duration", "protocol", "seed"),
    "radio": ("range", "per_hop_delay", "loss_prob"),
    "mobility": ("v_min", "v_max", "pause_max"),
    "trust": ("weight_rreq", "weight_rrep", "weight_data", "threshold",
              "min_observations"),
    "timers": ("hello_interval", "allowed_hello_loss", "active_route_timeout",
               "rreq_retry_timeout", "rreq_retries", "seen_rreq_cache",
               "t_obs"),
    "adversary": ("mode", "fraction", "nodes", "behavior", "drop_prob"),
    "flow": ("src", "dst", "rate", "packet_size", "start", "stop"),
}


def _parse_value(kind, raw, lineno, key):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            if raw not in ("true", "false"):
                raise ValueError(raw)
            return raw == "true"
    except ValueError:
        raise ConfigError(
            f"line {lineno}: malformed value for key {key!r}: {raw!r}") from None
    return raw


def parse_config(text: str) -> ScenarioConfig:
    sections: dict[str, dict] = {}
    flows: list[dict] = []
    current: dict | None = None
    current_name = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{name}]")
            if name == "flow":
                current = {}
                flows.append(current)
            else:
                if name in sections:
                    raise ConfigError(f"line {lineno}: duplicate section [{name}]")
                current = sections.setdefault(name, {})
            current_name = name
            continue
        if "=" not in line or current is None:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEYS[current_name]:
            raise ConfigError(
                f"line {lineno}: unknown key {key!r} in section [{current_name}]")
        if key in current:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        current[key] = (value, lineno)

    def take(section, key, kind, default):
        entry = sections.get(section, {}).get(key)
        if entry is None:
            return default
        raw, lineno = entry
        return _parse_value(kind, raw, lineno, key)

    general = sections.get("general", {})
    if "node_count" not in general:
        raise ConfigError("missing required key 'node_count' in [general]")

    field_entry = general.get("field")
    if field_entry is None:
        field_wh = (1600.0, 1600.0)
    else:
        raw, lineno = field_entry
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != 2:
            raise ConfigError(f"line {lineno}: field needs 'width,height'")
        field_wh = (_parse_value(float, parts[0], lineno, "field"),
                    _parse_value(float, parts[1], lineno, "field"))

    nodes_entry = sections.get("adversary", {}).get("nodes")
    if nodes_entry is None:
        adv_nodes = ()
    else:
        raw, lineno = nodes_entry
        adv_nodes = tuple(_parse_value(int, p.strip(), lineno, "nodes")
                          for p in raw.split(",") if p.strip())

    flow_specs = []
    for flow in flows:
        def take_flow(key, kind, default, flow=flow):
            entry = flow.get(key)
            if entry is None:
                return default
            raw, lineno = entry
            return _parse_value(kind, raw, lineno, key)

        for required in ("src", "dst"):
            if required not in flow:
                raise ConfigError(f"[flow] section missing key {required!r}")
        flow_specs.append(FlowSpec(
            src=take_flow("src", int, None),
            dst=take_flow("dst", int, None),
            rate=take_flow("rate", float, 4.0),
            packet_size=take_flow("packet_size", int, 512),
            start=take_flow("start", float, 1.0),
            stop=take_flow("stop", float, None)))

    config = ScenarioConfig(
        node_count=take("general", "node_count", int, None),
        field=field_wh,
        duration=take("general", "duration", float, 300.0),
        protocol=take("general", "protocol", str, "aodv"),
        seed=take("general", "seed", int, 1),
        radio=RadioModel(
            range=take("radio", "range", float, 250.0),
            per_hop_delay=take("radio", "per_hop_delay", float, 0.002),
            loss_prob=take("radio", "loss_prob", float, 0.0)),
        mobility=MobilitySpec(
            v_min=take("mobility", "v_min", float, 1.0),
            v_max=take("mobility", "v_max", float, 10.0),
            pause_max=take("mobility", "pause_max", float, 2.0)),
        trust=TrustParams(
            weight_rreq=take("trust", "weight_rreq", float, 1.0),
            weight_rrep=take("trust", "weight_rrep", float, 2.0),
            weight_data=take("trust", "weight_data", float, 6.0),
            threshold=take("trust", "threshold", float, 5.0),
            min_observations=take("trust", "min_observations", int, 10)),
        timers=Timers(
            hello_interval=take("timers", "hello_interval", float, 1.0),
            allowed_hello_loss=take("timers", "allowed_hello_loss", int, 2),
            active_route_timeout=take("timers", "active_route_timeout", float, 10.0),
            rreq_retry_timeout=take("timers", "rreq_retry_timeout", float, 1.0),
            rreq_retries=take("timers", "rreq_retries", int, 2),
            seen_rreq_cache=take("timers", "seen_rreq_cache", float, 5.0),
            t_obs=take("timers", "t_obs", float, 0.5)),
        adversary=AdversarySpec(
            mode=take("adversary", "mode", str, "none"),
            fraction=take("adversary", "fraction", float, 0.0),
            nodes=adv_nodes,
            behavior=take("adversary", "behavior", str, "blackhole"),
            drop_prob=take("adversary", "drop_prob", float, 1.0)),
        flows=tuple(flow_specs))
    return validate(config)


def serialize_config(config: ScenarioConfig) -> str:
    """Canonical text form; parse_config round-trips it."""
    lines = [
        "[general]",
        f"field = {config.field[0]!r},{config.field[1]!r}",
        f"node_count = {config.node_count}",
        f"duration = {config.duration!r}",
        f"protocol = {config.protocol}",
        f"seed = {config.seed}",
        "",
        "[radio]",
        f"range = {config.radio.range!r}",
        f"per_hop_delay = {config.radio.per_hop_delay!r}",
        f"loss_prob = {config.radio.loss_prob!r}",
        "",
        "[mobility]",
        f"v_min = {config.mobility.v_min!r}",
        f"v_max = {config.mobility.v_max!r}",
        f"pause_max = {config.mobility.pause_max!r}",
        "",
        "[trust]",
        f"weight_rreq = {config.trust.weight_rreq!r}",
        f"weight_rrep = {config.trust.weight_rrep!r}",
        f"weight_data = {config.trust.weight_data!r}",
        f"threshold = {config.trust.threshold!r}",
        f"min_observations = {config.trust.min_observations}",
        "",
        "[timers]",
        f"hello_interval = {config.timers.hello_interval!r}",
        f"allowed_hello_loss = {config.timers.allowed_hello_loss}",
        f"active_route_timeout = {config.timers.active_route_timeout!r}",
        f"rreq_retry_timeout = {config.timers.rreq_retry_timeout!r}",
        f"rreq_retries = {config.timers.rreq_retries}",
        f"seen_rreq_cache = {config.timers.seen_rreq_cache!r}",
        f"t_obs = {config.timers.t_obs!r}",
        "",
        "[adversary]",
        f"mode = {config.adversary.mode}",
        f"fraction = {config.adversary.fraction!r}",
        f"behavior = {config.adversary.behavior}",
        f"drop_prob = {config.adversary.drop_prob!r}",
    ]
    if config.adversary.nodes:
        lines.append("nodes = " + ",".join(str(n) for n in config.adversary.nodes))
    for flow in config.flows:
        lines += [
            "",
            "[flow]",
            f"src = {flow.src}",
            f"dst = {flow.dst}",
            f"rate = {flow.rate!r}",
            f"packet_size = {flow.packet_size}",
            f"start = {flow.start!r}",
        ]
        if flow.stop is not None:
            lines.append(f"stop = {flow.stop!r}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------
# instantiation

@dataclass
class SimSetup:
    positions: np.ndarray
    adversaries: frozenset
    sends: list  # (time, flow index, packet seq), in schedule order


def flow_endpoints(config: ScenarioConfig) -> set:
    endpoints = set()
    for flow in config.flows:
        endpoints.add(flow.src)
        endpoints.add(flow.dst)
    return endpoints


def select_adversaries(config: ScenarioConfig, rng) -> frozenset:
    adv = config.adversary
    if adv.mode == "none":
        return frozenset()
    if adv.mode == "explicit":
        return frozenset(adv.nodes)
    count = int(adv.fraction * config.node_count)
    candidates = sorted(set(range(config.node_count)) - flow_endpoints(config))
    if count > len(candidates):
        raise ConfigError(
            f"cannot pick {count} adversaries from {len(candidates)} "
            "non-endpoint nodes")
    if count == 0:
        return frozenset()
    chosen = rng.choice(np.array(candidates), size=count, replace=False)
    return frozenset(int(n) for n in chosen)


def traffic_schedule(config: ScenarioConfig) -> list:
    sends = []
    for index, flow in enumerate(config.flows):
        stop = config.flow_stop(flow)
        seq = 0
        while True:
            t = flow.start + seq / flow.rate
            if t >= stop:
                break
            sends.append((t, index, seq))
            seq += 1
    return sends


def instantiate(config: ScenarioConfig, prng, positions=None) -> SimSetup:
    """Initial node placement, adversary choice and traffic schedule.

    Positions are uniform over the field unless explicitly provided
    (protocol tests build exact topologies that way).
    """
    if positions is None:
        px = prng.mobility.uniform(0.0, config.field[0], config.node_count)
        py = prng.mobility.uniform(0.0, config.field[1], config.node_count)
        positions = np.stack([px, py], axis=1)
    else:
        positions = np.asarray(positions, dtype=np.float64)
        if positions.shape != (config.node_count, 2):
            raise ConfigError("positions must be an (node_count, 2) array")
    adversaries = select_adversaries(config, prng.adversary)
    return SimSetup(positions=positions, adversaries=adversaries,
                    sends=traffic_schedule(config))


class AdversaryModel:
    """Data-plane dropper with an honest control plane."""

    FORWARD = "forward"
    DROP = "drop"

    def __init__(self, spec: AdversarySpec, members: frozenset, rng):
        self.spec = spec
        self.members = members
        self.rng = rng

    def filter(self, node: int, is_data: bool) -> str:
        """Decide whether a flagged node forwards the packet it holds."""
        if node not in self.members or not is_data:
            return self.FORWARD
        if self.spec.behavior == "blackhole":
            return self.DROP
        if self.rng.random() < self.spec.drop_prob:
            return self.DROP
        return self.FORWARD
