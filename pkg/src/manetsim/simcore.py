"""Discrete-event primitives: queue, seeded streams, radio, mobility.

Events pop in (time, insertion counter) order, so same-time events are
processed in the order they were scheduled and a run is a pure function
of its configuration and seed.  Randomness is split into named streams
(one generator each) so that adding draws in one subsystem can never
perturb the sequences seen by another.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from . import _kernels

MOBILITY_DT = 0.1  # neighbor graph refresh cadence, seconds


class SimulationError(Exception):
    pass


class SchedulingError(SimulationError):
    """An event was scheduled before the current simulation time."""


class InvariantViolation(SimulationError):
    """A run-time consistency check failed; the run is not trustworthy."""


# event kinds
TRANSMIT = "transmit"
DELIVER = "deliver"
TIMER = "timer"
MOBILITY_STEP = "mobility_step"
WATCH_TIMEOUT = "watch_timeout"
TRAFFIC_SEND = "traffic_send"
END_OF_RUN = "end_of_run"


class EventQueue:
    """Min-heap of (time, tie_seq, kind, payload) with strict ordering."""

    def __init__(self):
        self._heap = []
        self._seq = 0
        self.now = 0.0

    def __len__(self):
        return len(self._heap)

    def schedule(self, time: float, kind: str, payload=None) -> None:
        if time < self.now:
            raise SchedulingError(
                f"event {kind!r} scheduled at {time} before now={self.now}")
        heapq.heappush(self._heap, (time, self._seq, kind, payload))
        self._seq += 1

    def pop(self):
        time, _seq, kind, payload = heapq.heappop(self._heap)
        if time < self.now:
            raise InvariantViolation("event times went backwards")
        self.now = time
        return time, kind, payload


class Prng:
    """Independent named generator streams derived from one seed."""

    STREAMS = ("mobility", "traffic", "radio_loss", "adversary")

    def __init__(self, seed: int):
        self.seed = seed
        for index, name in enumerate(self.STREAMS):
            generator = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence([seed, index])))
            setattr(self, name, generator)


@dataclass(frozen=True)
class RadioModel:
    range: float = 250.0
    per_hop_delay: float = 0.002
    loss_prob: float = 0.0

    def __post_init__(self):
        if self.range <= 0:
            raise ValueError("radio range must be positive")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must lie in [0, 1]")


@dataclass
class MotionState:
    position: tuple
    waypoint: tuple
    speed: float
    pause_until: float = 0.0


def neighbors_of(node: int, positions: np.ndarray, radio: RadioModel) -> set:
    """All other nodes within radio range (boundary inclusive)."""
    dx = positions[:, 0] - positions[node, 0]
    dy = positions[:, 1] - positions[node, 1]
    close = dx * dx + dy * dy <= radio.range * radio.range
    return {int(i) for i in np.nonzero(close)[0] if i != node}


def mobility_step(motion: MotionState, field_size: tuple, rng, dt: float,
                  speed_range: tuple = (1.0, 10.0), pause_max: float = 2.0,
                  now: float = 0.0) -> MotionState:
    """Advance one node by dt of random-waypoint motion.

    Moves toward the waypoint at speed*dt (paused nodes stand still).
    On arrival the node clamps to the waypoint, pauses for a uniform
    draw in [0, pause_max], and picks a fresh uniform waypoint and
    speed.  Uses the same kernels the engine applies to whole arrays.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    px = np.array([motion.position[0]], dtype=np.float64)
    py = np.array([motion.position[1]], dtype=np.float64)
    wx = np.array([motion.waypoint[0]], dtype=np.float64)
    wy = np.array([motion.waypoint[1]], dtype=np.float64)
    speed = np.array([motion.speed], dtype=np.float64)
    pause = np.array([motion.pause_until], dtype=np.float64)
    arrived = np.zeros(1, dtype=np.bool_)
    _kernels.advance(px, py, wx, wy, speed, pause, now, dt, arrived)
    new = MotionState(position=(float(px[0]), float(py[0])),
                      waypoint=motion.waypoint, speed=motion.speed,
                      pause_until=motion.pause_until)
    if arrived[0]:
        new.pause_until = now + dt + float(rng.uniform(0.0, pause_max))
        new.waypoint = (float(rng.uniform(0.0, field_size[0])),
                        float(rng.uniform(0.0, field_size[1])))
        new.speed = float(rng.uniform(speed_range[0], speed_range[1]))
    return new


class MobilityField:
    """Random-waypoint motion of the whole population, array-backed."""

    def __init__(self, width: float, height: float, v_min: float,
                 v_max: float, pause_max: float, rng):
        self.width = width
        self.height = height
        self.v_min = v_min
        self.v_max = v_max
        self.pause_max = pause_max
        self.rng = rng
        self.px = None
        self.py = None
        self.wx = None
        self.wy = None
        self.speed = None
        self.pause_until = None
        self._arrived = None

    @property
    def static(self) -> bool:
        return self.v_max <= 0.0

    def populate(self, count: int, positions=None):
        if positions is not None:
            positions = np.asarray(positions, dtype=np.float64)
            self.px = positions[:, 0].copy()
            self.py = positions[:, 1].copy()
        else:
            self.px = self.rng.uniform(0.0, self.width, count)
            self.py = self.rng.uniform(0.0, self.height, count)
        self.wx = self.rng.uniform(0.0, self.width, count)
        self.wy = self.rng.uniform(0.0, self.height, count)
        self.speed = self.rng.uniform(self.v_min, self.v_max, count)
        self.pause_until = np.zeros(count, dtype=np.float64)
        self._arrived = np.zeros(count, dtype=np.bool_)

    def step(self, now: float, dt: float = MOBILITY_DT):
        arrived = _kernels.advance(self.px, self.py, self.wx, self.wy,
                                   self.speed, self.pause_until, now, dt,
                                   self._arrived)
        idx = np.nonzero(arrived)[0]
        if idx.size:
            # draw order is pinned: pause, then waypoint, then speed
            self.pause_until[idx] = now + self.rng.uniform(
                0.0, self.pause_max, idx.size)
            self.wx[idx] = self.rng.uniform(0.0, self.width, idx.size)
            self.wy[idx] = self.rng.uniform(0.0, self.height, idx.size)
            self.speed[idx] = self.rng.uniform(self.v_min, self.v_max, idx.size)

    def positions(self) -> np.ndarray:
        return np.stack([self.px, self.py], axis=1)


class NeighborGraph:
    """Unit-disk adjacency over current positions.

    The boolean matrix is refreshed on every mobility step; per-node
    neighbor tuples are materialized lazily because only a handful of
    nodes transmit between two refreshes.
    """

    def __init__(self, count: int, radio_range: float):
        self.range2 = radio_range * radio_range
        self.matrix = np.zeros((count, count), dtype=np.bool_)
        self._version = 0
        self._rows: dict[int, tuple] = {}

    def rebuild(self, px: np.ndarray, py: np.ndarray):
        _kernels.adjacency(px, py, self.range2, self.matrix)
        self._version += 1
        self._rows.clear()

    def in_range(self, a: int, b: int) -> bool:
        return bool(self.matrix[a, b])

    def neighbors(self, node: int) -> tuple:
        row = self._rows.get(node)
        if row is None:
            row = tuple(int(j) for j in np.nonzero(self.matrix[node])[0])
            self._rows[node] = row
        return row
