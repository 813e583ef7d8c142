"""Deterministic MANET simulator: AODV baseline vs trust-based TBRAODV."""

from .engine import Simulation
from .metrics import RunReport, compare, compare_many
from .scenario import (
    AdversarySpec,
    ConfigError,
    FlowSpec,
    MobilitySpec,
    ScenarioConfig,
    parse_config,
    serialize_config,
)
from .simcore import InvariantViolation, RadioModel, SimulationError
from .trust import (
    NeighborTrustRecord,
    Outcome,
    Phase,
    PhaseCounters,
    TrustParams,
    Verdict,
    classify,
    phase_ratio,
    record_observation,
    trust_level,
)

__version__ = "0.1.0"

__all__ = [
    "Simulation", "RunReport", "compare", "compare_many",
    "AdversarySpec", "ConfigError", "FlowSpec", "MobilitySpec",
    "ScenarioConfig", "parse_config", "serialize_config",
    "InvariantViolation", "RadioModel", "SimulationError",
    "NeighborTrustRecord", "Outcome", "Phase", "PhaseCounters",
    "TrustParams", "Verdict", "classify", "phase_ratio",
    "record_observation", "trust_level", "__version__",
]
