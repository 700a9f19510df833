"""Executable rely/guarantee specifications with layered fault tolerance."""

from .errors import (
    ArityError,
    ConfigError,
    DomainError,
    ExplosionError,
    LftsError,
    PreconditionError,
    ReplayMismatchError,
    ScheduleMismatchError,
    SchemaError,
    ScopeViolationError,
)
from .explorer import Actor, ExploreStats, SystemConfig, explore, replay, simulate
from .injector import FaultClass, FaultScope, InjectionSchedule, Mode
from .kernel import (
    Arity,
    Layer,
    LayeredOperation,
    Outcome,
    Predicate,
    RGOperation,
    State,
    StateSchema,
    StateUpdate,
    Status,
    StepResult,
    Verdict,
    check_layer_weakening,
    check_rg_compatibility,
    evaluate_rely,
    select_layer,
    step_operation,
)
from .reference import build_gcd_system, find_min
from .trace import Event, Trace
from .train import Topology, TrainSystem, check_safety, validate_topology

__version__ = "0.1.0"
