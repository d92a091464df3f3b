"""Scenario-driven agent simulation and Monte Carlo batching."""

from .engine import (
    SimulationState,
    arbitrageur_agent_step,
    dao_agent_step,
    initialize,
    rng_for,
    run_scenario,
    trader_agent_step,
    upgrader_agent_step,
)
from .montecarlo import AggregateReport, aggregate, digest, monte_carlo, write_aggregate
from .report import SimulationReport, StepRecord, write_report
from .scenario import (
    Scenario,
    ScenarioError,
    ValidationError,
    apply_overrides,
    load_scenario,
    parse_scenario,
    validate_scenario,
)

__all__ = [
    "AggregateReport",
    "Scenario",
    "ScenarioError",
    "SimulationReport",
    "SimulationState",
    "StepRecord",
    "ValidationError",
    "aggregate",
    "apply_overrides",
    "arbitrageur_agent_step",
    "dao_agent_step",
    "digest",
    "initialize",
    "load_scenario",
    "monte_carlo",
    "parse_scenario",
    "rng_for",
    "run_scenario",
    "trader_agent_step",
    "upgrader_agent_step",
    "validate_scenario",
    "write_aggregate",
    "write_report",
]
