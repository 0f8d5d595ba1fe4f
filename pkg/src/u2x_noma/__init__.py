"""Outage, ergodic-rate and spectrum-efficiency evaluation for a NOMA
UAV-to-ground downlink with 3-D randomly placed receivers.

Closed-form results live in :mod:`u2x_noma.analytic`; the independent
Monte-Carlo oracle in :mod:`u2x_noma.montecarlo`; slope/diversity fits in
:mod:`u2x_noma.metrics`; the sweep engine and CLI in :mod:`u2x_noma.sweep`
and :mod:`u2x_noma.cli`.
"""

from .analytic import ErgodicSeriesControl, OutageInputs
from .model import (
    ChannelConfig,
    GeometryConfig,
    LinkBudget,
    LosMixture,
    Method,
    MetricEstimate,
    RateTargets,
    Scenario,
    ValidationReport,
    dbm_to_watts,
    is_feasible,
    rician_k_to_nakagami_m,
    validate,
    watts_to_dbm,
)
from .montecarlo import SeedPolicy
from .sweep import ConfigError, SweepSpec, load_spec, run_sweep

__all__ = [
    "ChannelConfig",
    "ConfigError",
    "ErgodicSeriesControl",
    "GeometryConfig",
    "LinkBudget",
    "LosMixture",
    "Method",
    "MetricEstimate",
    "OutageInputs",
    "RateTargets",
    "Scenario",
    "SeedPolicy",
    "SweepSpec",
    "ValidationReport",
    "dbm_to_watts",
    "is_feasible",
    "load_spec",
    "rician_k_to_nakagami_m",
    "run_sweep",
    "validate",
    "watts_to_dbm",
]

__version__ = "0.1.0"
