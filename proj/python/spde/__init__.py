"""Galerkin SPDE solver and diagnostics (Python bindings)."""

from ._spde import (
    ConfigError,
    NumericalBlowup,
    OperatorPair,
    SpectralField,
    UsageError,
    __version__,
    advection,
    inner,
    leray_project,
    mu,
    norm,
    parse_config,
    project_n,
    random_field,
    run,
    run_study,
    simulate,
    solenoidal_mode,
    tail_bound_check,
)

__all__ = [
    "ConfigError",
    "NumericalBlowup",
    "OperatorPair",
    "SpectralField",
    "UsageError",
    "__version__",
    "advection",
    "inner",
    "leray_project",
    "mu",
    "norm",
    "parse_config",
    "project_n",
    "random_field",
    "run",
    "run_study",
    "simulate",
    "solenoidal_mode",
    "tail_bound_check",
]
