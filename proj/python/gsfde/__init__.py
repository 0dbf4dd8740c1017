"""Delay equations driven by G-Brownian motion: simulation, bounds and checks."""

from ._core import (
    A1Certificate,
    CoefficientSet,
    Config,
    DelayMeasure,
    ExperimentSession,
    GsfdeError,
    InitialData,
    LinearParams,
    Scenario,
    build_linear_set,
    default_config,
    experiment_names,
    initial_norm,
    integrate,
    load_config,
    parse_config,
    sample_path,
    set_threads,
    simulate,
    verify_a1,
)

__all__ = [name for name in dir() if not name.startswith("_")]
