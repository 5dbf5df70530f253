"""Moving point source reconstruction from sparse wave measurements."""

from ._core import (
    ConfigError,
    Record,
    SamplingGrid,
    Scenario,
    SingularityError,
    add_noise,
    build_scenario,
    derive_seed,
    indicator,
    path_error,
    read_path,
    run_adsm,
    run_pipeline,
    simulate,
    sweep,
)

__all__ = [
    "ConfigError",
    "Record",
    "SamplingGrid",
    "Scenario",
    "SingularityError",
    "add_noise",
    "build_scenario",
    "derive_seed",
    "indicator",
    "path_error",
    "read_path",
    "run_adsm",
    "run_pipeline",
    "simulate",
    "sweep",
]
