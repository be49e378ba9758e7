"""Affine combinations of diffusion LMS strategies: simulation, theory and comparison."""

from ._core import (
    ConfigError,
    DomainError,
    Error,
    ExperimentConfig,
    GraphStats,
    IoError,
    ParseError,
    SeriesTable,
    Topology,
    build_preset,
    compare,
    load_config,
    optimal_gamma,
    parse_config,
    read_table,
    simulate,
    theory,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "Error",
    "ExperimentConfig",
    "GraphStats",
    "IoError",
    "ParseError",
    "SeriesTable",
    "Topology",
    "build_preset",
    "compare",
    "load_config",
    "optimal_gamma",
    "parse_config",
    "read_table",
    "simulate",
    "theory",
]
