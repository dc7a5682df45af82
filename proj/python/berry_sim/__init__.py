"""Error-aware deep Q-learning under low-voltage SRAM bit errors."""

from ._core import (
    ConfigError,
    NumericalError,
    __version__,
    ber_at_voltage,
    bundled_voltage_grid,
    compare_reports,
    config_hash,
    energy_scale_at_voltage,
    missions_per_charge,
    normalize_config,
    quality_of_flight,
    summarize_fault_map,
    sweep,
    train,
)

__all__ = [
    "ConfigError",
    "NumericalError",
    "__version__",
    "ber_at_voltage",
    "bundled_voltage_grid",
    "compare_reports",
    "config_hash",
    "energy_scale_at_voltage",
    "missions_per_charge",
    "normalize_config",
    "quality_of_flight",
    "summarize_fault_map",
    "sweep",
    "train",
]
