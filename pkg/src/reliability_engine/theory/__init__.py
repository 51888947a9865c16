"""Analytische Validatoren: Kombinierer-Crossover und Verfeinerungsschwelle."""

from .crossover import critical_csi_variance, monte_carlo_crossover, snr_egc, snr_mrc
from .refinement import classify_fixed_point, fixed_point, iterate_quality_map, map_derivative

__all__ = [
    "classify_fixed_point",
    "critical_csi_variance",
    "fixed_point",
    "iterate_quality_map",
    "map_derivative",
    "monte_carlo_crossover",
    "snr_egc",
    "snr_mrc",
]
