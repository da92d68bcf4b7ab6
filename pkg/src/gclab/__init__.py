"""Numerical toolkit for the Gauss-Codazzi system of negatively curved surfaces.

Modules: geometry (metric profiles), gauss_codazzi (balance-law structure),
entropy (entropy pair and relative quantities), solver (viscous finite-volume
runs), stability (relative-entropy estimates), reconstruction (surfaces from
fundamental forms) and cli (scenario runner).
"""

from .errors import GCLabError
from .gauss_codazzi import InvariantBox, StateField
from .geometry import MetricProfile, frozen_metric, helicoid_metric, hong_metric, tabulated_metric
from .solver import SolverConfig, Trajectory, initial_field, solve

__version__ = "0.1.0"

__all__ = [
    "GCLabError",
    "InvariantBox",
    "MetricProfile",
    "SolverConfig",
    "StateField",
    "Trajectory",
    "frozen_metric",
    "helicoid_metric",
    "hong_metric",
    "initial_field",
    "solve",
    "tabulated_metric",
]
