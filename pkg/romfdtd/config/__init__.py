"""
Configuration package for the reduced-order FDTD solver.

Numerical constants and environment-overridable settings used across modules.
"""

from .solver_config import (
    C0,
    EPS0,
    ETA0,
    MU0,
    SolverSettings,
    get_settings,
)

__all__ = [
    "C0",
    "EPS0",
    "ETA0",
    "MU0",
    "SolverSettings",
    "get_settings",
]
