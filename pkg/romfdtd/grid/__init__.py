"""Coarse Yee grid: materials, PML, leap-frog updates and sources."""

from .materials import MaterialMap, rasterize
from .yee_grid import (
    FieldState,
    GridSpec,
    YeeUpdate,
    cfl_limit,
    gaussian_pulse,
    pulse_width,
    step_coarse_e,
    step_coarse_h,
)

__all__ = [
    "FieldState",
    "GridSpec",
    "MaterialMap",
    "YeeUpdate",
    "cfl_limit",
    "gaussian_pulse",
    "pulse_width",
    "rasterize",
    "step_coarse_e",
    "step_coarse_h",
]
