from .interface import (
    CoupledUpdate,
    InterfaceSpec,
    InterpolationMatrix,
    assemble_coupled,
    build_interface,
    build_interpolation,
    step_interface,
)

__all__ = [
    "CoupledUpdate",
    "InterfaceSpec",
    "InterpolationMatrix",
    "assemble_coupled",
    "build_interface",
    "build_interpolation",
    "step_interface",
]
