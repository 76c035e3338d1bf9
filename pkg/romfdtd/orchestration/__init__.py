"""Run orchestration and spectral post-processing."""

from .postprocess import cavity_resonances, frequency_response, reflection_spectrum, spectral_peaks
from .simulator import (
    Simulation,
    amplification_spectral_radius,
    build_simulation,
    derive_all_fine,
    derive_coarse_only,
    run,
)

__all__ = [
    "Simulation",
    "amplification_spectral_radius",
    "build_simulation",
    "cavity_resonances",
    "derive_all_fine",
    "derive_coarse_only",
    "frequency_response",
    "reflection_spectrum",
    "run",
    "spectral_peaks",
]
