"""Scenario input models and run output records."""

from .records import RunRecord, Spectrum
from .scenario import (
    GridSection,
    HzPointSource,
    JyLineSource,
    MaterialSpec,
    MaterialsSection,
    ProbeSpec,
    RegionSpec,
    RunSection,
    Scenario,
)

__all__ = [
    "GridSection",
    "HzPointSource",
    "JyLineSource",
    "MaterialSpec",
    "MaterialsSection",
    "ProbeSpec",
    "RegionSpec",
    "RunRecord",
    "RunSection",
    "Scenario",
    "Spectrum",
]
