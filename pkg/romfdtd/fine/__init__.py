"""Fine-region descriptor systems and passivity checks."""

from .fine_system import (
    DescriptorSystem,
    FineRegionSpec,
    PassivityReport,
    PortLayout,
    assemble_fine_system,
    check_passivity,
)

__all__ = [
    "DescriptorSystem",
    "FineRegionSpec",
    "PassivityReport",
    "PortLayout",
    "assemble_fine_system",
    "check_passivity",
]
