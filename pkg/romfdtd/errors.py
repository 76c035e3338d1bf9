"""
Domain exceptions.

Geometry, material and dimension problems subclass ValueError so callers
that only care about bad input can catch them generically.
"""
from typing import Optional


class RomFdtdError(Exception):
    """Base class for all solver errors."""


class GeometryError(RomFdtdError, ValueError):
    """Invalid grid, region or interface geometry."""


class MaterialError(RomFdtdError, ValueError):
    """Nonpositive permittivity/permeability or otherwise invalid material."""


class DimensionError(RomFdtdError, ValueError):
    """Matrix or vector sizes do not conform."""


class PassivityError(RomFdtdError):
    """A model fails its passivity conditions at the requested time step."""

    def __init__(self, message: str, report: object = None):
        super().__init__(message)
        self.report = report


class SingularSystemError(RomFdtdError):
    """A matrix that must be factorized is singular."""


class InstabilityError(RomFdtdError):
    """Non-finite field values were detected while marching."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class RecordIOError(RomFdtdError):
    """Reading or writing a result file failed."""


class ScenarioParseError(RomFdtdError):
    """
    Scenario document rejected.

    Codes:
        E_SYNTAX         malformed document (line/column set)
        E_UNKNOWN_KEY    key not part of the schema
        E_MISSING_FIELD  required field absent
        E_INVALID_VALUE  value has the wrong type or range
        E_INVARIANT      cross-field invariant violated
    """

    def __init__(
        self,
        code: str,
        message: str,
        line: Optional[int] = None,
        column: Optional[int] = None,
        location: Optional[str] = None,
    ):
        self.code = code
        self.line = line
        self.column = column
        self.location = location
        where = ""
        if line is not None:
            where = f" (line {line}, column {column})"
        elif location:
            where = f" (at {location})"
        super().__init__(f"{code}: {message}{where}")
