"""
Solver Configuration - Numerical constants and overridable settings.

This module defines the tolerances, grading parameters and run-time knobs
used throughout the solver. Constants are fixed; the subset that is
reasonable to tune per machine lives in SolverSettings and can be
overridden through ROMFDTD_* environment variables or a .env file.
"""
from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from scipy import constants


# ============ PHYSICAL CONSTANTS ============

EPS0 = constants.epsilon_0
MU0 = constants.mu_0
C0 = constants.c
ETA0 = (MU0 / EPS0) ** 0.5


# ============ PASSIVITY TOLERANCES ============
# Eigenvalues >= -EIG_REL_TOL * max|entry| count as nonnegative

EIG_REL_TOL = 1e-12
EXACT_TOL = 0.0  # B - L S is a structural identity
RESIDUAL_REL_TOL = 1e-13  # same identity after projection, relative to max|B|
CFL_BISECTION_RTOL = 1e-6
DENSE_EIG_LIMIT = 3000  # above this the fine-model CFL test goes through sparse SVD
BISECTION_LIMIT = 600  # larger systems use the closed-form 2 / s_max


# ============ MODEL ORDER REDUCTION ============

DEFLATION_TOL = 1e-10
REORTH_PASSES = 2


# ============ CFL EXTENSION ============

DEFAULT_EXTENSION_MARGIN = 1e-6
SPD_FLOOR = 1e-14


# ============ PML GRADING ============

PML_GRADING_ORDER = 3
PML_REFLECTION = 1e-8


# ============ SOURCES ============
# Spectral amplitude at the stated bandwidth relative to DC

PULSE_BANDWIDTH_LEVEL = 0.1
PULSE_DELAY_TAUS = 4.5


# ============ POST-PROCESSING ============

DFT_BAND_FACTOR = 1.2
DEFAULT_DFT_BINS = 2048


# ============ STABILITY INSTRUMENT ============

RADIUS_DENSE_LIMIT = 4000  # above this the spectral radius comes from ARPACK


# ============ CONDUCTORS ============

COPPER_CONDUCTIVITY = 5.8e7


class SolverSettings(BaseSettings):
    """
    Machine-dependent knobs, read from ROMFDTD_* environment variables.

    Example:
        ROMFDTD_DENSE_LIMIT=8000 python -m romfdtd run scenarios/cavity.json
    """

    model_config = SettingsConfigDict(
        env_prefix="ROMFDTD_",
        env_file=".env",
        extra="ignore",
    )

    # Coupled operators are materialized as dense matrices below this size
    dense_limit: int = Field(5000, gt=0)
    nan_check_interval: int = Field(1000, gt=0)
    dft_bins: int = Field(DEFAULT_DFT_BINS, gt=1)
    max_radius_states: int = Field(20000, gt=0)
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = "INFO"


_settings: SolverSettings | None = None


def get_settings() -> SolverSettings:
    """Return the process-wide settings, created on first use."""
    global _settings
    if _settings is None:
        _settings = SolverSettings()
    return _settings
