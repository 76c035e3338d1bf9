"""
Coarse 2-D TEz Yee grid.

Array layout (index (i, j) = (x, y)):
    Ex: (nx, ny+1)  on x-directed edges, rows j = 0 and j = ny lie on walls
    Ey: (nx+1, ny)  on y-directed edges, columns i = 0 and i = nx lie on walls
    Hz: (nx, ny)    at cell centers

Tangential E on the outer boundary is always zero: walls are PEC, and PML
layers are backed by PEC.
"""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from romfdtd.config import C0
from romfdtd.config.solver_config import PULSE_BANDWIDTH_LEVEL, PULSE_DELAY_TAUS
from romfdtd.errors import GeometryError
from romfdtd.grid.materials import MaterialMap
from romfdtd.grid.pml import PmlLayer, build_pml

WALLS = ("south", "north", "west", "east")


# ============ GRID ============

@dataclass(frozen=True)
class GridSpec:
    """Uniform coarse grid with one boundary kind per wall."""

    nx: int
    ny: int
    dx: float
    dy: float
    south: str = "pec"
    north: str = "pec"
    west: str = "pec"
    east: str = "pec"
    pml_depth: int = 0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise GeometryError(f"grid needs at least one cell, got {self.nx}x{self.ny}")
        if not (self.dx > 0 and self.dy > 0):
            raise GeometryError("cell sizes must be positive")
        for wall in WALLS:
            if getattr(self, wall) not in ("pec", "pml"):
                raise GeometryError(f"unknown boundary kind on {wall} wall")
        if self.pml_depth < 0 or self.pml_depth >= min(self.nx, self.ny) / 2:
            raise GeometryError("pml_depth must be in [0, min(nx, ny)/2)")

    @classmethod
    def from_section(cls, section) -> "GridSpec":
        return cls(
            nx=section.nx,
            ny=section.ny,
            dx=section.dx,
            dy=section.dy,
            pml_depth=section.pml_depth,
            **section.boundaries.model_dump(),
        )

    def pml_cells(self) -> dict[str, int]:
        return {w: self.pml_depth if getattr(self, w) == "pml" else 0 for w in WALLS}

    @property
    def ex_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny + 1)

    @property
    def ey_shape(self) -> tuple[int, int]:
        return (self.nx + 1, self.ny)

    @property
    def hz_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)


# ============ FIELD STATE ============

@dataclass
class FieldState:
    """E at level n, Hz at n-1/2, Hzx split component on PML cells."""

    ex: np.ndarray
    ey: np.ndarray
    hz: np.ndarray
    hzx: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n: int = 0

    @classmethod
    def zeros(cls, grid: GridSpec, pml_size: int = 0) -> "FieldState":
        return cls(
            ex=np.zeros(grid.ex_shape),
            ey=np.zeros(grid.ey_shape),
            hz=np.zeros(grid.hz_shape),
            hzx=np.zeros(pml_size),
        )

    def copy(self) -> "FieldState":
        return FieldState(
            ex=self.ex.copy(), ey=self.ey.copy(), hz=self.hz.copy(), hzx=self.hzx.copy(), n=self.n
        )

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.ex).all() and np.isfinite(self.ey).all() and np.isfinite(self.hz).all()
        )

    def energy(self, materials: MaterialMap, dx: float, dy: float) -> float:
        """Energy proxy sum(eps |E|^2 + mu |Hz|^2) weighted by cell area."""
        total = (
            np.sum(materials.eps_x * self.ex**2)
            + np.sum(materials.eps_y * self.ey**2)
            + np.sum(materials.mu * self.hz**2)
        )
        return float(total * dx * dy)


# ============ UPDATE COEFFICIENTS ============

def interior_masks(grid: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Active-sample masks of a grid without fine regions."""
    ex_active = np.ones(grid.ex_shape, dtype=bool)
    ex_active[:, 0] = ex_active[:, -1] = False
    ey_active = np.ones(grid.ey_shape, dtype=bool)
    ey_active[0, :] = ey_active[-1, :] = False
    hz_active = np.ones(grid.hz_shape, dtype=bool)
    return ex_active, ey_active, hz_active


@dataclass(frozen=True)
class YeeUpdate:
    """
    Precomputed coefficients of the coarse leap-frog update at a fixed dt.

    Inactive E samples keep their value (ca=1, cb=0): they belong to fine
    regions or are written by the interface update. Wall samples are forced
    to zero.
    """

    grid: GridSpec
    dt: float
    ca_x: np.ndarray
    cb_x: np.ndarray
    ca_y: np.ndarray
    cb_y: np.ndarray
    chz: np.ndarray
    pml: Optional[PmlLayer]
    ex_active: np.ndarray
    ey_active: np.ndarray
    hz_active: np.ndarray

    @classmethod
    def build(
        cls,
        grid: GridSpec,
        materials: MaterialMap,
        dt: float,
        ex_active: Optional[np.ndarray] = None,
        ey_active: Optional[np.ndarray] = None,
        hz_active: Optional[np.ndarray] = None,
    ) -> "YeeUpdate":
        if dt <= 0:
            raise ValueError("dt must be positive")
        if materials.shape != grid.hz_shape:
            raise GeometryError("material map does not match the grid")
        defaults = interior_masks(grid)
        ex_active = defaults[0] if ex_active is None else ex_active & defaults[0]
        ey_active = defaults[1] if ey_active is None else ey_active & defaults[1]
        hz_active = defaults[2] if hz_active is None else hz_active

        pml = build_pml(grid, materials, dt)
        sigma_x = materials.sigma_x + (pml.sigma_ex if pml else 0.0)
        sigma_y = materials.sigma_y + (pml.sigma_ey if pml else 0.0)

        ca_x, cb_x = _e_coefficients(materials.eps_x, sigma_x, dt, ex_active)
        ca_y, cb_y = _e_coefficients(materials.eps_y, sigma_y, dt, ey_active)
        ca_x[:, [0, -1]] = 0.0
        ca_y[[0, -1], :] = 0.0

        chz = np.where(hz_active, dt / materials.mu, 0.0)
        if pml is not None:
            np.put(chz, pml.cells, 0.0)

        return cls(
            grid=grid,
            dt=dt,
            ca_x=ca_x,
            cb_x=cb_x,
            ca_y=ca_y,
            cb_y=cb_y,
            chz=chz,
            pml=pml,
            ex_active=ex_active,
            ey_active=ey_active,
            hz_active=hz_active,
        )

    def new_state(self) -> FieldState:
        return FieldState.zeros(self.grid, self.pml.size if self.pml else 0)

    def with_dt(self, dt: float, materials: MaterialMap) -> "YeeUpdate":
        return YeeUpdate.build(
            self.grid, materials, dt, self.ex_active, self.ey_active, self.hz_active
        )


def _e_coefficients(eps, sigma, dt, active):
    denom = eps / dt + sigma / 2.0
    ca = np.where(active, (eps / dt - sigma / 2.0) / denom, 1.0)
    cb = np.where(active, 1.0 / denom, 0.0)
    return ca, cb


# ============ OPERATIONS ============

def cfl_limit(dx: float, dy: float, materials: Optional[MaterialMap] = None) -> float:
    """
    Classical 2-D Yee stability limit 1 / (c_max sqrt(1/dx^2 + 1/dy^2)).

    Args:
        dx, dy: cell sizes in meters
        materials: map whose fastest wave speed is used (vacuum when None)

    Raises:
        GeometryError: if dx or dy is not positive
    """
    if not (dx > 0 and dy > 0):
        raise GeometryError(f"cell sizes must be positive, got dx={dx}, dy={dy}")
    c_max = materials.max_wave_speed() if materials is not None else C0
    return 1.0 / (c_max * np.sqrt(1.0 / dx**2 + 1.0 / dy**2))


def step_coarse_h(state: FieldState, update: YeeUpdate) -> FieldState:
    """Advance Hz from n-1/2 to n+1/2 in place (split field inside the PML)."""
    grid = update.grid
    curl_y = (state.ex[:, 1:] - state.ex[:, :-1]) / grid.dy
    curl_x = (state.ey[1:, :] - state.ey[:-1, :]) / grid.dx

    pml = update.pml
    if pml is not None:
        cx = curl_x.ravel()[pml.cells]
        cy = curl_y.ravel()[pml.cells]
        hzy = state.hz.ravel()[pml.cells] - state.hzx
        hzx_new = pml.da_x * state.hzx - pml.db_x * cx
        hzy_new = pml.da_y * hzy + pml.db_y * cy

    state.hz += update.chz * (curl_y - curl_x)

    if pml is not None:
        np.put(state.hz, pml.cells, hzx_new + hzy_new)
        state.hzx[:] = hzx_new
    return state


def step_coarse_e(
    state: FieldState,
    update: YeeUpdate,
    jx: Optional[np.ndarray] = None,
    jy: Optional[np.ndarray] = None,
) -> FieldState:
    """
    Advance active Ex, Ey from n to n+1 in place and increment the time index.

    Args:
        state: fields with Hz at n+1/2
        update: coefficients
        jx, jy: optional impressed current densities (A/m^2) at n+1/2,
            shaped like Ex and Ey
    """
    grid = update.grid
    dhz_y = np.zeros(grid.ex_shape)
    dhz_y[:, 1:-1] = (state.hz[:, 1:] - state.hz[:, :-1]) / grid.dy
    dhz_x = np.zeros(grid.ey_shape)
    dhz_x[1:-1, :] = (state.hz[1:, :] - state.hz[:-1, :]) / grid.dx

    if jx is not None:
        dhz_y -= jx
    if jy is not None:
        dhz_x += jy

    state.ex *= update.ca_x
    state.ex += update.cb_x * dhz_y
    state.ey *= update.ca_y
    state.ey -= update.cb_y * dhz_x
    state.n += 1
    return state


# ============ SOURCES ============

def pulse_width(bandwidth: float) -> float:
    """Gaussian tau whose spectrum at `bandwidth` is PULSE_BANDWIDTH_LEVEL of DC."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    return np.sqrt(-np.log(PULSE_BANDWIDTH_LEVEL) / 2.0) / (np.pi * bandwidth)


def gaussian_pulse(t, bandwidth: float, delay: Optional[float] = None):
    """
    exp(-(t - delay)^2 / (2 tau^2)), peak 1 at t = delay.

    Args:
        t: time(s) in seconds, scalar or array
        bandwidth: frequency (Hz) at which the spectrum falls to 10% of DC
        delay: pulse center; PULSE_DELAY_TAUS * tau when None
    """
    tau = pulse_width(bandwidth)
    if delay is None:
        delay = PULSE_DELAY_TAUS * tau
    return np.exp(-((np.asarray(t) - delay) ** 2) / (2.0 * tau**2))


def refine_grid(grid: GridSpec, r: int) -> GridSpec:
    """Same domain meshed r times finer (PML depth scaled to keep its thickness)."""
    return replace(
        grid, nx=grid.nx * r, ny=grid.ny * r, dx=grid.dx / r, dy=grid.dy / r,
        pml_depth=grid.pml_depth * r,
    )
