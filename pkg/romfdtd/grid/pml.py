"""
Split-field PML for the TEz coarse grid.

Hz is split into Hzx + Hzy inside the layer; only Hzx is stored (Hzy is
Hz - Hzx). Electric PML losses fold into the ordinary E coefficients: Ex
sees the y-profile, Ey the x-profile. Conductivity is graded polynomially
and the layer is backed by PEC.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from romfdtd.config import ETA0
from romfdtd.config.solver_config import PML_GRADING_ORDER, PML_REFLECTION


@dataclass(frozen=True)
class PmlLayer:
    cells: np.ndarray  # flat (C-order) Hz indices inside the layer
    da_x: np.ndarray
    db_x: np.ndarray
    da_y: np.ndarray
    db_y: np.ndarray
    sigma_ex: np.ndarray  # (nx, ny+1) electric PML conductivity on Ex edges
    sigma_ey: np.ndarray  # (nx+1, ny) on Ey edges

    @property
    def size(self) -> int:
        return int(self.cells.shape[0])


def peak_conductivity(thickness: float) -> float:
    """Grading maximum giving PML_REFLECTION at normal incidence."""
    m = PML_GRADING_ORDER
    return -(m + 1) * np.log(PML_REFLECTION) / (2.0 * ETA0 * thickness)


def graded_profile(
    positions: np.ndarray, length: float, low_depth: float, high_depth: float
) -> np.ndarray:
    """
    Conductivity at `positions` along one axis of extent `length`, with
    layers of `low_depth` and `high_depth` meters at the two ends.
    """
    sigma = np.zeros_like(positions, dtype=float)
    if low_depth > 0:
        rho = np.clip(low_depth - positions, 0.0, None)
        sigma += peak_conductivity(low_depth) * (rho / low_depth) ** PML_GRADING_ORDER
    if high_depth > 0:
        rho = np.clip(positions - (length - high_depth), 0.0, None)
        sigma += peak_conductivity(high_depth) * (rho / high_depth) ** PML_GRADING_ORDER
    return sigma


def build_pml(grid, materials, dt: float) -> Optional[PmlLayer]:
    """
    Precompute the split-field coefficients.

    Args:
        grid: GridSpec
        materials: MaterialMap of the coarse grid
        dt: time step in seconds

    Returns:
        PmlLayer, or None when every wall is PEC
    """
    depth = grid.pml_cells()
    if not any(depth.values()):
        return None

    lx, ly = grid.nx * grid.dx, grid.ny * grid.dy
    west, east = depth["west"] * grid.dx, depth["east"] * grid.dx
    south, north = depth["south"] * grid.dy, depth["north"] * grid.dy

    x_nodes = np.arange(grid.nx + 1) * grid.dx
    y_nodes = np.arange(grid.ny + 1) * grid.dy
    x_centers = (np.arange(grid.nx) + 0.5) * grid.dx
    y_centers = (np.arange(grid.ny) + 0.5) * grid.dy

    sx_nodes = graded_profile(x_nodes, lx, west, east)
    sy_nodes = graded_profile(y_nodes, ly, south, north)
    sx_cells = graded_profile(x_centers, lx, west, east)
    sy_cells = graded_profile(y_centers, ly, south, north)

    sigma_ex = np.broadcast_to(sy_nodes[None, :], (grid.nx, grid.ny + 1)).copy()
    sigma_ey = np.broadcast_to(sx_nodes[:, None], (grid.nx + 1, grid.ny)).copy()

    sx = np.broadcast_to(sx_cells[:, None], (grid.nx, grid.ny))
    sy = np.broadcast_to(sy_cells[None, :], (grid.nx, grid.ny))
    cells = np.flatnonzero((sx > 0) | (sy > 0))

    mu = materials.mu.ravel()[cells]
    eps = materials.eps.ravel()[cells]
    # matched magnetic conductivity
    sx_m = sx.ravel()[cells] * mu / eps
    sy_m = sy.ravel()[cells] * mu / eps

    def coefficients(sigma_m):
        loss = sigma_m * dt / (2.0 * mu)
        return (1.0 - loss) / (1.0 + loss), (dt / mu) / (1.0 + loss)

    da_x, db_x = coefficients(sx_m)
    da_y, db_y = coefficients(sy_m)
    return PmlLayer(
        cells=cells,
        da_x=da_x,
        db_x=db_x,
        da_y=da_y,
        db_y=db_y,
        sigma_ex=sigma_ex,
        sigma_ey=sigma_ey,
    )
