"""
Material maps on a Yee grid.

Cell values (eps, sigma, mu) are the primary description. Edge values are
the arithmetic mean of the two cells sharing the edge; an edge on the grid
boundary takes the value of its single cell. The same rule serves the
coarse grid and every fine region.
"""
from dataclasses import dataclass

import numpy as np

from romfdtd.config import EPS0, MU0
from romfdtd.errors import MaterialError
from romfdtd.models.scenario import DiskShape, MaterialsSection, resolve_material


@dataclass(frozen=True)
class MaterialMap:
    """Per-cell materials and the derived per-edge averages."""

    eps: np.ndarray  # (nx, ny) cell permittivity, F/m
    sigma: np.ndarray  # (nx, ny) cell conductivity, S/m
    mu: np.ndarray  # (nx, ny) cell permeability, H/m
    eps_x: np.ndarray  # (nx, ny+1)
    sigma_x: np.ndarray
    eps_y: np.ndarray  # (nx+1, ny)
    sigma_y: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.eps.shape

    @classmethod
    def from_cells(
        cls,
        eps: np.ndarray,
        sigma: np.ndarray,
        mu: np.ndarray,
        *,
        allow_gain: bool = False,
    ) -> "MaterialMap":
        """
        Build a map from cell arrays.

        Args:
            eps, sigma, mu: (nx, ny) arrays
            allow_gain: accept negative conductivity (only useful for
                passivity diagnostics)

        Raises:
            MaterialError: on nonpositive eps/mu, negative sigma or shape mismatch
        """
        eps = np.array(eps, dtype=float)
        sigma = np.array(sigma, dtype=float)
        mu = np.array(mu, dtype=float)
        if eps.ndim != 2 or eps.shape != sigma.shape or eps.shape != mu.shape:
            raise MaterialError("eps, sigma and mu must be 2-D arrays of equal shape")
        if not np.all(eps > 0) or not np.all(mu > 0):
            raise MaterialError("permittivity and permeability must be positive")
        if not allow_gain and np.any(sigma < 0):
            raise MaterialError("conductivity must be nonnegative")
        for array in (eps, sigma, mu):
            array.setflags(write=False)
        return cls(
            eps=eps,
            sigma=sigma,
            mu=mu,
            eps_x=_edge_mean(eps, axis=1),
            sigma_x=_edge_mean(sigma, axis=1),
            eps_y=_edge_mean(eps, axis=0),
            sigma_y=_edge_mean(sigma, axis=0),
        )

    @classmethod
    def uniform(
        cls, nx: int, ny: int, eps_r: float = 1.0, sigma: float = 0.0, mu_r: float = 1.0
    ) -> "MaterialMap":
        shape = (nx, ny)
        return cls.from_cells(
            np.full(shape, eps_r * EPS0), np.full(shape, float(sigma)), np.full(shape, mu_r * MU0)
        )

    def max_wave_speed(self) -> float:
        return float(np.max(1.0 / np.sqrt(self.eps * self.mu)))

    def scaled_conductivity(self, factor: float) -> "MaterialMap":
        return MaterialMap.from_cells(self.eps, self.sigma * factor, self.mu, allow_gain=True)


def _edge_mean(cells: np.ndarray, axis: int) -> np.ndarray:
    nx, ny = cells.shape
    if axis == 1:
        edges = np.empty((nx, ny + 1))
        edges[:, 1:-1] = 0.5 * (cells[:, :-1] + cells[:, 1:])
        edges[:, 0] = cells[:, 0]
        edges[:, -1] = cells[:, -1]
    else:
        edges = np.empty((nx + 1, ny))
        edges[1:-1, :] = 0.5 * (cells[:-1, :] + cells[1:, :])
        edges[0, :] = cells[0, :]
        edges[-1, :] = cells[-1, :]
    edges.setflags(write=False)
    return edges


def rasterize(
    section: MaterialsSection,
    nx: int,
    ny: int,
    dx: float,
    dy: float,
    origin: tuple[float, float] = (0.0, 0.0),
) -> MaterialMap:
    """
    Sample a geometric scene at cell centers.

    Args:
        section: background and shapes
        nx, ny: cells to sample
        dx, dy: cell size in meters
        origin: physical position of the lower-left corner of cell (0, 0)

    Returns:
        MaterialMap of the sampled cells
    """
    xc = origin[0] + (np.arange(nx) + 0.5) * dx
    yc = origin[1] + (np.arange(ny) + 0.5) * dy
    x, y = np.meshgrid(xc, yc, indexing="ij")

    background = resolve_material(section.background)
    eps = np.full((nx, ny), background.eps_r * EPS0)
    sigma = np.full((nx, ny), background.sigma)
    mu = np.full((nx, ny), background.mu_r * MU0)

    for shape in section.shapes:
        if isinstance(shape, DiskShape):
            mask = (x - shape.cx) ** 2 + (y - shape.cy) ** 2 <= shape.radius**2
        else:
            mask = (x >= shape.x0) & (x <= shape.x1) & (y >= shape.y0) & (y <= shape.y1)
        material = resolve_material(shape.material)
        eps[mask] = material.eps_r * EPS0
        sigma[mask] = material.sigma
        mu[mask] = material.mu_r * MU0

    return MaterialMap.from_cells(eps, sigma, mu)
