"""
Fine Region Descriptor System

A refined rectangle of the coarse grid is written as the implicit recursion

    (R + F) x[n+1] = (R - F) x[n] + B u[n+1/2],    y[n] = L^T x[n]

with state x = [Ex; Ey; Hz], hanging boundary H as input u and the
co-located boundary E as output y. R and F are kept in block form
{R11, R22, F11, K} so the time step can be changed without reassembly.

Ordering: Ex (j outer, i inner), then Ey, then Hz. Ports: south, north,
west, east, each left-to-right or bottom-to-top.
"""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, svds

from romfdtd.config.solver_config import (
    BISECTION_LIMIT,
    CFL_BISECTION_RTOL,
    DENSE_EIG_LIMIT,
    EIG_REL_TOL,
    EXACT_TOL,
    RESIDUAL_REL_TOL,
    SPD_FLOOR,
)
from romfdtd.errors import DimensionError, GeometryError, PassivityError
from romfdtd.grid.materials import MaterialMap
from romfdtd.monitoring import get_logger
from romfdtd.monitoring.metrics import PASSIVITY_CHECKS

logger = get_logger(__name__)

SIDES = ("south", "north", "west", "east")


# ============ REGION ============

@dataclass(frozen=True)
class FineRegionSpec:
    """
    Rectangle of coarse cells [i0, i0+width) x [j0, j0+height) meshed with
    refinement factor r. `materials` is the fine map (r*width x r*height
    cells). Sides in `pec_sides` are backed by a PEC wall and carry no ports.
    """

    i0: int
    j0: int
    width: int
    height: int
    r: int
    dx: float
    dy: float
    materials: MaterialMap
    pec_sides: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise GeometryError("region must span at least one coarse cell")
        if int(self.r) != self.r or self.r < 1:
            raise GeometryError(f"refinement factor must be a positive integer, got {self.r}")
        if not (self.dx > 0 and self.dy > 0):
            raise GeometryError("cell sizes must be positive")
        if self.materials.shape != (self.nx, self.ny):
            raise GeometryError(
                f"fine material map {self.materials.shape} does not match {(self.nx, self.ny)}"
            )
        unknown = set(self.pec_sides) - set(SIDES)
        if unknown:
            raise GeometryError(f"unknown sides {sorted(unknown)}")

    @property
    def nx(self) -> int:
        return self.r * self.width

    @property
    def ny(self) -> int:
        return self.r * self.height

    @property
    def hx(self) -> float:
        return self.dx / self.r

    @property
    def hy(self) -> float:
        return self.dy / self.r

    @property
    def coupled_sides(self) -> tuple[str, ...]:
        return tuple(side for side in SIDES if side not in self.pec_sides)


@dataclass(frozen=True)
class PortLayout:
    """
    Port k pairs hanging input H k with output E k. `output_index` is the
    state index of the output sample; positions are relative to the
    region's lower-left corner, in meters.
    """

    sides: tuple[str, ...]
    counts: tuple[int, ...]
    output_index: np.ndarray
    input_positions: np.ndarray
    output_positions: np.ndarray

    @property
    def size(self) -> int:
        return int(sum(self.counts))

    def side_slice(self, side: str) -> slice:
        start = 0
        for name, count in zip(self.sides, self.counts):
            if name == side:
                return slice(start, start + count)
            start += count
        raise KeyError(side)


# ============ DESCRIPTOR SYSTEM ============

@dataclass(frozen=True)
class DescriptorSystem:
    r11: sp.csr_matrix
    r22: sp.csr_matrix
    f11: sp.csr_matrix
    k: sp.csr_matrix
    b: sp.csr_matrix
    l: sp.csr_matrix
    s: sp.csr_matrix
    dt: float
    ports: PortLayout

    @property
    def n_e(self) -> int:
        return self.r11.shape[0]

    @property
    def n_h(self) -> int:
        return self.r22.shape[0]

    @property
    def n_p(self) -> int:
        return self.b.shape[1]

    @property
    def order(self) -> int:
        return self.n_e + self.n_h

    def pencil(self, dt: Optional[float] = None):
        """(R, F) at dt (the stored step when None)."""
        return block_pencil(self.r11, self.r22, self.f11, self.k, dt or self.dt)

    def with_dt(self, dt: float) -> "DescriptorSystem":
        return replace(self, dt=dt)


def block_pencil(r11, r22, f11, k, dt: float):
    """
    R = [[R11/dt, -K/2], [-K^T/2, R22/dt]],  F = [[F11, -K/2], [K^T/2, 0]].

    Sparse blocks give sparse CSR results, dense blocks give arrays.
    """
    if sp.issparse(r11):
        r = sp.bmat([[r11 / dt, -0.5 * k], [-0.5 * k.T, r22 / dt]], format="csr")
        f = sp.bmat([[f11, -0.5 * k], [0.5 * k.T, None]], format="csr")
        return r, f
    n_h = r22.shape[0]
    r = np.block([[r11 / dt, -0.5 * k], [-0.5 * k.T, r22 / dt]])
    f = np.block([[f11, -0.5 * k], [0.5 * k.T, np.zeros((n_h, n_h))]])
    return r, f


def assemble_fine_system(region: FineRegionSpec, dt: float) -> DescriptorSystem:
    """
    Assemble the descriptor system of a fine region.

    Boundary E rows use half secondary edges (hy/2 on south/north rows, hx/2
    on west/east columns). Tangential E on PEC-backed sides is eliminated
    from the state together with that side's ports.

    Args:
        region: fine region with its material map
        dt: time step in seconds

    Returns:
        DescriptorSystem

    Raises:
        ValueError: if dt is not positive
    """
    if dt <= 0:
        raise ValueError("dt must be positive")

    nx, ny, hx, hy = region.nx, region.ny, region.hx, region.hy
    mats = region.materials
    n_ex = nx * (ny + 1)
    n_ey = (nx + 1) * ny
    n_h = nx * ny

    ly = np.full(ny + 1, hy)
    ly[[0, -1]] = hy / 2.0
    lx = np.full(nx + 1, hx)
    lx[[0, -1]] = hx / 2.0

    # (i, j) arrays flattened with j outer
    ex_area = hx * ly[None, :] * np.ones((nx, 1))
    ey_area = hy * lx[:, None] * np.ones((1, ny))
    r11_diag = np.concatenate([(ex_area * mats.eps_x).T.ravel(), (ey_area * mats.eps_y).T.ravel()])
    f11_diag = 0.5 * np.concatenate(
        [(ex_area * mats.sigma_x).T.ravel(), (ey_area * mats.sigma_y).T.ravel()]
    )
    r22_diag = (hx * hy * mats.mu).T.ravel()

    k_full = _curl_matrix(nx, ny, hx, hy)

    # ports: (state index, scale, input position, side)
    ii = np.arange(nx)
    jj = np.arange(ny)
    port_sides = {
        "south": (ii, -hx, np.column_stack([(ii + 0.5) * hx, np.zeros(nx)])),
        "north": (ny * nx + ii, hx, np.column_stack([(ii + 0.5) * hx, np.full(nx, ny * hy)])),
        "west": (n_ex + jj * (nx + 1), hy, np.column_stack([np.zeros(ny), (jj + 0.5) * hy])),
        "east": (
            n_ex + jj * (nx + 1) + nx,
            -hy,
            np.column_stack([np.full(ny, nx * hx), (jj + 0.5) * hy]),
        ),
    }

    keep = np.ones(n_ex + n_ey, dtype=bool)
    for side in region.pec_sides:
        keep[port_sides[side][0]] = False
    new_index = np.cumsum(keep) - 1

    sides = region.coupled_sides
    out_full = np.concatenate([port_sides[s][0] for s in sides]) if sides else np.zeros(0, int)
    scales = np.concatenate([np.full(len(port_sides[s][0]), port_sides[s][1]) for s in sides]) \
        if sides else np.zeros(0)
    in_pos = np.vstack([port_sides[s][2] for s in sides]) if sides else np.zeros((0, 2))
    out_pos = _e_positions(out_full, nx, ny, hx, hy)

    n_e = int(keep.sum())
    n_p = out_full.shape[0]
    rows = new_index[out_full]
    cols = np.arange(n_p)
    l_mat = sp.csr_matrix((np.ones(n_p), (rows, cols)), shape=(n_e + n_h, n_p))
    b_mat = sp.csr_matrix((scales, (rows, cols)), shape=(n_e + n_h, n_p))
    s_mat = sp.diags(scales, format="csr") if n_p else sp.csr_matrix((0, 0))

    ports = PortLayout(
        sides=sides,
        counts=tuple(len(port_sides[s][0]) for s in sides),
        output_index=rows,
        input_positions=in_pos,
        output_positions=out_pos,
    )
    system = DescriptorSystem(
        r11=sp.diags(r11_diag[keep], format="csr"),
        r22=sp.diags(r22_diag, format="csr"),
        f11=sp.diags(f11_diag[keep], format="csr"),
        k=k_full[np.flatnonzero(keep)].tocsr(),
        b=b_mat,
        l=l_mat,
        s=s_mat,
        dt=dt,
        ports=ports,
    )
    logger.debug(
        "Fine system assembled",
        nx=nx,
        ny=ny,
        n_e=system.n_e,
        n_h=system.n_h,
        n_p=system.n_p,
        pec_sides=sorted(region.pec_sides),
    )
    return system


def _curl_matrix(nx: int, ny: int, hx: float, hy: float) -> sp.csr_matrix:
    """K: E rows, Hz columns, entries +-edge length."""
    n_ex = nx * (ny + 1)
    n_ey = (nx + 1) * ny

    def hz(i, j):
        return j * nx + i

    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    i, j = i.ravel(), j.ravel()
    # Ex(i, j) sees +hx Hz(i, j) and Ex(i, j+1) sees -hx Hz(i, j)
    rows = [j * nx + i, (j + 1) * nx + i]
    vals = [np.full(i.size, hx), np.full(i.size, -hx)]
    cols = [hz(i, j), hz(i, j)]
    # Ey(i, j) sees -hy Hz(i, j) and Ey(i+1, j) sees +hy Hz(i, j)
    rows += [n_ex + j * (nx + 1) + i, n_ex + j * (nx + 1) + i + 1]
    vals += [np.full(i.size, -hy), np.full(i.size, hy)]
    cols += [hz(i, j), hz(i, j)]
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_ex + n_ey, nx * ny),
    )


def _e_positions(index: np.ndarray, nx: int, ny: int, hx: float, hy: float) -> np.ndarray:
    """Physical midpoints of E samples given their full state indices."""
    n_ex = nx * (ny + 1)
    pos = np.zeros((index.shape[0], 2))
    is_ex = index < n_ex
    ex = index[is_ex]
    pos[is_ex, 0] = (ex % nx + 0.5) * hx
    pos[is_ex, 1] = (ex // nx) * hy
    ey = index[~is_ex] - n_ex
    pos[~is_ex, 0] = (ey % (nx + 1)) * hx
    pos[~is_ex, 1] = (ey // (nx + 1) + 0.5) * hy
    return pos


# ============ GENERALIZED SINGULAR VALUES ============

def spd_sqrt_pair(block) -> tuple[np.ndarray, np.ndarray]:
    """
    (block^(1/2), block^(-1/2)) of a symmetric positive definite block
    via its eigendecomposition.

    Raises:
        PassivityError: if an eigenvalue is below SPD_FLOOR * largest
    """
    dense = block.toarray() if sp.issparse(block) else np.asarray(block)
    w, q = la.eigh(dense)
    if w.size and (w[-1] <= 0 or w[0] <= SPD_FLOOR * w[-1]):
        raise PassivityError("block is not symmetric positive definite")
    root = np.sqrt(w)
    return (q * root) @ q.T, (q / root) @ q.T


def _is_diagonal(block) -> bool:
    if not sp.issparse(block):
        return False
    off = sp.csr_matrix(block - sp.diags(block.diagonal()))
    off.eliminate_zeros()
    return off.nnz == 0


def scaled_coupling(r11, r22, k):
    """R11^(-1/2) K R22^(-1/2) (sparse when both blocks are diagonal)."""
    if _is_diagonal(r11) and _is_diagonal(r22):
        d1, d2 = r11.diagonal(), r22.diagonal()
        for d in (d1, d2):
            if d.size and (d.max() <= 0 or d.min() <= SPD_FLOOR * d.max()):
                raise PassivityError("block is not symmetric positive definite")
        return sp.diags(1.0 / np.sqrt(d1)) @ sp.csr_matrix(k) @ sp.diags(1.0 / np.sqrt(d2))
    _, inv1 = spd_sqrt_pair(r11)
    _, inv2 = spd_sqrt_pair(r22)
    k_dense = k.toarray() if sp.issparse(k) else k
    return inv1 @ k_dense @ inv2


def coupling_singular_values(r11, r22, k, largest_only: bool = False) -> np.ndarray:
    """Descending singular values of R11^(-1/2) K R22^(-1/2), in 1/s."""
    c = scaled_coupling(r11, r22, k)
    if min(c.shape) == 0:
        return np.zeros(0)
    if sp.issparse(c):
        if c.nnz == 0:
            return np.zeros(1 if largest_only else min(c.shape))
        if largest_only and min(c.shape) > DENSE_EIG_LIMIT:
            return svds(c, k=1, return_singular_vectors=False)
        c = c.toarray()
    values = la.svdvals(c)
    return values[:1] if largest_only else values


# ============ PASSIVITY ============

@dataclass(frozen=True)
class PassivityReport:
    """
    Outcome of the three passivity conditions at a time step:
    R symmetric positive definite, F + F^T positive semidefinite, B = L S.
    """

    dt: float
    r_symmetric: bool
    r_min_eig: float
    f_min_eig: float
    f_tolerance: float
    bls_residual: float
    bls_tolerance: float
    max_stable_dt: float

    @property
    def r_ok(self) -> bool:
        return self.r_symmetric and self.r_min_eig > 0

    @property
    def f_ok(self) -> bool:
        return self.f_min_eig >= -self.f_tolerance

    @property
    def b_ok(self) -> bool:
        return self.bls_residual <= self.bls_tolerance

    @property
    def passed(self) -> bool:
        return self.r_ok and self.f_ok and self.b_ok

    def as_dict(self) -> dict:
        return {
            "dt": self.dt,
            "r_positive": self.r_ok,
            "r_min_eig": self.r_min_eig,
            "f_semidefinite": self.f_ok,
            "f_min_eig": self.f_min_eig,
            "bls_residual": self.bls_residual,
            "max_stable_dt": self.max_stable_dt,
            "passed": self.passed,
        }


def _min_eigenvalue(sym) -> float:
    n = sym.shape[0]
    if n == 0:
        return np.inf
    if _is_diagonal(sym):
        return float(sym.diagonal().min())
    if n <= DENSE_EIG_LIMIT:
        dense = sym.toarray() if sp.issparse(sym) else sym
        return float(la.eigvalsh(dense, subset_by_index=[0, 0])[0])
    return float(eigsh(sp.csr_matrix(sym), k=1, which="SA", return_eigenvectors=False)[0])


def _is_symmetric(m) -> bool:
    if sp.issparse(m):
        diff = sp.csr_matrix(m - m.T)
        diff.eliminate_zeros()
        return diff.nnz == 0
    return bool(np.array_equal(m, m.T))


def _max_abs(m) -> float:
    if sp.issparse(m):
        return float(abs(m).max()) if m.nnz else 0.0
    return float(np.max(np.abs(m))) if m.size else 0.0


def r_positive(system, dt: float) -> bool:
    r, _ = block_pencil(system.r11, system.r22, system.f11, system.k, dt)
    return _min_eigenvalue(r) > 0


def max_stable_dt(system, rtol: float = CFL_BISECTION_RTOL) -> float:
    """
    Largest dt keeping R positive definite.

    Bisection on the sign of the smallest eigenvalue of R for systems up to
    BISECTION_LIMIT states; larger systems use 2 / s_max directly.
    """
    s_max = coupling_singular_values(system.r11, system.r22, system.k, largest_only=True)
    if s_max.size == 0 or s_max[0] == 0:
        return np.inf
    if system.r11.shape[0] + system.r22.shape[0] > BISECTION_LIMIT:
        return float(2.0 / s_max[0])

    guess = 2.0 / s_max[0]
    lo, hi = 0.5 * guess, 2.0 * guess
    while not r_positive(system, lo):
        lo *= 0.5
    while r_positive(system, hi):
        hi *= 2.0
    while hi - lo > rtol * lo:
        mid = 0.5 * (lo + hi)
        if r_positive(system, mid):
            lo = mid
        else:
            hi = mid
    return float(lo)


def check_passivity(system, dt: Optional[float] = None) -> PassivityReport:
    """
    Evaluate the passivity conditions of a full or reduced system.

    Args:
        system: DescriptorSystem or ReducedSystem
        dt: time step to test (system.dt when None)

    Returns:
        PassivityReport

    Raises:
        DimensionError: if the blocks do not conform
    """
    dt = dt or system.dt
    n_e, n_h = system.r11.shape[0], system.r22.shape[0]
    n_p = system.b.shape[1]
    if (
        system.k.shape != (n_e, n_h)
        or system.f11.shape != (n_e, n_e)
        or system.b.shape != (n_e + n_h, n_p)
        or system.l.shape != (n_e + n_h, n_p)
        or system.s.shape != (n_p, n_p)
    ):
        raise DimensionError("system blocks do not conform")

    r, f = block_pencil(system.r11, system.r22, system.f11, system.k, dt)
    f_sym = f + f.T
    residual = system.b - system.l @ system.s
    bls_tol = EXACT_TOL if sp.issparse(system.b) else RESIDUAL_REL_TOL * _max_abs(system.b)

    report = PassivityReport(
        dt=dt,
        r_symmetric=_is_symmetric(r),
        r_min_eig=_min_eigenvalue(r),
        f_min_eig=_min_eigenvalue(f_sym),
        f_tolerance=EIG_REL_TOL * _max_abs(f_sym),
        bls_residual=_max_abs(residual),
        bls_tolerance=bls_tol,
        max_stable_dt=max_stable_dt(system),
    )
    outcome = "pass" if report.passed else "fail"
    PASSIVITY_CHECKS.labels(outcome=outcome).inc()
    log = logger.info if report.passed else logger.warning
    log("🔍 Passivity check", order=n_e + n_h, **report.as_dict())
    return report
