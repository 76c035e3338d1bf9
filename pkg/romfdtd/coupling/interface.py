"""
Coarse/fine interface coupling.

Each coupled side of a fine region meets the coarse grid along a row (or
column) of coarse E edges. The coarse edge value y and the fine port E are
tied by the interpolation T (every fine port sees the E of the coarse edge
it lies on), and the coarse update sees the mean U = (1/r) T^T u_hat of the
r hanging H samples on the edge. Together with the reduced model this gives
one linear system per step,

    A1 z[n+1] = A2 z[n] + D [H; 0; 0],    z = [y; u_hat; x~]

which is factorized once and then marched explicitly.
"""
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from romfdtd.config import get_settings
from romfdtd.errors import DimensionError, GeometryError, PassivityError, SingularSystemError
from romfdtd.fine.fine_system import FineRegionSpec, PortLayout, check_passivity
from romfdtd.grid.materials import MaterialMap
from romfdtd.grid.yee_grid import FieldState, GridSpec
from romfdtd.monitoring import get_logger

logger = get_logger(__name__)

# sign pairing each interface E with its outer Hz neighbour
SIDE_SIGN = {"south": -1.0, "north": 1.0, "west": 1.0, "east": -1.0}


# ============ INTERFACE GEOMETRY ============

@dataclass(frozen=True)
class InterfaceSpec:
    """
    Coarse interface edges of one region, ordered side by side (south,
    north, west, east) and along each side left-to-right/bottom-to-top.

    Per edge: whether it is an Ex or Ey sample, its flat index in that
    array, the flat Hz index of the coarse cell just outside, the sign
    G, the edge length D_l, the half-cell depth D_l' and the material of
    the outer half cell. Fine port counts and positions come from the
    region's PortLayout.
    """

    sides: tuple[str, ...]
    counts: tuple[int, ...]
    is_ex: np.ndarray
    e_index: np.ndarray
    h_index: np.ndarray
    sign: np.ndarray
    length: np.ndarray
    depth: np.ndarray
    eps: np.ndarray
    sigma: np.ndarray
    edge_positions: np.ndarray
    port_counts: tuple[int, ...]
    port_positions: np.ndarray
    r: int

    @property
    def n_y(self) -> int:
        return int(self.is_ex.shape[0])

    @property
    def n_p(self) -> int:
        return int(sum(self.port_counts))


def build_interface(
    grid: GridSpec, materials: MaterialMap, region: FineRegionSpec, ports: PortLayout
) -> InterfaceSpec:
    """
    Collect the coarse interface edges of a region.

    Raises:
        GeometryError: if the region has no coupled side, leaves the grid,
            or the port layout does not follow the region's coupled sides
    """
    sides = region.coupled_sides
    if not sides:
        raise GeometryError("region has no coupled side")
    if tuple(ports.sides) != tuple(sides):
        raise GeometryError(f"port sides {ports.sides} do not match region sides {sides}")
    i0, j0, w, h = region.i0, region.j0, region.width, region.height
    if i0 < 0 or j0 < 0 or i0 + w > grid.nx or j0 + h > grid.ny:
        raise GeometryError("region extends beyond the grid")

    columns = {key: [] for key in ("is_ex", "e", "h", "len", "depth", "pos_x", "pos_y")}
    counts = []
    for side in sides:
        if side in ("south", "north"):
            l = np.arange(w)
            i = i0 + l
            j_edge = j0 if side == "south" else j0 + h
            j_cell = j0 - 1 if side == "south" else j0 + h
            if not 0 <= j_cell < grid.ny:
                raise GeometryError(f"{side} side has no coarse cell outside it")
            columns["is_ex"].append(np.ones(w, dtype=bool))
            columns["e"].append(i * (grid.ny + 1) + j_edge)
            columns["h"].append(i * grid.ny + j_cell)
            columns["len"].append(np.full(w, grid.dx))
            columns["depth"].append(np.full(w, grid.dy / 2.0))
            columns["pos_x"].append((l + 0.5) * grid.dx)
            columns["pos_y"].append(np.full(w, (j_edge - j0) * grid.dy))
            counts.append(w)
        else:
            l = np.arange(h)
            j = j0 + l
            i_edge = i0 if side == "west" else i0 + w
            i_cell = i0 - 1 if side == "west" else i0 + w
            if not 0 <= i_cell < grid.nx:
                raise GeometryError(f"{side} side has no coarse cell outside it")
            columns["is_ex"].append(np.zeros(h, dtype=bool))
            columns["e"].append(i_edge * grid.ny + j)
            columns["h"].append(i_cell * grid.ny + j)
            columns["len"].append(np.full(h, grid.dy))
            columns["depth"].append(np.full(h, grid.dx / 2.0))
            columns["pos_x"].append(np.full(h, (i_edge - i0) * grid.dx))
            columns["pos_y"].append((l + 0.5) * grid.dy)
            counts.append(h)

    flat = {key: np.concatenate(value) for key, value in columns.items()}
    sign = np.concatenate([np.full(c, SIDE_SIGN[s]) for s, c in zip(sides, counts)])
    return InterfaceSpec(
        sides=tuple(sides),
        counts=tuple(counts),
        is_ex=flat["is_ex"],
        e_index=flat["e"],
        h_index=flat["h"],
        sign=sign,
        length=flat["len"],
        depth=flat["depth"],
        eps=materials.eps.ravel()[flat["h"]],
        sigma=materials.sigma.ravel()[flat["h"]],
        edge_positions=np.column_stack([flat["pos_x"], flat["pos_y"]]),
        port_counts=tuple(ports.counts),
        port_positions=ports.output_positions,
        r=region.r,
    )


# ============ INTERPOLATION ============

@dataclass(frozen=True)
class InterpolationMatrix:
    """T (ports x coarse edges), one 1 per row and r per column."""

    t: sp.csr_matrix
    r: int

    @property
    def n_p(self) -> int:
        return self.t.shape[0]

    @property
    def n_y(self) -> int:
        return self.t.shape[1]

    def fine_e(self, y: np.ndarray) -> np.ndarray:
        return self.t @ y

    def coarse_h(self, u_hat: np.ndarray) -> np.ndarray:
        """U = (1/r) T^T u_hat, the mean hanging H on each coarse edge."""
        return (self.t.T @ u_hat) / self.r


def build_interpolation(interface: InterfaceSpec, r: int) -> InterpolationMatrix:
    """
    Build T from the interface geometry.

    Raises:
        GeometryError: if a side does not carry exactly r ports per coarse
            edge or a port does not lie on the edge it is assigned to
    """
    if int(r) != r or r < 1:
        raise GeometryError(f"refinement factor must be a positive integer, got {r}")
    rows, cols = [], []
    port_start = edge_start = 0
    for side, n_edges, n_ports in zip(interface.sides, interface.counts, interface.port_counts):
        if n_ports != r * n_edges:
            raise GeometryError(
                f"misaligned interface on {side}: {n_ports} ports for {n_edges} coarse edges, r={r}"
            )
        k = np.arange(n_ports)
        edge = edge_start + k // r
        axis = 0 if side in ("south", "north") else 1
        along = interface.port_positions[port_start + k, axis]
        centers = interface.edge_positions[edge, axis]
        if np.any(np.abs(along - centers) >= 0.5 * interface.length[edge]):
            raise GeometryError(f"misaligned interface on {side}: ports leave their coarse edge")
        rows.append(port_start + k)
        cols.append(edge)
        port_start += n_ports
        edge_start += n_edges

    n_p, n_y = port_start, edge_start
    rows = np.concatenate(rows) if rows else np.zeros(0, int)
    cols = np.concatenate(cols) if cols else np.zeros(0, int)
    t = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n_p, n_y))
    return InterpolationMatrix(t=t, r=int(r))


# ============ COUPLED UPDATE ============

@dataclass(frozen=True)
class CoupledUpdate:
    """
    Factorized interface system of one region.

    Small systems keep the dense one-step operators A1^-1 A2 and
    A1^-1 D; larger ones keep the sparse LU of A1 and solve every step.
    """

    interface: InterfaceSpec
    interpolation: InterpolationMatrix
    dt: float
    order: int
    a1: sp.csc_matrix
    a2: sp.csr_matrix
    din: sp.csr_matrix
    transition: Optional[np.ndarray] = None
    input_map: Optional[np.ndarray] = None
    lu: object = None

    @property
    def n_y(self) -> int:
        return self.interface.n_y

    @property
    def n_p(self) -> int:
        return self.interface.n_p

    @property
    def size(self) -> int:
        return self.n_y + self.n_p + self.order

    @property
    def is_dense(self) -> bool:
        return self.transition is not None

    def zeros(self) -> np.ndarray:
        return np.zeros(self.size)

    def output(self, z: np.ndarray) -> np.ndarray:
        return z[: self.n_y]

    def hanging(self, z: np.ndarray) -> np.ndarray:
        return z[self.n_y : self.n_y + self.n_p]

    def reduced_state(self, z: np.ndarray) -> np.ndarray:
        return z[self.n_y + self.n_p :]

    def gather(self, state: FieldState) -> np.ndarray:
        """Coarse Hz at n+1/2 just outside every interface edge."""
        return state.hz.ravel()[self.interface.h_index]

    def scatter(self, state: FieldState, z: np.ndarray) -> None:
        """Write the interface E block of z into the coarse arrays."""
        y = self.output(z)
        mask = self.interface.is_ex
        np.put(state.ex, self.interface.e_index[mask], y[mask])
        np.put(state.ey, self.interface.e_index[~mask], y[~mask])

    def operators(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense (A1^-1 A2, A1^-1 D), solved on demand for sparse updates."""
        if self.is_dense:
            return self.transition, self.input_map
        return self.lu.solve(self.a2.toarray()), self.lu.solve(self.din.toarray())


def _block(matrix) -> sp.csr_matrix:
    return sp.csr_matrix(matrix)


def assemble_coupled(
    system,
    interface: InterfaceSpec,
    dt: float,
    *,
    dense_limit: Optional[int] = None,
    check: bool = True,
) -> CoupledUpdate:
    """
    Assemble and factorize A1, A2 for one region.

    Args:
        system: ReducedSystem (or DescriptorSystem) of the region
        interface: coarse interface geometry
        dt: time step in seconds
        dense_limit: materialize dense operators below this size
            (SolverSettings.dense_limit when None)
        check: run the passivity check at dt first

    Returns:
        CoupledUpdate with z sized n_y + n_p + order

    Raises:
        PassivityError: if `check` is set and the model is not passive at dt
        DimensionError: if the model ports do not match the interface
        SingularSystemError: if A1 cannot be factorized
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if check:
        report = check_passivity(system, dt)
        if not report.passed:
            raise PassivityError(
                f"reduced model is not passive at dt={dt:.6g} "
                f"(max stable dt {report.max_stable_dt:.6g})",
                report,
            )

    interpolation = build_interpolation(interface, interface.r)
    if system.b.shape[1] != interpolation.n_p:
        raise DimensionError(
            f"model has {system.b.shape[1]} ports, interface expects {interpolation.n_p}"
        )

    n_y, n_p = interpolation.n_y, interpolation.n_p
    q = system.r11.shape[0] + system.r22.shape[0]
    area = interface.length * interface.depth
    a11_plus = sp.diags(area * (interface.eps / dt + interface.sigma / 2.0))
    a11_minus = sp.diags(area * (interface.eps / dt - interface.sigma / 2.0))
    drive = sp.diags(interface.length * interface.sign)
    couple = (drive @ interpolation.t.T) / interpolation.r

    r_mat, f_mat = system.pencil(dt)
    a1 = sp.bmat(
        [
            [a11_plus, couple, None],
            [interpolation.t, None, -_block(system.l).T],
            [None, -_block(system.b), _block(r_mat + f_mat)],
        ],
        format="csc",
    )
    a2 = sp.block_diag(
        (a11_minus, sp.csr_matrix((n_p, n_p)), _block(r_mat - f_mat)), format="csr"
    )
    din = sp.vstack([drive, sp.csr_matrix((n_p + q, n_y))], format="csr")

    limit = get_settings().dense_limit if dense_limit is None else dense_limit
    size = n_y + n_p + q
    common = dict(
        interface=interface, interpolation=interpolation, dt=dt, order=q, a1=a1, a2=a2, din=din
    )
    if size < limit:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", la.LinAlgWarning)
            factor = la.lu_factor(a1.toarray())
        pivots = np.diag(factor[0])
        if np.any(pivots == 0) or not np.all(np.isfinite(pivots)):
            raise SingularSystemError("interface matrix A1 is singular")
        update = CoupledUpdate(
            transition=la.lu_solve(factor, a2.toarray()),
            input_map=la.lu_solve(factor, din.toarray()),
            **common,
        )
    else:
        try:
            lu = splu(a1)
        except RuntimeError as exc:
            raise SingularSystemError(f"interface matrix A1 is singular: {exc}") from exc
        update = CoupledUpdate(lu=lu, **common)

    logger.info(
        "🔗 Interface assembled",
        n_y=n_y,
        n_p=n_p,
        order=q,
        size=size,
        dense=update.is_dense,
    )
    return update


def step_interface(update: CoupledUpdate, z: np.ndarray, h: np.ndarray) -> np.ndarray:
    """z[n+1] = A1^-1 A2 z[n] + A1^-1 D h, with h the coarse Hz at n+1/2."""
    if update.is_dense:
        return update.transition @ z + update.input_map @ h
    return update.lu.solve(update.a2 @ z + update.din @ h)
