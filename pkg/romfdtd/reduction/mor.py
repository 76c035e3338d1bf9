"""
Structure-preserving model order reduction.

The Krylov space of the single-step pair M = (R+F)^-1 (R-F), G = (R+F)^-1 B
is generated by block Arnoldi. Every accepted Krylov vector is split into
its E rows and H rows, and each part is orthonormalized into V1 and V2
separately, so the projection V = blkdiag(V1, V2) keeps the E/H block
form of R and F under congruence.
"""
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from romfdtd.config.solver_config import DEFLATION_TOL, REORTH_PASSES
from romfdtd.errors import DimensionError, SingularSystemError
from romfdtd.fine.fine_system import DescriptorSystem, block_pencil
from romfdtd.monitoring import get_logger

logger = get_logger(__name__)

Matrix = Union[np.ndarray, sp.spmatrix]


@dataclass(frozen=True)
class Projection:
    v1: Matrix  # n_e x q1, orthonormal columns
    v2: Matrix  # n_h x q2
    krylov_dim: int = 0
    exhausted: bool = False

    @property
    def q1(self) -> int:
        return self.v1.shape[1]

    @property
    def q2(self) -> int:
        return self.v2.shape[1]

    @property
    def order(self) -> int:
        return self.q1 + self.q2

    @property
    def is_identity(self) -> bool:
        return sp.issparse(self.v1)

    @classmethod
    def identity(cls, n_e: int, n_h: int) -> "Projection":
        return cls(
            v1=sp.identity(n_e, format="csr"),
            v2=sp.identity(n_h, format="csr"),
            krylov_dim=n_e + n_h,
        )

    def orthonormality_residual(self) -> float:
        """max over both blocks of max|V^T V - I|."""
        if self.is_identity:
            return 0.0
        worst = 0.0
        for v in (self.v1, self.v2):
            if v.shape[1]:
                gram = v.T @ v
                worst = max(worst, float(np.max(np.abs(gram - np.eye(v.shape[1])))))
        return worst


@dataclass(frozen=True)
class ReducedSystem:
    """
    Projected blocks R11~ = V1^T R11 V1, R22~, F11~, K~ = V1^T K V2,
    B~ = V^T B, L~ = V^T L, with the port scaling S carried over.
    Identity projections keep the original sparse blocks.
    """

    r11: Matrix
    r22: Matrix
    f11: Matrix
    k: Matrix
    b: Matrix
    l: Matrix
    s: Matrix
    dt: float
    projection: Projection
    extended_to: Optional[float] = None

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
        return block_pencil(self.r11, self.r22, self.f11, self.k, dt or self.dt)

    def with_dt(self, dt: float) -> "ReducedSystem":
        return replace(self, dt=dt)


def krylov_pencil(system: DescriptorSystem, expansion_hz: Optional[float] = None):
    """
    (P, Q) such that the Krylov space is span{P^-1 B, (P^-1 Q) P^-1 B, ...}.

    Without an expansion frequency P = R + F and Q = R - F, the one-step
    transition of the recursion (Markov parameters, expansion at z = inf).
    With one, P = z0 (R + F) - (R - F) and Q = R + F at the real point
    z0 = exp(2 pi f0 dt), which matches moments of the transfer function
    around z0.
    """
    r, f = system.pencil()
    if expansion_hz is None:
        return r + f, r - f
    if expansion_hz <= 0:
        raise ValueError("expansion frequency must be positive")
    z0 = np.exp(2.0 * np.pi * expansion_hz * system.dt)
    return z0 * (r + f) - (r - f), r + f


def build_projection(
    system: DescriptorSystem,
    q: int,
    tol: float = DEFLATION_TOL,
    expansion_hz: Optional[float] = None,
) -> Projection:
    """
    Build V1, V2 with q1 + q2 = q from the block Krylov space of the system.

    Args:
        system: assembled fine system
        q: target reduced order; q >= system order returns the identity
        tol: deflation threshold on the column norm left after
            reorthogonalization, relative to the column norm before it
        expansion_hz: real expansion frequency (Hz); Markov expansion when None

    Returns:
        Projection; `exhausted` is set when the Krylov space ran out of new
        directions before reaching q

    Raises:
        ValueError: if q or expansion_hz is not positive
        SingularSystemError: if the pencil cannot be factorized
    """
    if q <= 0:
        raise ValueError("target order must be positive")
    n_e, n_h, n = system.n_e, system.n_h, system.order
    if q >= n:
        return Projection.identity(n_e, n_h)

    pivot, transition = krylov_pencil(system, expansion_hz)
    try:
        lu = splu(sp.csc_matrix(pivot))
    except RuntimeError as exc:
        raise SingularSystemError(f"Krylov pencil is singular: {exc}") from exc
    transition = sp.csr_matrix(transition)

    capacity = min(n, q + system.n_p)
    basis = np.zeros((n, capacity))
    v1 = np.zeros((n_e, min(q, n_e)))
    v2 = np.zeros((n_h, min(q, n_h)))
    m = q1 = q2 = 0
    deflations = 0
    exhausted = False

    block = lu.solve(system.b.toarray()) if system.n_p else np.zeros((n, 0))
    while q1 + q2 < q:
        accepted = []
        for column in block.T:
            if m == capacity or q1 + q2 >= q:
                break
            w = column.copy()
            norm0 = np.linalg.norm(w)
            if norm0 == 0.0:
                deflations += 1
                continue
            for _ in range(REORTH_PASSES):
                w -= basis[:, :m] @ (basis[:, :m].T @ w)
            norm = np.linalg.norm(w)
            if norm <= tol * norm0:
                deflations += 1
                continue
            w /= norm
            basis[:, m] = w
            accepted.append(m)
            m += 1

            q1 = _append_orthonormal(v1, q1, w[:n_e], tol)
            if q1 + q2 < q:
                q2 = _append_orthonormal(v2, q2, w[n_e:], tol)

        if q1 + q2 >= q:
            break
        if not accepted or m == capacity:
            exhausted = True
            break
        block = lu.solve(transition @ basis[:, accepted])

    projection = Projection(
        v1=v1[:, :q1].copy(), v2=v2[:, :q2].copy(), krylov_dim=m, exhausted=exhausted
    )
    log = logger.warning if exhausted else logger.info
    log(
        "🧮 Krylov projection built",
        full_order=n,
        target=q,
        expansion_hz=expansion_hz,
        q1=q1,
        q2=q2,
        krylov_dim=m,
        deflations=deflations,
        exhausted=exhausted,
    )
    return projection


def _append_orthonormal(v: np.ndarray, count: int, part: np.ndarray, tol: float) -> int:
    """Orthonormalize `part` against v[:, :count] and append it if independent."""
    if count == v.shape[1]:
        return count
    x = part.copy()
    for _ in range(REORTH_PASSES):
        x -= v[:, :count] @ (v[:, :count].T @ x)
    norm = np.linalg.norm(x)
    # part comes from a unit Krylov vector, so norms are already relative
    if norm <= tol:
        return count
    v[:, count] = x / norm
    return count + 1


def _congruence(block: sp.spmatrix, v: np.ndarray) -> np.ndarray:
    projected = v.T @ (block @ v)
    return 0.5 * (projected + projected.T)


def reduce(system: DescriptorSystem, projection: Projection) -> ReducedSystem:
    """
    Apply the congruence transforms of the projection to every block.

    Raises:
        DimensionError: if V1/V2 do not conform to the system
    """
    if projection.v1.shape[0] != system.n_e or projection.v2.shape[0] != system.n_h:
        raise DimensionError(
            f"projection rows {projection.v1.shape[0]}+{projection.v2.shape[0]} "
            f"do not match system {system.n_e}+{system.n_h}"
        )
    if projection.is_identity:
        return ReducedSystem(
            r11=system.r11,
            r22=system.r22,
            f11=system.f11,
            k=system.k,
            b=system.b,
            l=system.l,
            s=system.s,
            dt=system.dt,
            projection=projection,
        )

    n_e = system.n_e
    v1, v2 = projection.v1, projection.v2
    b_e, b_h = system.b[:n_e], system.b[n_e:]
    l_e, l_h = system.l[:n_e], system.l[n_e:]
    return ReducedSystem(
        r11=_congruence(system.r11, v1),
        r22=_congruence(system.r22, v2),
        f11=_congruence(system.f11, v1),
        k=v1.T @ (system.k @ v2),
        b=np.vstack([(b_e.T @ v1).T, (b_h.T @ v2).T]),
        l=np.vstack([(l_e.T @ v1).T, (l_h.T @ v2).T]),
        s=system.s.toarray(),
        dt=system.dt,
        projection=projection,
    )
