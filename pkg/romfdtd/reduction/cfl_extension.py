"""
CFL extension of a reduced model.

The model is stable at dt exactly when every generalized singular value
s_k of (K, R11, R22) satisfies dt * s_k < 2. Values above 2/dt_target
are clipped by a low-rank correction of K; every other block is left
untouched, so the extended model stays passive at dt_target.
"""
from dataclasses import replace

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from romfdtd.config.solver_config import DEFAULT_EXTENSION_MARGIN
from romfdtd.fine.fine_system import coupling_singular_values, spd_sqrt_pair
from romfdtd.monitoring import get_logger
from romfdtd.monitoring.metrics import CLIPPED_SINGULAR_VALUES
from romfdtd.reduction.mor import ReducedSystem

logger = get_logger(__name__)


def generalized_singular_values(system) -> np.ndarray:
    """Descending s_k of R11^(-1/2) K R22^(-1/2) (1/s)."""
    return coupling_singular_values(system.r11, system.r22, system.k)


def model_cfl_limit(system) -> float:
    """2 / s_max, or inf for a model without coupling."""
    s = coupling_singular_values(system.r11, system.r22, system.k, largest_only=True)
    if s.size == 0 or s[0] == 0:
        return np.inf
    return float(2.0 / s[0])


def _dense(block) -> np.ndarray:
    return block.toarray() if sp.issparse(block) else block


def extend_cfl(
    system: ReducedSystem, dt_target: float, margin: float = DEFAULT_EXTENSION_MARGIN
) -> ReducedSystem:
    """
    Clip the singular values above 2/dt_target * (1 - margin).

    K' = K - R11^(1/2) U_c diag(s_c - threshold) W_c^T R22^(1/2), where
    U_c, W_c are the singular vectors of the clipped values.

    Args:
        system: reduced (or identity-projected) model
        dt_target: time step the model must support, in seconds
        margin: relative gap kept below the stability edge

    Returns:
        New ReducedSystem (dense blocks) with extended_to = dt_target, or
        `system` itself when nothing needs clipping

    Raises:
        ValueError: on a non-positive dt_target or a margin outside (0, 1)
        PassivityError: if R11 or R22 is not positive definite
    """
    if dt_target <= 0:
        raise ValueError("dt_target must be positive")
    if margin <= 0.0 or margin >= 1.0:
        raise ValueError("margin must lie in (0, 1)")

    threshold = 2.0 / dt_target * (1.0 - margin)
    r11, r22, k = _dense(system.r11), _dense(system.r22), _dense(system.k)
    sqrt1, inv1 = spd_sqrt_pair(r11)
    sqrt2, inv2 = spd_sqrt_pair(r22)
    u, s, wt = la.svd(inv1 @ k @ inv2, full_matrices=False)

    clipped = s > threshold
    count = int(clipped.sum())
    if count == 0:
        logger.debug(
            "CFL extension not needed", dt_target=dt_target, s_max=float(s.max(initial=0.0))
        )
        return system

    correction = (u[:, clipped] * (s[clipped] - threshold)) @ wt[clipped]
    k_new = k - sqrt1 @ correction @ sqrt2

    CLIPPED_SINGULAR_VALUES.inc(count)
    logger.info(
        "⏱️ CFL extended",
        order=system.order,
        dt_target=dt_target,
        clipped=count,
        s_max_before=float(s[0]),
        threshold=threshold,
    )
    return replace(
        system,
        r11=r11,
        r22=r22,
        f11=_dense(system.f11),
        k=k_new,
        b=_dense(system.b),
        l=_dense(system.l),
        s=_dense(system.s),
        extended_to=dt_target,
    )
