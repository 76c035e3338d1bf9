from .cfl_extension import extend_cfl, generalized_singular_values, model_cfl_limit
from .mor import Projection, ReducedSystem, build_projection, krylov_pencil, reduce

__all__ = [
    "Projection",
    "ReducedSystem",
    "build_projection",
    "extend_cfl",
    "generalized_singular_values",
    "krylov_pencil",
    "model_cfl_limit",
    "reduce",
]
