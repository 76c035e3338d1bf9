"""
romfdtd - 2-D TEz FDTD with embedded passive reduced-order fine regions.

Refined subregions of a coarse Yee grid are modelled as descriptor systems,
compressed by a structure-preserving Krylov projection, optionally CFL
extended, and coupled back to the coarse grid through an explicit
interface update that stays stable at the chosen time step.
"""

__version__ = "0.1.0"
