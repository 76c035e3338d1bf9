"""
Scenario models.

A scenario is the declarative description of one simulation: coarse grid,
geometric materials, fine regions, sources, probes and run controls. All
quantities are SI. Models are frozen and reject unknown keys, so a parsed
scenario can be shared freely and serialized back without loss.
"""
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_core import PydanticCustomError

from romfdtd.config.solver_config import COPPER_CONDUCTIVITY


def invariant(message: str) -> PydanticCustomError:
    """Cross-field or type invariant violation, reported as E_INVARIANT."""
    return PydanticCustomError("invariant", message)


class _Frozen(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)


# ============ MATERIALS ============

class MaterialSpec(_Frozen):
    """Relative permittivity, conductivity (S/m) and relative permeability."""

    eps_r: float = Field(1.0, gt=0)
    sigma: float = Field(0.0, ge=0)
    mu_r: float = Field(1.0, gt=0)


COPPER = MaterialSpec(sigma=COPPER_CONDUCTIVITY)

MaterialRef = Union[Literal["copper", "vacuum"], MaterialSpec]


def resolve_material(ref: MaterialRef) -> MaterialSpec:
    if ref == "copper":
        return COPPER
    if ref == "vacuum":
        return MaterialSpec()
    return ref


class RectShape(_Frozen):
    """Axis-aligned rectangle in meters, inclusive of its edges."""

    kind: Literal["rect"]
    x0: float
    y0: float
    x1: float
    y1: float
    material: MaterialRef

    @model_validator(mode="after")
    def _ordered(self) -> "RectShape":
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise invariant("rect needs x1 > x0 and y1 > y0")
        return self


class DiskShape(_Frozen):
    """Disk (cross-section of a rod) in meters."""

    kind: Literal["disk"]
    cx: float
    cy: float
    radius: float = Field(gt=0)
    material: MaterialRef


Shape = Annotated[Union[RectShape, DiskShape], Field(discriminator="kind")]


class MaterialsSection(_Frozen):
    """Background material plus shapes painted in order (later wins)."""

    background: MaterialRef = "vacuum"
    shapes: list[Shape] = Field(default_factory=list)


# ============ GRID ============

WallKind = Literal["pec", "pml"]


class Boundaries(_Frozen):
    south: WallKind = "pec"
    north: WallKind = "pec"
    west: WallKind = "pec"
    east: WallKind = "pec"


class GridSection(_Frozen):
    nx: int = Field(ge=1)
    ny: int = Field(ge=1)
    dx: float = Field(gt=0)
    dy: float = Field(gt=0)
    boundaries: Boundaries = Field(default_factory=Boundaries)
    pml_depth: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _pml_fits(self) -> "GridSection":
        if self.pml_depth >= min(self.nx, self.ny) / 2:
            raise invariant("pml_depth must be below half the smaller grid dimension")
        walls = self.boundaries.model_dump().values()
        if "pml" in walls and self.pml_depth == 0:
            raise invariant("a pml wall needs pml_depth >= 1")
        return self


# ============ FINE REGIONS ============

class RegionSpec(_Frozen):
    """
    Rectangle of coarse cells refined by an integer factor and replaced by a
    (possibly reduced) model. `expansion_hz` selects a real expansion
    frequency for the Krylov space; without it the reduction matches the
    Markov parameters of the one-step recursion.
    """

    id: str
    anchor: tuple[int, int]
    size: tuple[int, int]
    refinement: int
    mor: bool = True
    order: Optional[int] = Field(None, gt=0)
    expansion_hz: Optional[float] = Field(None, gt=0)
    extension: bool = False
    extension_factor: float = Field(2.0, ge=1.0)
    margin: float = Field(1e-6, gt=0, lt=1)

    @field_validator("anchor")
    @classmethod
    def _anchor_nonnegative(cls, value: tuple[int, int]) -> tuple[int, int]:
        if min(value) < 0:
            raise invariant("anchor indices must be >= 0")
        return value

    @field_validator("size")
    @classmethod
    def _size_positive(cls, value: tuple[int, int]) -> tuple[int, int]:
        if min(value) < 1:
            raise invariant("region size must be at least one coarse cell")
        return value

    @field_validator("refinement")
    @classmethod
    def _refined(cls, value: int) -> int:
        if value <= 1:
            raise invariant("refinement factor must be an integer > 1")
        return value

    @model_validator(mode="after")
    def _order_given(self) -> "RegionSpec":
        if self.mor and self.order is None:
            raise invariant(f"region {self.id}: mor requires an order")
        return self


# ============ SOURCES AND PROBES ============

class _Pulse(_Frozen):
    id: str = "source"
    bandwidth: float = Field(gt=0)
    delay: Optional[float] = Field(None, ge=0)
    amplitude: float = 1.0


class HzPointSource(_Pulse):
    """Soft source added to Hz over a block of cells."""

    kind: Literal["hz_point"]
    cell: tuple[int, int]
    span: tuple[int, int] = (1, 1)


class JyLineSource(_Pulse):
    """Electric current density (A/m^2) on Ey edges of one grid column."""

    kind: Literal["jy_line"]
    column: int
    rows: tuple[int, int]

    @model_validator(mode="after")
    def _rows_ordered(self) -> "JyLineSource":
        if self.rows[1] < self.rows[0]:
            raise invariant("jy_line rows must be [first, last] with first <= last")
        return self


SourceSpec = Annotated[Union[HzPointSource, JyLineSource], Field(discriminator="kind")]


class ProbeSpec(_Frozen):
    """
    Field probe. The recorded value is the mean over `span` samples:
    a block of cells for hz, a run of edges along x for ex or along y for ey.
    """

    id: str
    component: Literal["ex", "ey", "hz"]
    cell: tuple[int, int]
    span: tuple[int, int] = (1, 1)

    @model_validator(mode="after")
    def _span_matches_component(self) -> "ProbeSpec":
        if min(self.span) < 1:
            raise invariant("probe span must be >= 1")
        if self.component == "ex" and self.span[1] != 1:
            raise invariant("ex probes average along x only")
        if self.component == "ey" and self.span[0] != 1:
            raise invariant("ey probes average along y only")
        return self


# ============ RUN CONTROLS ============

Scheme = Literal["proposed", "mor_only", "extension_only", "coarse", "fine"]


class RunSection(_Frozen):
    """
    n_steps coupled steps at dt = cfl_number x (smallest unextended fine-region
    limit, or the coarse limit when no region is present).
    """

    n_steps: int = Field(ge=0)
    cfl_number: float = Field(0.99, gt=0)
    scheme: Scheme = "proposed"
    window: Literal["none", "half-hann"] = "none"


# ============ SCENARIO ============

class Scenario(_Frozen):
    name: str = "scenario"
    grid: GridSection
    materials: MaterialsSection = Field(default_factory=MaterialsSection)
    regions: list[RegionSpec] = Field(default_factory=list)
    sources: list[SourceSpec] = Field(default_factory=list)
    probes: list[ProbeSpec] = Field(default_factory=list)
    run: RunSection

    @model_validator(mode="after")
    def _geometry(self) -> "Scenario":
        _check_unique("source", [s.id for s in self.sources])
        _check_unique("probe", [p.id for p in self.probes])
        _check_unique("region", [r.id for r in self.regions])
        for region in self.regions:
            _check_region(self.grid, region)
        for a_index, a in enumerate(self.regions):
            for b in self.regions[a_index + 1:]:
                if _regions_touch(a, b):
                    raise invariant(f"regions {a.id} and {b.id} overlap or share a boundary")
        for source in self.sources:
            _check_source(self.grid, self.regions, source)
        for probe in self.probes:
            _check_probe(self.grid, self.regions, probe)
        allowed = _scheme_cfl_limit(self.run, self.regions)
        if self.run.cfl_number > allowed:
            raise invariant(
                f"cfl_number {self.run.cfl_number} exceeds the "
                f"{self.run.scheme} scheme limit {allowed}"
            )
        return self


# ============ GEOMETRY HELPERS ============

def pml_widths(grid: GridSection) -> dict[str, int]:
    """PML depth in cells for each wall (0 for PEC walls)."""
    walls = grid.boundaries.model_dump()
    return {side: grid.pml_depth if kind == "pml" else 0 for side, kind in walls.items()}


def pec_backed_sides(grid: GridSection, region: RegionSpec) -> frozenset[str]:
    """Sides of a region flush against the outer (PEC) wall."""
    (i0, j0), (w, h) = region.anchor, region.size
    flush = set()
    if j0 == 0:
        flush.add("south")
    if j0 + h == grid.ny:
        flush.add("north")
    if i0 == 0:
        flush.add("west")
    if i0 + w == grid.nx:
        flush.add("east")
    return frozenset(flush)


def _check_unique(kind: str, ids: list[str]) -> None:
    if len(ids) != len(set(ids)):
        raise invariant(f"duplicate {kind} ids")


def _check_region(grid: GridSection, region: RegionSpec) -> None:
    (i0, j0), (w, h) = region.anchor, region.size
    if i0 + w > grid.nx or j0 + h > grid.ny:
        raise invariant(f"region {region.id} extends beyond the grid")
    depth = pml_widths(grid)
    walls = grid.boundaries.model_dump()
    flush = pec_backed_sides(grid, region)
    if flush == set(walls):
        raise invariant(f"region {region.id} covers the whole grid and has no coupled side")
    for side in flush:
        if walls[side] != "pec":
            raise invariant(f"region {region.id} is flush against a non-PEC {side} wall")
    # coupled sides need a non-PML coarse cell outside them
    clearance = {
        "south": j0 - 1 - depth["south"],
        "north": grid.ny - (j0 + h) - 1 - depth["north"],
        "west": i0 - 1 - depth["west"],
        "east": grid.nx - (i0 + w) - 1 - depth["east"],
    }
    for side, gap in clearance.items():
        if side not in flush and gap < 0:
            raise invariant(f"region {region.id} {side} side is too close to the PML")


def _regions_touch(a: RegionSpec, b: RegionSpec) -> bool:
    (ai, aj), (aw, ah) = a.anchor, a.size
    (bi, bj), (bw, bh) = b.anchor, b.size
    return not (ai + aw < bi or bi + bw < ai or aj + ah < bj or bj + bh < aj)


def _overlaps(cell, span, lo, hi) -> bool:
    """Whether the block [cell, cell + span) meets the half-open box [lo, hi)."""
    return all(a < top and bottom < a + n for a, n, bottom, top in zip(cell, span, lo, hi))


def _check_source(grid: GridSection, regions: list[RegionSpec], source) -> None:
    if source.kind == "hz_point":
        (i, j), (sx, sy) = source.cell, source.span
        if min(sx, sy) < 1:
            raise invariant(f"source {source.id}: span must be >= 1")
        if i < 0 or j < 0 or i + sx > grid.nx or j + sy > grid.ny:
            raise invariant(f"source {source.id} lies outside the grid")
        for region in regions:
            (i0, j0), (w, h) = region.anchor, region.size
            if _overlaps(source.cell, source.span, (i0, j0), (i0 + w, j0 + h)):
                raise invariant(f"source {source.id} lies inside region {region.id}")
        return
    column, (first, last) = source.column, source.rows
    if not (1 <= column <= grid.nx - 1) or first < 0 or last > grid.ny - 1:
        raise invariant(f"source {source.id} must use interior Ey edges")
    for region in regions:
        (i0, j0), (w, h) = region.anchor, region.size
        if _overlaps((column, first), (1, last - first + 1), (i0, j0), (i0 + w + 1, j0 + h)):
            raise invariant(f"source {source.id} touches region {region.id}")


# extra samples along (x, y) of each component over the Hz cell count
_STAGGER = {"hz": (0, 0), "ex": (0, 1), "ey": (1, 0)}


def _check_probe(grid: GridSection, regions: list[RegionSpec], probe: ProbeSpec) -> None:
    (i, j), (sx, sy) = probe.cell, probe.span
    ox, oy = _STAGGER[probe.component]
    if i < 0 or j < 0 or i + sx > grid.nx + ox or j + sy > grid.ny + oy:
        raise invariant(f"probe {probe.id} lies outside the grid")
    for region in regions:
        (i0, j0), (w, h) = region.anchor, region.size
        if _overlaps(probe.cell, probe.span, (i0, j0), (i0 + w + ox, j0 + h + oy)):
            raise invariant(f"probe {probe.id} lies inside region {region.id}")


def _scheme_cfl_limit(run: RunSection, regions: list[RegionSpec]) -> float:
    """Largest cfl_number the scheme admits, relative to its base CFL limit."""
    if not regions or run.scheme in ("mor_only", "coarse", "fine"):
        return 1.0
    if run.scheme == "extension_only":
        return min(region.extension_factor for region in regions)
    return min(region.extension_factor if region.extension else 1.0 for region in regions)
