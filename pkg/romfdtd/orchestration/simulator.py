"""
Simulation orchestration.

One coupled time step:
    1. Hz on the coarse grid (split field inside the PML) to n+1/2
    2. Hz soft sources at (n+1/2) dt
    3. every fine region: gather the coarse Hz outside its interface,
       advance its interface state z, write the new interface E back
    4. coarse E (with current sources) to n+1
    5. probes sampled at t = (n+1) dt
"""
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as la
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs

from romfdtd.config import EPS0, MU0, get_settings
from romfdtd.config.solver_config import DEFAULT_EXTENSION_MARGIN, RADIUS_DENSE_LIMIT
from romfdtd.coupling.interface import (
    CoupledUpdate,
    assemble_coupled,
    build_interface,
    step_interface,
)
from romfdtd.errors import DimensionError, GeometryError, InstabilityError, PassivityError
from romfdtd.fine.fine_system import DescriptorSystem, FineRegionSpec, assemble_fine_system
from romfdtd.grid.materials import MaterialMap, rasterize
from romfdtd.grid.yee_grid import (
    GridSpec,
    YeeUpdate,
    cfl_limit,
    gaussian_pulse,
    interior_masks,
    step_coarse_e,
    step_coarse_h,
)
from romfdtd.models.records import RunRecord
from romfdtd.models.scenario import (
    GridSection,
    HzPointSource,
    JyLineSource,
    ProbeSpec,
    RegionSpec,
    RunSection,
    Scenario,
    pec_backed_sides,
)
from romfdtd.monitoring import LogContext, get_logger
from romfdtd.monitoring.metrics import (
    INSTABILITIES,
    ROM_ASSEMBLY_SECONDS,
    RUN_DURATION,
    STEPS_TOTAL,
)
from romfdtd.reduction.cfl_extension import extend_cfl, model_cfl_limit
from romfdtd.reduction.mor import Projection, ReducedSystem, build_projection, reduce

logger = get_logger(__name__)

ORACLE_CFL_NUMBER = 0.99


# ============ SOURCES AND PROBES ============

@dataclass(frozen=True)
class SourceDriver:
    """Gaussian pulse injected on a set of Hz cells or Ey edges."""

    id: str
    target: str  # "hz" or "jy"
    index: np.ndarray
    bandwidth: float
    delay: Optional[float]
    amplitude: float

    def waveform(self, t):
        return gaussian_pulse(t, self.bandwidth, self.delay)

    def value(self, t):
        return self.amplitude * self.waveform(t)


def source_driver(grid: GridSpec, spec) -> SourceDriver:
    """
    Flat indices of a source footprint.

    Raises:
        GeometryError: if the footprint leaves the grid
    """
    if isinstance(spec, HzPointSource):
        (i, j), (sx, sy) = spec.cell, spec.span
        if i < 0 or j < 0 or i + sx > grid.nx or j + sy > grid.ny:
            raise GeometryError(f"source {spec.id} lies outside the grid")
        ii, jj = np.meshgrid(np.arange(i, i + sx), np.arange(j, j + sy), indexing="ij")
        return SourceDriver(
            spec.id, "hz", (ii * grid.ny + jj).ravel(), spec.bandwidth, spec.delay, spec.amplitude
        )
    if isinstance(spec, JyLineSource):
        first, last = spec.rows
        if not (0 < spec.column < grid.nx) or first < 0 or last >= grid.ny:
            raise GeometryError(f"source {spec.id} must use interior Ey edges")
        index = spec.column * grid.ny + np.arange(first, last + 1)
        return SourceDriver(spec.id, "jy", index, spec.bandwidth, spec.delay, spec.amplitude)
    raise TypeError(f"unsupported source {type(spec).__name__}")


@dataclass(frozen=True)
class ProbeDriver:
    id: str
    component: str
    index: np.ndarray

    def sample(self, state) -> float:
        return float(np.mean(getattr(state, self.component).ravel()[self.index]))


def probe_driver(grid: GridSpec, spec: ProbeSpec) -> ProbeDriver:
    (i, j), (sx, sy) = spec.cell, spec.span
    if spec.component == "hz":
        ii, jj = np.meshgrid(np.arange(i, i + sx), np.arange(j, j + sy), indexing="ij")
        index, shape = (ii * grid.ny + jj).ravel(), grid.hz_shape
        extent = (i + sx, j + sy)
    elif spec.component == "ex":
        index, shape = np.arange(i, i + sx) * (grid.ny + 1) + j, grid.ex_shape
        extent = (i + sx, j + 1)
    else:
        index, shape = i * grid.ny + np.arange(j, j + sy), grid.ey_shape
        extent = (i + 1, j + sy)
    if i < 0 or j < 0 or extent[0] > shape[0] or extent[1] > shape[1]:
        raise GeometryError(f"probe {spec.id} lies outside the grid")
    return ProbeDriver(spec.id, spec.component, index)


# ============ FINE REGIONS ============

@dataclass
class RegionModel:
    """A fine region as it runs inside the coarse grid."""

    id: str
    region: FineRegionSpec
    system: DescriptorSystem
    reduced: ReducedSystem
    update: CoupledUpdate
    fine_limit: float
    model_limit: float
    z: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.z is None:
            self.z = self.update.zeros()

    def reset(self) -> None:
        self.z = self.update.zeros()

    def summary(self) -> dict:
        return {
            "id": self.id,
            "refinement": self.region.r,
            "full_order": self.system.order,
            "order": self.reduced.order,
            "q1": self.reduced.n_e,
            "q2": self.reduced.n_h,
            "ports": self.system.n_p,
            "fine_limit": self.fine_limit,
            "model_limit": self.model_limit,
            "extended_to": self.reduced.extended_to,
        }


def build_region_model(
    grid: GridSpec,
    materials: MaterialMap,
    region: FineRegionSpec,
    dt: float,
    *,
    order: Optional[int] = None,
    expansion_hz: Optional[float] = None,
    extend_to: Optional[float] = None,
    margin: float = DEFAULT_EXTENSION_MARGIN,
    strict: bool = True,
    dense_limit: Optional[int] = None,
    region_id: str = "region",
) -> RegionModel:
    """
    Assemble, reduce, extend and couple one fine region.

    Args:
        grid: coarse grid
        materials: coarse material map (supplies the outer half-cell materials)
        region: fine region geometry and fine materials
        dt: coupled time step in seconds
        order: reduced order q, identity projection when None
        expansion_hz: real Krylov expansion frequency (Markov expansion when None)
        extend_to: CFL extension target dt in seconds, no extension when None
        margin: relative extension margin
        strict: raise PassivityError if the model is not passive at dt
        dense_limit: override of SolverSettings.dense_limit
        region_id: name used in logs and metadata
    """
    start = time.time()
    with LogContext(region=region_id):
        system = assemble_fine_system(region, dt)
        if order is None:
            projection = Projection.identity(system.n_e, system.n_h)
        else:
            projection = build_projection(system, order, expansion_hz=expansion_hz)
        reduced = reduce(system, projection)
        if extend_to is not None:
            reduced = extend_cfl(reduced, extend_to, margin)
        interface = build_interface(grid, materials, region, system.ports)
        update = assemble_coupled(reduced, interface, dt, dense_limit=dense_limit, check=strict)
    ROM_ASSEMBLY_SECONDS.observe(time.time() - start)

    return RegionModel(
        id=region_id,
        region=region,
        system=system,
        reduced=reduced,
        update=update,
        fine_limit=cfl_limit(region.hx, region.hy, region.materials),
        model_limit=model_cfl_limit(reduced),
    )


def region_masks(grid: GridSpec, regions: Sequence[FineRegionSpec]):
    """Coarse active masks with every region (interface edges included) switched off."""
    ex_active, ey_active, hz_active = interior_masks(grid)
    for region in regions:
        i0, j0, w, h = region.i0, region.j0, region.width, region.height
        ex_active[i0 : i0 + w, j0 : j0 + h + 1] = False
        ey_active[i0 : i0 + w + 1, j0 : j0 + h] = False
        hz_active[i0 : i0 + w, j0 : j0 + h] = False
    return ex_active, ey_active, hz_active


# ============ SIMULATION ============

class Simulation:
    """
    Coarse grid plus embedded region models, marched in lock step.

    Example:
        sim = build_simulation(scenario)
        record = sim.march(scenario.run.n_steps)
    """

    def __init__(
        self,
        grid: GridSpec,
        materials: MaterialMap,
        dt: float,
        regions: Sequence[RegionModel] = (),
        sources: Sequence[SourceDriver] = (),
        probes: Sequence[ProbeDriver] = (),
        *,
        scheme: str = "proposed",
        name: str = "scenario",
    ):
        self.grid = grid
        self.materials = materials
        self.regions = list(regions)
        self.sources = list(sources)
        self.probes = list(probes)
        self.scheme = scheme
        self.name = name
        self.metadata: dict = {}

        for model in self.regions:
            if abs(model.update.dt - dt) > 1e-12 * dt:
                raise ValueError(f"region {model.id} was assembled at a different dt")
        masks = region_masks(grid, [model.region for model in self.regions])
        self.update = YeeUpdate.build(grid, materials, dt, *masks)
        self.state = self.update.new_state()
        self._jy = np.zeros(grid.ey_shape)

    @property
    def dt(self) -> float:
        return self.update.dt

    def reset(self) -> None:
        self.state = self.update.new_state()
        for model in self.regions:
            model.reset()

    def step(self, with_sources: bool = True) -> None:
        state = self.state
        t_half = (state.n + 0.5) * self.dt

        step_coarse_h(state, self.update)
        if with_sources:
            hz = state.hz.reshape(-1)
            for source in self.sources:
                if source.target == "hz":
                    np.add.at(hz, source.index, source.value(t_half))

        for model in self.regions:
            h = model.update.gather(state)
            model.z = step_interface(model.update, model.z, h)
            model.update.scatter(state, model.z)

        jy = None
        if with_sources and any(s.target == "jy" for s in self.sources):
            self._jy.fill(0.0)
            flat = self._jy.reshape(-1)
            for source in self.sources:
                if source.target == "jy":
                    np.add.at(flat, source.index, source.value(t_half))
            jy = self._jy
        step_coarse_e(state, self.update, jy=jy)

    def sample(self) -> np.ndarray:
        return np.array([probe.sample(self.state) for probe in self.probes])

    def check_finite(self) -> None:
        finite = self.state.is_finite() and all(np.isfinite(m.z).all() for m in self.regions)
        if not finite:
            INSTABILITIES.inc()
            logger.error("💥 Non-finite fields detected", step=self.state.n, scheme=self.scheme)
            raise InstabilityError(f"non-finite fields at step {self.state.n}", self.state.n)

    def march(self, n_steps: int) -> RunRecord:
        """
        Advance n_steps and record every probe after each step.

        Raises:
            InstabilityError: if the NaN sentinel trips
        """
        interval = get_settings().nan_check_interval
        first = self.state.n
        values = np.zeros((n_steps, len(self.probes)))
        start = time.time()
        for k in range(n_steps):
            self.step()
            if self.probes:
                values[k] = self.sample()
            if (k + 1) % interval == 0:
                self.check_finite()
        self.check_finite()
        duration = time.time() - start

        STEPS_TOTAL.labels(scheme=self.scheme).inc(n_steps)
        RUN_DURATION.labels(scheme=self.scheme).observe(duration)

        steps = first + np.arange(n_steps)
        source = None
        if self.sources:
            source = self.sources[0].waveform((steps + 0.5) * self.dt)
        metadata = dict(self.metadata)
        metadata.update(
            scheme=self.scheme,
            name=self.name,
            dt=self.dt,
            n_steps=n_steps,
            wall_clock_s=duration,
        )
        if self.sources:
            metadata["bandwidth"] = self.sources[0].bandwidth
        return RunRecord(
            dt=self.dt,
            times=(steps + 1) * self.dt,
            probes={probe.id: values[:, k].copy() for k, probe in enumerate(self.probes)},
            source=source,
            metadata=metadata,
        )

    # ---- flat state, for the amplification operator ----

    def _layout(self):
        update = self.update
        return (
            np.flatnonzero(update.ex_active),
            np.flatnonzero(update.ey_active),
            np.flatnonzero(update.hz_active),
        )

    def _z_scale(self, model: RegionModel) -> np.ndarray:
        e, h = np.sqrt(EPS0), np.sqrt(MU0)
        cu = model.update
        return np.concatenate(
            [
                np.full(cu.n_y, e),
                np.full(cu.n_p, h),
                np.full(model.reduced.n_e, e),
                np.full(model.reduced.n_h, h),
            ]
        )

    @property
    def state_size(self) -> int:
        ex, ey, hz = self._layout()
        return ex.size + ey.size + hz.size + self.state.hzx.size + sum(
            m.update.size for m in self.regions
        )

    def state_vector(self) -> np.ndarray:
        """Active E scaled by sqrt(eps0), H by sqrt(mu0), then every region's z."""
        ex, ey, hz = self._layout()
        e, h = np.sqrt(EPS0), np.sqrt(MU0)
        parts = [
            self.state.ex.ravel()[ex] * e,
            self.state.ey.ravel()[ey] * e,
            self.state.hz.ravel()[hz] * h,
            self.state.hzx * h,
        ]
        parts += [m.z * self._z_scale(m) for m in self.regions]
        return np.concatenate(parts)

    def load_state_vector(self, vector: np.ndarray) -> None:
        ex, ey, hz = self._layout()
        if vector.shape != (self.state_size,):
            raise DimensionError(f"state vector of size {vector.shape} != {self.state_size}")
        e, h = np.sqrt(EPS0), np.sqrt(MU0)
        state = self.state
        state.ex[...] = 0.0
        state.ey[...] = 0.0
        state.hz[...] = 0.0
        offset = 0
        for array, index, scale in ((state.ex, ex, e), (state.ey, ey, e), (state.hz, hz, h)):
            np.put(array, index, vector[offset : offset + index.size] / scale)
            offset += index.size
        n_hzx = state.hzx.size
        state.hzx[:] = vector[offset : offset + n_hzx] / h
        offset += n_hzx
        for model in self.regions:
            size = model.update.size
            model.z = vector[offset : offset + size] / self._z_scale(model)
            model.update.scatter(state, model.z)
            offset += size

    def apply_step(self, vector: np.ndarray) -> np.ndarray:
        """One source-free step applied to a flat state."""
        self.load_state_vector(np.asarray(vector, dtype=float).ravel())
        self.step(with_sources=False)
        return self.state_vector()


def amplification_matrix(sim: Simulation) -> np.ndarray:
    """Explicit one-step operator, built column by column."""
    n = sim.state_size
    matrix = np.zeros((n, n))
    unit = np.zeros(n)
    for k in range(n):
        unit[k] = 1.0
        matrix[:, k] = sim.apply_step(unit)
        unit[k] = 0.0
    sim.reset()
    return matrix


def spectral_radius(sim: Simulation) -> float:
    """
    Spectral radius of the one-step operator of a simulation.

    Raises:
        DimensionError: if the state exceeds SolverSettings.max_radius_states
    """
    n = sim.state_size
    limit = get_settings().max_radius_states
    if n > limit:
        raise DimensionError(f"scene has {n} states, the radius instrument allows {limit}")
    if n <= RADIUS_DENSE_LIMIT:
        radius = float(np.max(np.abs(la.eigvals(amplification_matrix(sim)))))
    else:
        operator = LinearOperator((n, n), matvec=sim.apply_step, dtype=float)
        try:
            values = eigs(operator, k=1, which="LM", return_eigenvectors=False, tol=1e-12)
        except ArpackNoConvergence as exc:
            if len(exc.eigenvalues) == 0:
                raise
            values = exc.eigenvalues
        radius = float(np.max(np.abs(values)))
        sim.reset()
    logger.info("📐 Spectral radius", states=n, radius=radius, scheme=sim.scheme)
    return radius


# ============ SCENARIO WIRING ============

def derive_coarse_only(scenario: Scenario) -> Scenario:
    """Same scene on the coarse grid alone (fine regions dropped)."""
    run = scenario.run.model_copy(
        update={
            "scheme": "proposed",
            "cfl_number": min(scenario.run.cfl_number, ORACLE_CFL_NUMBER),
        }
    )
    return Scenario(
        name=f"{scenario.name}-coarse",
        grid=scenario.grid,
        materials=scenario.materials,
        regions=[],
        sources=scenario.sources,
        probes=scenario.probes,
        run=run,
    )


def _refine_source(source, r: int):
    if isinstance(source, HzPointSource):
        (i, j), (sx, sy) = source.cell, source.span
        return source.model_copy(update={"cell": (i * r, j * r), "span": (sx * r, sy * r)})
    first, last = source.rows
    return source.model_copy(
        update={"column": source.column * r, "rows": (first * r, (last + 1) * r - 1)}
    )


def _refine_probe(probe: ProbeSpec, r: int) -> ProbeSpec:
    (i, j), (sx, sy) = probe.cell, probe.span
    if probe.component == "hz":
        span = (sx * r, sy * r)
    elif probe.component == "ex":
        span = (sx * r, 1)
    else:
        span = (1, sy * r)
    return probe.model_copy(update={"cell": (i * r, j * r), "span": span})


def derive_all_fine(scenario: Scenario) -> Scenario:
    """
    Whole domain meshed at the largest region refinement, no regions.
    Sources and probes keep their physical footprint.
    """
    if not scenario.regions:
        return derive_coarse_only(scenario)
    r = max(region.refinement for region in scenario.regions)
    grid = scenario.grid
    fine_grid = GridSection(
        nx=grid.nx * r,
        ny=grid.ny * r,
        dx=grid.dx / r,
        dy=grid.dy / r,
        boundaries=grid.boundaries,
        pml_depth=grid.pml_depth * r,
    )
    run = RunSection(
        n_steps=scenario.run.n_steps,
        cfl_number=min(scenario.run.cfl_number, ORACLE_CFL_NUMBER),
        scheme="proposed",
        window=scenario.run.window,
    )
    return Scenario(
        name=f"{scenario.name}-fine",
        grid=fine_grid,
        materials=scenario.materials,
        regions=[],
        sources=[_refine_source(s, r) for s in scenario.sources],
        probes=[_refine_probe(p, r) for p in scenario.probes],
        run=run,
    )


def _effective(scenario: Scenario) -> Scenario:
    if scenario.run.scheme == "coarse":
        return derive_coarse_only(scenario)
    if scenario.run.scheme == "fine":
        return derive_all_fine(scenario)
    return scenario


def _region_plan(scheme: str, spec: RegionSpec, base_limit: float):
    """(reduced order or None, extension target dt or None) for one region."""
    if scheme == "mor_only":
        return spec.order, None
    if scheme == "extension_only":
        return None, spec.extension_factor * base_limit
    order = spec.order if spec.mor else None
    extend_to = spec.extension_factor * base_limit if spec.extension else None
    return order, extend_to


def fine_region(grid: GridSection, scenario: Scenario, spec: RegionSpec) -> FineRegionSpec:
    (i0, j0), (w, h), r = spec.anchor, spec.size, spec.refinement
    materials = rasterize(
        scenario.materials, w * r, h * r, grid.dx / r, grid.dy / r, origin=(i0 * grid.dx, j0 * grid.dy)
    )
    return FineRegionSpec(
        i0=i0,
        j0=j0,
        width=w,
        height=h,
        r=r,
        dx=grid.dx,
        dy=grid.dy,
        materials=materials,
        pec_sides=pec_backed_sides(grid, spec),
    )


def build_simulation(
    scenario: Scenario, *, strict: bool = True, dt: Optional[float] = None
) -> Simulation:
    """
    Turn a scenario into a ready-to-march simulation.

    dt = cfl_number x (smallest unextended fine-region CFL limit), or the
    coarse limit without regions, unless `dt` is given explicitly.

    Args:
        scenario: validated scenario
        strict: check passivity of every region model and the coarse CFL
            limit at dt (disable only to study unstable configurations)
        dt: explicit time step in seconds

    Raises:
        PassivityError: if `strict` and a model or the coarse grid is not
            stable at dt
    """
    scheme = scenario.run.scheme
    effective = _effective(scenario)
    section = effective.grid
    grid = GridSpec.from_section(section)
    materials = rasterize(effective.materials, grid.nx, grid.ny, grid.dx, grid.dy)
    coarse_limit = cfl_limit(grid.dx, grid.dy, materials)

    regions = [fine_region(section, effective, spec) for spec in effective.regions]
    fine_limits = [cfl_limit(f.hx, f.hy, f.materials) for f in regions]
    base_limit = min(fine_limits) if regions else coarse_limit
    if dt is None:
        dt = effective.run.cfl_number * base_limit
    if strict and dt > coarse_limit:
        raise PassivityError(
            f"dt={dt:.6g} exceeds the coarse CFL limit {coarse_limit:.6g}"
        )

    models = []
    for spec, region in zip(effective.regions, regions):
        order, extend_to = _region_plan(scheme, spec, base_limit)
        models.append(
            build_region_model(
                grid,
                materials,
                region,
                dt,
                order=order,
                expansion_hz=spec.expansion_hz,
                extend_to=extend_to,
                margin=spec.margin,
                strict=strict,
                region_id=spec.id,
            )
        )

    sim = Simulation(
        grid,
        materials,
        dt,
        models,
        [source_driver(grid, s) for s in effective.sources],
        [probe_driver(grid, p) for p in effective.probes],
        scheme=scheme,
        name=scenario.name,
    )
    model_limits = [m.model_limit for m in models]
    sim.metadata = {
        "cfl_number": dt / base_limit,
        "coarse_limit": coarse_limit,
        "base_limit": base_limit,
        "scheme_limit": min([coarse_limit, *model_limits]),
        "regions": [m.summary() for m in models],
    }
    logger.info(
        "🧱 Simulation built",
        scheme=scheme,
        grid=f"{grid.nx}x{grid.ny}",
        dt=dt,
        coarse_limit=coarse_limit,
        base_limit=base_limit,
        regions=len(models),
    )
    return sim


def run(scenario: Scenario, *, dt: Optional[float] = None, strict: bool = True) -> RunRecord:
    """
    Build and march a scenario for run.n_steps steps.

    Raises:
        PassivityError: before marching, if a region model is not passive
        InstabilityError: if the NaN sentinel trips
    """
    with LogContext(scenario=scenario.name, scheme=scenario.run.scheme):
        sim = build_simulation(scenario, strict=strict, dt=dt)
        record = sim.march(scenario.run.n_steps)
        logger.info(
            "✅ Run complete",
            steps=record.n_steps,
            dt=record.dt,
            max_abs=record.max_abs(),
            seconds=round(record.metadata["wall_clock_s"], 3),
        )
    return record


def amplification_spectral_radius(
    scenario: Scenario, *, dt: Optional[float] = None, strict: bool = False
) -> float:
    """
    Spectral radius of the complete one-step operator of a scenario
    (coarse grid, PML, every interface and reduced model).

    Raises:
        DimensionError: if the scene has more than max_radius_states states
    """
    with LogContext(scenario=scenario.name, scheme=scenario.run.scheme):
        sim = build_simulation(scenario, strict=strict, dt=dt)
        return spectral_radius(sim)
