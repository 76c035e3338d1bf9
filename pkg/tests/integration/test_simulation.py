"""
Integration tests for complete coupled simulations.

Tests full flow: Scenario → coarse grid + region models → time marching →
probe records, plus the stability instrument on the complete one-step
operator.
"""
import numpy as np
import pytest

from romfdtd.errors import InstabilityError, PassivityError
from romfdtd.fine.fine_system import FineRegionSpec
from romfdtd.grid.materials import MaterialMap
from romfdtd.grid.yee_grid import GridSpec, cfl_limit
from romfdtd.io.scenario_io import load_scenario
from romfdtd.models.records import Spectrum
from romfdtd.models.scenario import HzPointSource, ProbeSpec
from romfdtd.orchestration.postprocess import (
    cavity_resonances,
    frequency_response,
    spectral_peaks,
)
from romfdtd.orchestration.simulator import (
    Simulation,
    amplification_spectral_radius,
    build_region_model,
    build_simulation,
    derive_all_fine,
    derive_coarse_only,
    probe_driver,
    run,
    source_driver,
)
from tests.conftest import SCENARIOS_DIR, build_scenario


def dichotomy_document(**region) -> dict:
    """12 x 12 cavity with a 4 x 4 region refined by 3."""
    spec = {"id": "r", "anchor": [4, 4], "size": [4, 4], "refinement": 3, "mor": False}
    spec.update(region)
    return {
        "name": "dichotomy",
        "grid": {"nx": 12, "ny": 12, "dx": 2e-3, "dy": 2e-3},
        "regions": [spec],
        "sources": [{"id": "s", "kind": "hz_point", "cell": [1, 2], "bandwidth": 1e10}],
        "probes": [{"id": "p", "component": "hz", "cell": [10, 9]}],
        "run": {"n_steps": 10, "cfl_number": 0.99},
    }


def embedded_fields(state, model):
    """Coarse Ex, Ey, Hz with the interior of an r = 1 full-order region filled in."""
    region = model.region
    i0, j0, w, h = region.i0, region.j0, region.width, region.height
    x = model.update.reduced_state(model.z)
    n_ex, n_ey = w * (h + 1), (w + 1) * h
    ex, ey, hz = state.ex.copy(), state.ey.copy(), state.hz.copy()
    ex[i0 : i0 + w, j0 : j0 + h + 1] = x[:n_ex].reshape(h + 1, w).T
    ey[i0 : i0 + w + 1, j0 : j0 + h] = x[n_ex : n_ex + n_ey].reshape(h, w + 1).T
    hz[i0 : i0 + w, j0 : j0 + h] = x[n_ex + n_ey :].reshape(h, w).T
    return ex, ey, hz


@pytest.mark.integration
class TestCoupledEquivalence:
    """Test suite for the coupled update against plain Yee"""

    def test_unrefined_full_order_region_is_plain_yee(self):
        """Test that r = 1 without reduction reproduces the coarse grid exactly"""
        n, d = 20, 2e-3
        grid = GridSpec(nx=n, ny=n, dx=d, dy=d)
        materials = MaterialMap.uniform(n, n)
        dt = 0.99 * cfl_limit(d, d)
        region = FineRegionSpec(
            i0=8, j0=8, width=4, height=4, r=1, dx=d, dy=d, materials=MaterialMap.uniform(4, 4)
        )
        source = source_driver(
            grid, HzPointSource(kind="hz_point", id="s", cell=(3, 4), bandwidth=2e10)
        )
        probes = [
            probe_driver(grid, ProbeSpec(id="far", component="hz", cell=(15, 14))),
            probe_driver(grid, ProbeSpec(id="edge", component="ex", cell=(9, 8))),
        ]
        model = build_region_model(grid, materials, region, dt, region_id="r")

        coupled = Simulation(grid, materials, dt, [model], [source], probes)
        plain = Simulation(grid, materials, dt, [], [source], probes)
        coupled_record = coupled.march(1000)
        plain_record = plain.march(1000)

        expected_fields = (plain.state.ex, plain.state.ey, plain.state.hz)
        for actual, expected in zip(embedded_fields(coupled.state, model), expected_fields):
            np.testing.assert_allclose(
                actual, expected, rtol=0, atol=1e-12 * np.max(np.abs(expected))
            )
        for probe_id in ("far", "edge"):
            expected = plain_record.probe(probe_id)
            np.testing.assert_allclose(
                coupled_record.probe(probe_id), expected, atol=1e-12 * np.max(np.abs(expected))
            )


@pytest.mark.integration
class TestMarching:
    """Test suite for time marching of scenarios"""

    def test_superposition(self, small_document):
        """Test that the response to two sources is the sum of the responses"""
        second = {"id": "s2", "kind": "hz_point", "cell": [8, 1], "bandwidth": 8e9}
        first_only = build_scenario(small_document)
        small_document["sources"] = [second]
        second_only = build_scenario(small_document)
        small_document["sources"] = first_only.model_dump()["sources"] + [second]
        both = build_scenario(small_document)

        a, b, ab = (run(s).probe("p1") for s in (first_only, second_only, both))

        np.testing.assert_allclose(ab, a + b, atol=1e-12 * np.max(np.abs(ab)))

    def test_deterministic(self, small_scenario):
        """Test bit-identical repeated runs"""
        first = run(small_scenario).probe("p1")
        second = run(small_scenario).probe("p1")

        np.testing.assert_array_equal(first, second)

    def test_no_sources_stay_silent(self, small_document):
        """Test that a source-free run records exact zeros"""
        small_document["sources"] = []

        record = run(build_scenario(small_document))

        assert record.max_abs() == 0.0
        assert record.source is None

    def test_metadata(self, small_scenario):
        """Test the run metadata carried by the record"""
        record = run(small_scenario)
        meta = record.metadata

        assert meta["scheme"] == "proposed"
        assert meta["n_steps"] == 60
        assert meta["cfl_number"] == pytest.approx(0.99)
        assert meta["dt"] <= meta["scheme_limit"]
        assert meta["regions"][0]["full_order"] == meta["regions"][0]["order"]
        assert meta["wall_clock_s"] >= 0.0

    def test_reduced_region_runs(self, small_document):
        """Test a reduced region with an expansion point"""
        small_document["regions"][0].update(mor=True, order=30, expansion_hz=5e9)

        record = run(build_scenario(small_document))

        assert record.metadata["regions"][0]["order"] == 30
        assert np.all(np.isfinite(record.probe("p1")))

    def test_all_schemes_build(self, small_document):
        """Test every scheme on the same scene"""
        small_document["regions"][0].update(mor=True, order=30, extension=True)
        for scheme in ("proposed", "mor_only", "extension_only", "coarse", "fine"):
            sim = build_simulation(build_scenario(small_document, scheme=scheme))
            assert sim.scheme == scheme
            sim.march(5)

    def test_instability_sentinel(self, small_document):
        """Test InstabilityError when the coarse grid is driven past its limit"""
        small_document["regions"] = []
        scenario = build_scenario(small_document, n_steps=5000)
        dt = 1.5 * cfl_limit(2e-3, 2e-3)

        with pytest.raises(InstabilityError) as excinfo:
            run(scenario, dt=dt, strict=False)

        assert 0 < excinfo.value.step <= 5000

    def test_strict_rejects_coarse_overshoot(self, small_document):
        """Test PassivityError for dt above the coarse limit in strict mode"""
        small_document["regions"] = []

        with pytest.raises(PassivityError):
            build_simulation(build_scenario(small_document), dt=1.1 * cfl_limit(2e-3, 2e-3))


@pytest.mark.integration
class TestDerivedScenarios:
    """Test suite for the oracle scenarios"""

    def test_all_fine(self, small_scenario):
        """Test grid, sources and probes of the all-fine scenario"""
        fine = derive_all_fine(small_scenario)

        assert (fine.grid.nx, fine.grid.ny) == (20, 20)
        assert fine.grid.dx == pytest.approx(1e-3)
        assert fine.regions == []
        assert fine.sources[0].cell == (2, 4)
        assert fine.sources[0].span == (2, 2)
        assert fine.probes[0].cell == (16, 14)
        assert fine.probes[0].span == (2, 2)

    def test_coarse_only(self, small_scenario):
        """Test that the coarse scenario drops regions and caps the CFL number"""
        coarse = derive_coarse_only(small_scenario)

        assert coarse.regions == []
        assert coarse.grid == small_scenario.grid
        assert coarse.run.cfl_number <= 0.99

    def test_all_fine_matches_refined_run(self, small_document):
        """Test that the proposed run tracks the all-fine oracle"""
        small_document["sources"][0]["bandwidth"] = 5e9
        scenario = build_scenario(small_document, n_steps=300)

        proposed = run(scenario).probe("p1")
        oracle = run(derive_all_fine(scenario)).probe("p1")

        assert proposed.shape == oracle.shape
        assert np.max(np.abs(proposed - oracle)) <= 0.2 * np.max(np.abs(oracle))


@pytest.mark.integration
class TestStabilityDichotomy:
    """Test suite for the spectral radius of the complete one-step operator"""

    def test_full_order_stable_below_fine_limit(self):
        """Test radius 1 at 0.99 x the fine CFL limit"""
        scenario = build_scenario(dichotomy_document())

        assert amplification_spectral_radius(scenario) <= 1.0 + 1e-10

    def test_unstable_above_fine_limit(self):
        """Test radius above 1 at 1.05 x the fine limit without extension"""
        scenario = build_scenario(dichotomy_document())
        base = cfl_limit(2e-3 / 3, 2e-3 / 3)

        assert amplification_spectral_radius(scenario, dt=1.05 * base) > 1.0 + 1e-6

    @pytest.mark.parametrize("factor", [2.0, 3.0])
    @pytest.mark.parametrize("scheme", ["extension_only", "proposed"])
    def test_extension_restores_stability(self, scheme, factor):
        """Test radius 1 at 0.99 x the extended step"""
        document = dichotomy_document(extension=True, extension_factor=factor)
        scenario = build_scenario(document, scheme=scheme, cfl_number=0.99 * factor)

        assert amplification_spectral_radius(scenario) <= 1.0 + 1e-10

    def test_lossy_open_scene_decays(self):
        """Test radius strictly below 1 with PML walls and conductivity everywhere"""
        document = dichotomy_document(anchor=[4, 4], size=[3, 3], refinement=2)
        document["grid"].update(
            boundaries={"south": "pml", "north": "pml", "west": "pml", "east": "pml"},
            pml_depth=2,
        )
        document["materials"] = {"background": {"eps_r": 1.0, "sigma": 1.0}}
        document["probes"] = [{"id": "p", "component": "hz", "cell": [9, 9]}]
        document["sources"][0]["cell"] = [2, 2]

        radius = amplification_spectral_radius(build_scenario(document))

        assert radius < 1.0 - 1e-6


@pytest.mark.integration
@pytest.mark.slow
class TestAnalyticCavity:
    """Test suite comparing a coarse cavity with its analytic modes"""

    def test_lowest_modes(self):
        """Test that a 1 m square cavity resonates at its TE_mn frequencies"""
        document = {
            "name": "meter-cavity",
            "grid": {"nx": 50, "ny": 50, "dx": 0.02, "dy": 0.02},
            "sources": [{"id": "s", "kind": "hz_point", "cell": [6, 13], "bandwidth": 5e8}],
            "probes": [{"id": "p", "component": "hz", "cell": [41, 33]}],
            "run": {"n_steps": 20000, "cfl_number": 0.99, "window": "half-hann"},
        }
        scenario = build_scenario(document)

        record = run(scenario)
        spectrum = frequency_response(record, "p", window="half-hann")
        band = spectrum.freqs >= 1e8
        peaks = spectral_peaks(
            Spectrum(freqs=spectrum.freqs[band], values=spectrum.values[band]),
            prominence=0.02,
        )

        expected = cavity_resonances(1.0, 1.0, 3.5e8)
        assert peaks.size > 0
        assert abs(peaks[0] - expected[0]) <= 0.01 * expected[0]
        for mode in expected:
            assert np.min(np.abs(peaks - mode)) <= 0.01 * mode


@pytest.mark.integration
@pytest.mark.slow
class TestIrisWaveguide:
    """Test suite for the iris waveguide, whose regions sit against the guide walls"""

    @pytest.fixture(scope="class")
    def runs(self):
        scenario = load_scenario(SCENARIOS_DIR / "iris_waveguide.json")
        sim = build_simulation(scenario)
        proposed = sim.march(scenario.run.n_steps)
        return {
            "scenario": scenario,
            "sim": sim,
            "proposed": proposed,
            "fine": run(derive_all_fine(scenario)),
            "coarse": run(derive_coarse_only(scenario), dt=proposed.dt),
        }

    def test_wall_sides_carry_no_ports(self, runs):
        """Test that flush sides are PEC-backed and only the open sides are coupled"""
        sides = {m.id: m.region.coupled_sides for m in runs["sim"].regions}

        assert sides == {"iris": ("west", "east"), "post": ("north", "west", "east")}

    def test_stays_bounded(self, runs):
        """Test finite probes and a decayed tail once the pulse has left the guide"""
        signal = np.abs(runs["proposed"].probe("transmitted"))
        tail = signal[-len(signal) // 10 :]

        assert np.all(np.isfinite(signal))
        assert signal.max() > 0.0
        assert tail.max() <= 0.1 * signal.max()

    def test_transmission_tracks_fine_oracle(self, runs):
        """Test the transmitted spectrum against the all-fine and coarse-only runs"""
        bandwidth = runs["scenario"].sources[0].bandwidth
        spectra = {
            key: frequency_response(runs[key], "transmitted")
            for key in ("proposed", "fine", "coarse")
        }
        freqs = spectra["fine"].freqs
        band = (freqs >= 0.1 * bandwidth) & (freqs <= bandwidth)
        magnitude = {key: np.abs(s.values[band]) for key, s in spectra.items()}

        def error(key):
            return np.linalg.norm(magnitude[key] - magnitude["fine"]) / np.linalg.norm(
                magnitude["fine"]
            )

        assert runs["proposed"].dt == pytest.approx(runs["fine"].dt, rel=1e-12)
        assert error("proposed") <= 0.15
        assert error("proposed") < 0.5 * error("coarse")
