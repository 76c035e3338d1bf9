"""
Pytest configuration and fixtures for all tests.

This file loads .env.test (when present) before any solver import so that
ROMFDTD_* settings used by the tests are in place, and provides small
regions and scenario documents shared across the suites.
"""
import copy
import sys
from pathlib import Path

import numpy as np
import pytest
from dotenv import load_dotenv

# Add project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

# Load test environment variables BEFORE any solver imports
env_test_path = project_root / ".env.test"
if env_test_path.exists():
    load_dotenv(env_test_path, override=True)

from romfdtd.config import EPS0, MU0  # noqa: E402
from romfdtd.fine.fine_system import FineRegionSpec  # noqa: E402
from romfdtd.grid.materials import MaterialMap  # noqa: E402
from romfdtd.models.scenario import Scenario  # noqa: E402
from romfdtd.monitoring import clear_run_context, configure_logging  # noqa: E402

SCENARIOS_DIR = project_root / "scenarios"


@pytest.fixture(scope="session", autouse=True)
def setup_test_environment():
    """
    Quiet logging for the whole session.
    This fixture runs once per test session.
    """
    configure_logging("WARNING")
    yield
    clear_run_context()


@pytest.fixture
def scenarios_dir() -> Path:
    return SCENARIOS_DIR


@pytest.fixture
def rng():
    """Seeded generator so randomized properties are reproducible."""
    return np.random.default_rng(20240611)


def build_region(
    width=2,
    height=2,
    r=2,
    dx=2e-3,
    dy=2e-3,
    i0=3,
    j0=3,
    eps_r=1.0,
    sigma=0.0,
    mu_r=1.0,
    pec_sides=frozenset(),
) -> FineRegionSpec:
    """Uniform fine region on an otherwise arbitrary coarse anchor."""
    materials = MaterialMap.uniform(width * r, height * r, eps_r=eps_r, sigma=sigma, mu_r=mu_r)
    return FineRegionSpec(
        i0=i0, j0=j0, width=width, height=height, r=r, dx=dx, dy=dy,
        materials=materials, pec_sides=frozenset(pec_sides),
    )


def build_random_region(rng, width=2, height=2, r=2, dx=2e-3, dy=2e-3, lossy=True, **kwargs):
    """Fine region with random cell materials (eps_r in [1, 5), mu_r in [1, 3))."""
    shape = (width * r, height * r)
    materials = MaterialMap.from_cells(
        EPS0 * rng.uniform(1.0, 5.0, shape),
        rng.uniform(0.0, 0.5, shape) if lossy else np.zeros(shape),
        MU0 * rng.uniform(1.0, 3.0, shape),
    )
    return FineRegionSpec(
        i0=kwargs.get("i0", 3), j0=kwargs.get("j0", 3), width=width, height=height, r=r,
        dx=dx, dy=dy, materials=materials, pec_sides=frozenset(kwargs.get("pec_sides", ())),
    )


@pytest.fixture
def make_region():
    """Factory fixture for uniform fine regions (see build_region)."""
    return build_region


@pytest.fixture
def make_random_region():
    return build_random_region


SMALL_DOCUMENT = {
    "name": "unit-cavity",
    "grid": {"nx": 10, "ny": 10, "dx": 2e-3, "dy": 2e-3},
    "regions": [
        {"id": "r1", "anchor": [4, 4], "size": [2, 2], "refinement": 2, "mor": False}
    ],
    "sources": [
        {"id": "src", "kind": "hz_point", "cell": [1, 2], "bandwidth": 1e10}
    ],
    "probes": [{"id": "p1", "component": "hz", "cell": [8, 7]}],
    "run": {"n_steps": 60, "cfl_number": 0.99},
}


@pytest.fixture
def small_document() -> dict:
    """A 10x10 cavity with one full-order 2x2 region refined by 2."""
    return copy.deepcopy(SMALL_DOCUMENT)


def build_scenario(document: dict, **run_overrides) -> Scenario:
    document = copy.deepcopy(document)
    document["run"].update(run_overrides)
    return Scenario.model_validate(document)


@pytest.fixture
def small_scenario(small_document) -> Scenario:
    return build_scenario(small_document)
