"""
Unit tests for scenario parsing.

Every rejected document must surface as a ScenarioParseError carrying a
diagnostic code; nothing else may escape the parser.
"""
import json

import numpy as np
import pytest

from romfdtd.errors import ScenarioParseError
from romfdtd.io.scenario_io import load_scenario, parse_scenario, serialize_scenario
from romfdtd.models.scenario import Scenario, pec_backed_sides
from tests.conftest import SCENARIOS_DIR


def parse_error(document) -> ScenarioParseError:
    text = document if isinstance(document, (str, bytes)) else json.dumps(document)
    with pytest.raises(ScenarioParseError) as excinfo:
        parse_scenario(text)
    return excinfo.value


class TestParseScenario:
    """Test suite for accepted documents"""

    def test_defaults_applied(self, small_document):
        """Test default values of optional fields"""
        scenario = parse_scenario(json.dumps(small_document))

        region = scenario.regions[0]
        assert region.extension is False
        assert region.extension_factor == 2.0
        assert region.margin == 1e-6
        assert region.expansion_hz is None
        assert scenario.run.scheme == "proposed"
        assert scenario.run.window == "none"
        assert scenario.grid.boundaries.north == "pec"
        assert scenario.materials.background == "vacuum"
        assert scenario.sources[0].delay is None

    def test_round_trip(self, small_document):
        """Test parse(serialize(s)) == s"""
        scenario = parse_scenario(json.dumps(small_document))

        assert parse_scenario(serialize_scenario(scenario)) == scenario

    def test_bytes_accepted(self, small_document):
        """Test UTF-8 bytes input"""
        scenario = parse_scenario(json.dumps(small_document).encode("utf-8"))

        assert scenario.name == "unit-cavity"

    def test_scenario_directory_populated(self, scenarios_dir):
        """Test that the repository ships its scenario documents"""
        names = {path.stem for path in scenarios_dir.glob("*.json")}

        assert {"cavity", "four_rods", "four_rods_empty", "iris_waveguide"} <= names

    @pytest.mark.parametrize(
        "path", sorted(SCENARIOS_DIR.glob("*.json")), ids=lambda path: path.stem
    )
    def test_shipped_scenario_loads(self, path):
        """Test that a scenario file in the repository is valid"""
        assert isinstance(load_scenario(path), Scenario)

    def test_iris_regions_are_wall_backed(self, scenarios_dir):
        """Test the PEC-backed sides of both iris waveguide regions"""
        scenario = load_scenario(scenarios_dir / "iris_waveguide.json")

        sides = {r.id: pec_backed_sides(scenario.grid, r) for r in scenario.regions}

        assert sides == {"iris": {"south", "north"}, "post": {"south"}}

    def test_huge_spans_checked_by_extent(self, small_document):
        """Test that spans far larger than any loop could visit parse at once"""
        n = 10**9
        small_document["grid"].update(nx=n, ny=n)
        small_document["sources"][0].update(cell=[10, 0], span=[n // 2, n // 2])
        small_document["probes"] = [
            {"id": "wide", "component": "ex", "cell": [0, 10], "span": [n, 1]},
            {"id": "tall", "component": "ey", "cell": [0, 0], "span": [1, n]},
        ]

        scenario = parse_scenario(json.dumps(small_document))

        assert scenario.sources[0].span == (n // 2, n // 2)

    @pytest.mark.parametrize(
        "component, cell, accepted",
        [
            ("hz", [6, 4], True),
            ("hz", [5, 5], False),
            ("ex", [4, 6], False),
            ("ex", [4, 7], True),
            ("ey", [6, 4], False),
            ("ey", [7, 4], True),
        ],
    )
    def test_probe_footprint_includes_interface_edges(
        self, small_document, component, cell, accepted
    ):
        """Test the staggered footprint of a region for each probe component"""
        small_document["probes"] = [{"id": "p", "component": component, "cell": cell}]

        if accepted:
            assert parse_scenario(json.dumps(small_document)).probes[0].cell == tuple(cell)
        else:
            assert parse_error(small_document).code == "E_INVARIANT"

    def test_flush_region_sides_are_pec_backed(self, small_document):
        """Test that a region against the wall gets PEC-backed sides"""
        small_document["regions"][0]["anchor"] = [0, 4]
        small_document["sources"][0]["cell"] = [7, 2]
        scenario = parse_scenario(json.dumps(small_document))

        assert pec_backed_sides(scenario.grid, scenario.regions[0]) == frozenset({"west"})


class TestParseErrors:
    """Test suite for diagnostic codes"""

    def test_malformed_json(self):
        """Test E_SYNTAX with a line number"""
        error = parse_error("{")

        assert error.code == "E_SYNTAX"
        assert error.line == 1

    def test_invalid_utf8(self):
        """Test E_SYNTAX for undecodable bytes"""
        assert parse_error(b"\xff").code == "E_SYNTAX"

    def test_deep_nesting(self):
        """Test E_SYNTAX rather than a crash for pathological nesting"""
        assert parse_error("[" * 100_000 + "]" * 100_000).code == "E_SYNTAX"

    def test_top_level_array(self):
        """Test E_INVALID_VALUE for a non-object document"""
        assert parse_error("[]").code == "E_INVALID_VALUE"

    def test_unknown_key(self, small_document):
        """Test E_UNKNOWN_KEY with its location"""
        small_document["grid"]["nz"] = 4

        error = parse_error(small_document)

        assert error.code == "E_UNKNOWN_KEY"
        assert error.location == "grid.nz"

    def test_missing_grid(self, small_document):
        """Test E_MISSING_FIELD for a missing section"""
        del small_document["grid"]

        assert parse_error(small_document).code == "E_MISSING_FIELD"

    def test_missing_source_kind(self, small_document):
        """Test E_MISSING_FIELD for a source without a kind"""
        del small_document["sources"][0]["kind"]

        assert parse_error(small_document).code == "E_MISSING_FIELD"

    def test_negative_cell_count(self, small_document):
        """Test E_INVALID_VALUE for nx = -1"""
        small_document["grid"]["nx"] = -1

        assert parse_error(small_document).code == "E_INVALID_VALUE"

    def test_nan_rejected(self, small_document):
        """Test E_INVALID_VALUE for a NaN cell size"""
        text = json.dumps(small_document).replace('"dx": 0.002', '"dx": NaN')

        assert parse_error(text).code == "E_INVALID_VALUE"

    def test_unit_refinement(self, small_document):
        """Test E_INVARIANT for refinement 1"""
        small_document["regions"][0]["refinement"] = 1

        assert parse_error(small_document).code == "E_INVARIANT"

    def test_mor_without_order(self, small_document):
        """Test E_INVARIANT when a reduced region has no order"""
        small_document["regions"][0]["mor"] = True

        assert parse_error(small_document).code == "E_INVARIANT"

    def test_region_outside_grid(self, small_document):
        """Test E_INVARIANT for a region past the grid edge"""
        small_document["regions"][0]["anchor"] = [9, 4]

        assert parse_error(small_document).code == "E_INVARIANT"

    def test_touching_regions(self, small_document):
        """Test E_INVARIANT for regions sharing a boundary"""
        small_document["regions"].append(
            {"id": "r2", "anchor": [6, 4], "size": [2, 2], "refinement": 2, "mor": False}
        )

        assert parse_error(small_document).code == "E_INVARIANT"

    def test_source_inside_region(self, small_document):
        """Test E_INVARIANT for a source in a fine region"""
        small_document["sources"][0]["cell"] = [4, 5]

        assert parse_error(small_document).code == "E_INVARIANT"

    def test_cfl_above_scheme_limit(self, small_document):
        """Test E_INVARIANT for cfl_number > 1 without extension"""
        small_document["run"]["cfl_number"] = 1.5

        assert parse_error(small_document).code == "E_INVARIANT"

    def test_extension_allows_larger_cfl(self, small_document):
        """Test that an extended region admits cfl_number up to its factor"""
        small_document["regions"][0].update(extension=True, extension_factor=3.0)
        small_document["run"]["cfl_number"] = 2.5

        assert parse_scenario(json.dumps(small_document)).run.cfl_number == 2.5

    @pytest.mark.parametrize("scheme", ["mor_only", "coarse", "fine"])
    def test_cfl_above_one_for_unextended_schemes(self, small_document, scheme):
        """Test E_INVARIANT for cfl_number > 1 on schemes without extension"""
        small_document["regions"][0].update(mor=True, order=20, extension=True)
        small_document["run"].update(scheme=scheme, cfl_number=1.5)

        assert parse_error(small_document).code == "E_INVARIANT"

    @pytest.mark.parametrize("cfl_number, accepted", [(1.9, True), (2.5, False)])
    def test_extension_only_bounded_by_factor(self, small_document, cfl_number, accepted):
        """Test that extension_only admits cfl_number up to the extension factor"""
        small_document["run"].update(scheme="extension_only", cfl_number=cfl_number)

        if accepted:
            assert parse_scenario(json.dumps(small_document)).run.cfl_number == cfl_number
        else:
            assert parse_error(small_document).code == "E_INVARIANT"

    def test_region_covering_grid(self, small_document):
        """Test E_INVARIANT for a region with no coupled side"""
        small_document["regions"][0].update(anchor=[0, 0], size=[10, 10])

        error = parse_error(small_document)

        assert error.code == "E_INVARIANT"
        assert "whole grid" in str(error)

    def test_mutated_documents_only_raise_parse_errors(self, small_document, rng):
        """Test random single-character mutations of a valid document"""
        text = json.dumps(small_document)
        alphabet = list('0123456789-.,:{}[]"ae ')

        for _ in range(500):
            position = int(rng.integers(len(text)))
            if rng.random() < 0.5:
                mutated = text[:position] + text[position + 1:]
            else:
                mutated = text[:position] + str(rng.choice(alphabet)) + text[position + 1:]
            try:
                parse_scenario(mutated)
            except ScenarioParseError as exc:
                assert exc.code.startswith("E_")

    def test_random_bytes_only_raise_parse_errors(self, rng):
        """Test random byte strings"""
        for _ in range(200):
            blob = rng.integers(0, 256, size=int(rng.integers(0, 64)), dtype=np.uint8)
            with pytest.raises(ScenarioParseError):
                parse_scenario(blob.tobytes())
