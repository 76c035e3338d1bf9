"""Scenario parsing and result files."""

from .matrix_io import dump_coo, load_coo
from .records_io import read_records, read_spectrum, write_records, write_spectrum
from .scenario_io import load_scenario, parse_scenario, serialize_scenario

__all__ = [
    "dump_coo",
    "load_coo",
    "load_scenario",
    "parse_scenario",
    "read_records",
    "read_spectrum",
    "serialize_scenario",
    "write_records",
    "write_spectrum",
]
