"""
CSV output of run records and spectra.

Floats are written with 17 significant digits so a file read back
reproduces every value exactly. Formatting goes through printf-style
conversions, which ignore the process locale.
"""
import warnings
from pathlib import Path
from typing import IO, Union

import numpy as np

from romfdtd.errors import RecordIOError
from romfdtd.models.records import RunRecord, Spectrum
from romfdtd.monitoring import get_logger

logger = get_logger(__name__)

FLOAT_FORMAT = "%.17g"

Target = Union[str, Path, IO[str]]


def _save(target: Target, data: np.ndarray, fmt: list[str], header: str) -> None:
    try:
        np.savetxt(target, data, fmt=fmt, delimiter=",", header=header, comments="")
    except OSError as exc:
        raise RecordIOError(f"cannot write {target}: {exc}") from exc


def write_records(record: RunRecord, path: Target) -> None:
    """
    CSV with header `step,time_s,<probe ids>` and one row per step.

    Raises:
        RecordIOError: on I/O failure
    """
    ids = record.probe_ids
    header = ",".join(["step", "time_s", *ids])
    n = record.n_steps
    steps = np.rint(record.times / record.dt) if n else np.zeros(0)
    columns = [steps, record.times, *(record.probes[i] for i in ids)]
    data = np.column_stack(columns) if n else np.zeros((0, len(columns)))
    _save(path, data, ["%d", FLOAT_FORMAT] + [FLOAT_FORMAT] * len(ids), header)
    logger.debug("Records written", path=str(path), steps=n, probes=len(ids))


def read_records(path: Union[str, Path]) -> RunRecord:
    """
    Read a file written by write_records.

    dt is recovered from the first row (NaN for an empty file); the source
    waveform is not stored and comes back as None.

    Raises:
        RecordIOError: if the file is missing or malformed
    """
    try:
        with open(path, encoding="utf-8") as handle:
            header = handle.readline().strip()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)  # header-only files
                data = np.loadtxt(handle, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise RecordIOError(f"cannot read {path}: {exc}") from exc

    names = header.split(",")
    if names[:2] != ["step", "time_s"]:
        raise RecordIOError(f"{path}: unexpected header {header!r}")
    ids = names[2:]
    if data.size == 0:
        data = np.zeros((0, len(names)))
    if data.shape[1] != len(names):
        raise RecordIOError(f"{path}: {data.shape[1]} columns for {len(names)} header fields")

    steps, times = data[:, 0], data[:, 1]
    dt = float(times[0] / steps[0]) if len(times) and steps[0] else float("nan")
    return RunRecord(
        dt=dt,
        times=times.copy(),
        probes={probe_id: data[:, 2 + k].copy() for k, probe_id in enumerate(ids)},
    )


def write_spectrum(spectrum: Spectrum, path: Target) -> None:
    """`freq_hz,re,im` for complex spectra, `freq_hz,db` for power ratios."""
    if spectrum.kind == "db":
        data = np.column_stack([spectrum.freqs, spectrum.values])
        header = "freq_hz,db"
    else:
        values = np.asarray(spectrum.values, dtype=complex)
        data = np.column_stack([spectrum.freqs, values.real, values.imag])
        header = "freq_hz,re,im"
    _save(path, data, [FLOAT_FORMAT] * data.shape[1], header)


def read_spectrum(path: Union[str, Path]) -> Spectrum:
    try:
        with open(path, encoding="utf-8") as handle:
            header = handle.readline().strip()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)  # header-only files
                data = np.loadtxt(handle, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise RecordIOError(f"cannot read {path}: {exc}") from exc
    if header == "freq_hz,db":
        return Spectrum(freqs=data[:, 0].copy(), values=data[:, 1].copy(), kind="db")
    if header == "freq_hz,re,im":
        return Spectrum(freqs=data[:, 0].copy(), values=data[:, 1] + 1j * data[:, 2])
    raise RecordIOError(f"{path}: unexpected header {header!r}")
