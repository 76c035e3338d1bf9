"""
Spectral post-processing of run records.

All spectra share one frequency grid: get_settings().dft_bins points over
[0, DFT_BAND_FACTOR x source bandwidth], endpoints included, evaluated
with the chirp-z zoom FFT so the band is resolved independently of the
run length.
"""
from typing import Optional

import numpy as np
from scipy import constants
from scipy.signal import find_peaks, zoom_fft
from scipy.signal.windows import hann

from romfdtd.config import get_settings
from romfdtd.config.solver_config import DFT_BAND_FACTOR
from romfdtd.models.records import RunRecord, Spectrum
from romfdtd.monitoring import get_logger

logger = get_logger(__name__)

WINDOWS = ("none", "half-hann")


def _band(record: RunRecord, bandwidth: Optional[float], n_bins: Optional[int]):
    bandwidth = bandwidth or record.metadata.get("bandwidth")
    if not bandwidth or bandwidth <= 0:
        raise ValueError("source bandwidth unknown: pass bandwidth explicitly")
    n_bins = n_bins or get_settings().dft_bins
    f_max = DFT_BAND_FACTOR * bandwidth
    return np.linspace(0.0, f_max, n_bins), f_max, n_bins


def _dft(series: np.ndarray, dt: float, f_max: float, n_bins: int) -> np.ndarray:
    return zoom_fft(series, [0.0, f_max], m=n_bins, fs=1.0 / dt, endpoint=True)


def decay_window(n: int) -> np.ndarray:
    """Falling half of a Hann window: 1 at the first sample, 0 past the last."""
    return hann(2 * n + 1)[n:-1] if n else np.zeros(0)


def frequency_response(
    record: RunRecord,
    probe_id: Optional[str] = None,
    *,
    bandwidth: Optional[float] = None,
    n_bins: Optional[int] = None,
    window: str = "none",
) -> Spectrum:
    """
    Probe spectrum divided by source spectrum.

    The source is sampled at half steps and the probes at whole steps; the
    half-step delay is removed from the ratio.

    Args:
        record: run output carrying the source waveform
        probe_id: probe to transform (first probe when None)
        bandwidth: source bandwidth in Hz (record metadata when None)
        n_bins: number of frequency points (SolverSettings.dft_bins when None)
        window: "none" or "half-hann" (applied to the probe series only)

    Raises:
        ValueError: if the record carries no source, the window is unknown,
            or the source spectrum vanishes in the band
    """
    if window not in WINDOWS:
        raise ValueError(f"unknown window {window!r}")
    if record.source is None:
        raise ValueError("record carries no source waveform")
    freqs, f_max, n_bins = _band(record, bandwidth, n_bins)

    probe = np.asarray(record.probe(probe_id), dtype=float)
    if window == "half-hann":
        probe = probe * decay_window(probe.size)
    source_spectrum = _dft(np.asarray(record.source, dtype=float), record.dt, f_max, n_bins)
    if np.min(np.abs(source_spectrum)) <= np.finfo(float).tiny:
        raise ValueError("source spectrum vanishes inside the band")

    shift = np.exp(-1j * np.pi * freqs * record.dt)
    values = _dft(probe, record.dt, f_max, n_bins) / source_spectrum * shift
    return Spectrum(freqs=freqs, values=values, kind="complex", label=probe_id or "")


def reflection_spectrum(
    with_obj: RunRecord,
    reference: RunRecord,
    probe_id: Optional[str] = None,
    *,
    bandwidth: Optional[float] = None,
    n_bins: Optional[int] = None,
) -> Spectrum:
    """
    Reflected over incident power in dB, 10 log10(|DFT(with - ref)|^2 / |DFT(ref)|^2).

    Identical runs give -inf.

    Raises:
        ValueError: if the runs differ in dt, length or probes
    """
    if (
        with_obj.n_steps != reference.n_steps
        or not np.isclose(with_obj.dt, reference.dt, rtol=1e-12, atol=0.0)
        or with_obj.probe_ids != reference.probe_ids
    ):
        raise ValueError("mismatched run parameters between object and reference runs")
    freqs, f_max, n_bins = _band(reference, bandwidth, n_bins)

    incident = np.asarray(reference.probe(probe_id), dtype=float)
    reflected = np.asarray(with_obj.probe(probe_id), dtype=float) - incident
    incident_power = np.abs(_dft(incident, reference.dt, f_max, n_bins)) ** 2
    if np.min(incident_power) <= np.finfo(float).tiny:
        raise ValueError("incident spectrum vanishes inside the band")
    reflected_power = np.abs(_dft(reflected, reference.dt, f_max, n_bins)) ** 2
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(reflected_power / incident_power)
    return Spectrum(freqs=freqs, values=db, kind="db", label=probe_id or "")


def spectral_peaks(
    spectrum: Spectrum,
    *,
    f_min: float = 0.0,
    prominence: float = 0.05,
    max_peaks: Optional[int] = None,
) -> np.ndarray:
    """
    Peak frequencies of |spectrum|, refined by a parabola through each
    peak and its neighbours.

    Args:
        spectrum: complex or dB spectrum
        f_min: discard peaks below this frequency (Hz)
        prominence: minimum prominence relative to the largest magnitude
        max_peaks: keep only the most prominent peaks

    Returns:
        ascending peak frequencies in Hz
    """
    magnitude = spectrum.magnitude()
    finite = np.where(np.isfinite(magnitude), magnitude, 0.0)
    top = float(np.max(finite)) if finite.size else 0.0
    if top == 0.0:
        return np.zeros(0)
    index, props = find_peaks(finite, prominence=prominence * top)
    if max_peaks is not None and index.size > max_peaks:
        keep = np.argsort(props["prominences"])[::-1][:max_peaks]
        index = np.sort(index[keep])

    df = spectrum.freqs[1] - spectrum.freqs[0]
    a, b, c = finite[index - 1], finite[index], finite[index + 1]
    curvature = a - 2.0 * b + c
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(curvature != 0.0, 0.5 * (a - c) / curvature, 0.0)
    peaks = spectrum.freqs[index] + np.clip(delta, -0.5, 0.5) * df
    return peaks[peaks >= f_min]


def cavity_resonances(
    a: float, b: float, f_max: float, eps_r: float = 1.0, mu_r: float = 1.0
) -> np.ndarray:
    """
    TE_mn resonances (c/2) sqrt((m/a)^2 + (n/b)^2) of an a x b PEC cavity
    up to f_max, (m, n) != (0, 0), ascending without duplicates.
    """
    if a <= 0 or b <= 0:
        raise ValueError("cavity dimensions must be positive")
    speed = constants.c / np.sqrt(eps_r * mu_r)
    m_max = int(np.floor(2.0 * f_max * a / speed))
    n_max = int(np.floor(2.0 * f_max * b / speed))
    m, n = np.meshgrid(np.arange(m_max + 1), np.arange(n_max + 1), indexing="ij")
    freqs = 0.5 * speed * np.sqrt((m / a) ** 2 + (n / b) ** 2)
    freqs = freqs[(m + n > 0) & (freqs <= f_max)]
    return np.unique(freqs)
