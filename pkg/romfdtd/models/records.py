"""
Run outputs: probe time series and spectra.
"""
from dataclasses import dataclass, field
from typing import Any, Literal, Optional

import numpy as np


@dataclass
class RunRecord:
    """
    Probe series of one run.

    times[n] is the time after step n, so every series has n_steps entries.
    `source` holds the normalized source waveform at the half steps where it
    was injected; it is None for records read back from CSV.
    """

    dt: float
    times: np.ndarray
    probes: dict[str, np.ndarray]
    source: Optional[np.ndarray] = None
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return int(self.times.shape[0])

    @property
    def probe_ids(self) -> list[str]:
        return list(self.probes)

    def probe(self, probe_id: Optional[str] = None) -> np.ndarray:
        """Series of the given probe, or of the only/first probe."""
        if probe_id is None:
            if not self.probes:
                raise KeyError("record has no probes")
            probe_id = next(iter(self.probes))
        return self.probes[probe_id]

    def max_abs(self) -> float:
        if not self.probes or self.n_steps == 0:
            return 0.0
        return max(float(np.max(np.abs(series))) for series in self.probes.values())


@dataclass
class Spectrum:
    """Complex response or power ratio on a uniform frequency grid."""

    freqs: np.ndarray
    values: np.ndarray
    kind: Literal["complex", "db"] = "complex"
    label: str = ""

    def magnitude(self) -> np.ndarray:
        if self.kind == "db":
            return 10.0 ** (self.values / 20.0)
        return np.abs(self.values)
