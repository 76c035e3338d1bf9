"""
Prometheus metrics for solver runs.
Tracks marched steps, passivity checks, ROM assembly and clipping.
"""
from prometheus_client import CollectorRegistry, Counter, Histogram, generate_latest

registry = CollectorRegistry()

# ============ TIME MARCHING ============

STEPS_TOTAL = Counter(
    "romfdtd_steps_total",
    "Total coupled time steps marched",
    ["scheme"],
    registry=registry,
)

RUN_DURATION = Histogram(
    "romfdtd_run_duration_seconds",
    "Wall-clock duration of complete runs",
    ["scheme"],
    registry=registry,
    buckets=(0.1, 1.0, 5.0, 30.0, 120.0, 600.0, 3600.0),
)

INSTABILITIES = Counter(
    "romfdtd_instabilities_total",
    "Runs aborted by the NaN sentinel",
    registry=registry,
)

# ============ MODEL ASSEMBLY ============

PASSIVITY_CHECKS = Counter(
    "romfdtd_passivity_checks_total",
    "Passivity checks performed",
    ["outcome"],  # pass, fail
    registry=registry,
)

ROM_ASSEMBLY_SECONDS = Histogram(
    "romfdtd_rom_assembly_seconds",
    "Time to assemble, reduce and couple one fine region",
    registry=registry,
    buckets=(0.01, 0.1, 1.0, 10.0, 60.0, 300.0),
)

CLIPPED_SINGULAR_VALUES = Counter(
    "romfdtd_clipped_singular_values_total",
    "Generalized singular values clipped by CFL extension",
    registry=registry,
)


def render_metrics() -> str:
    """Return the text exposition of all solver metrics."""
    return generate_latest(registry).decode("utf-8")
