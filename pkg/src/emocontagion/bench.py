"""Global-versus-local cost model and a micro-benchmark of the local estimator.

Global diffusion over ``n = C * M`` users is modeled with compute growing as
``n**2`` and storage as ``n**3``; the local estimator touches each star edge
once, so both of its costs grow as ``C * M``. The unit constants are solved
so that ``C = 50, M = 1461`` lands on 14.60 TB of storage and 4.22 days of
compute.
"""

from __future__ import annotations

import csv
import statistics
import time
import tracemalloc
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Sequence

from .diffusion import estimate_many
from .errors import RangeError
from .ingest import EventLog, extract_star_graph, load, parse_embeddings, parse_event_log, parse_profiles
from .similarity import SimilarityProviders

CALIBRATION_C = 50
CALIBRATION_M = 1461
CALIBRATION_STORAGE_BYTES = 14.60e12
CALIBRATION_COMPUTE_SECONDS = 4.22 * 86400
STORAGE_EXPONENT = 3
COMPUTE_EXPONENT = 2

_N0 = CALIBRATION_C * CALIBRATION_M
UNIT_STORAGE_BYTES = CALIBRATION_STORAGE_BYTES / _N0**STORAGE_EXPONENT
UNIT_COMPUTE_SECONDS = CALIBRATION_COMPUTE_SECONDS / _N0**COMPUTE_EXPONENT


@dataclass(frozen=True)
class CostEstimate:
    C: float
    M: float
    global_storage_bytes: float
    global_compute_seconds: float
    local_storage_bytes: float
    local_compute_seconds: float

    @property
    def n(self) -> float:
        return self.C * self.M

    @property
    def reduction_factor(self) -> float:
        """Global over local compute; equals ``C * M`` under the model."""
        return self.global_compute_seconds / self.local_compute_seconds

    @property
    def storage_reduction_factor(self) -> float:
        return self.global_storage_bytes / self.local_storage_bytes


def cost_model(C: float, M: float, unit_storage: float | None = None, unit_compute: float | None = None) -> CostEstimate:
    for name, value in (("C", C), ("M", M), ("unit_storage", unit_storage), ("unit_compute", unit_compute)):
        if value is not None and not value > 0:
            raise RangeError(f"{name} must be positive, got {value}")
    us = UNIT_STORAGE_BYTES if unit_storage is None else unit_storage
    uc = UNIT_COMPUTE_SECONDS if unit_compute is None else unit_compute
    n = C * M
    return CostEstimate(
        C=C,
        M=M,
        global_storage_bytes=us * n**STORAGE_EXPONENT,
        global_compute_seconds=uc * n**COMPUTE_EXPONENT,
        local_storage_bytes=us * n,
        local_compute_seconds=uc * n,
    )


# -- measured benchmark ------------------------------------------------------

PHASES = ("parse", "extract", "estimate")
BENCH_COLUMNS = ("phase", "repetition", "wall_ms", "peak_mem_bytes")


@dataclass(frozen=True)
class PhaseSample:
    phase: str
    repetition: int
    wall_ms: float
    peak_mem_bytes: int


@dataclass
class BenchReport:
    workers: int
    repetitions: int
    events: int
    centrals: int
    samples: list[PhaseSample] = field(default_factory=list)

    def median(self, phase: str, metric: str = "wall_ms") -> float:
        return statistics.median(getattr(s, metric) for s in self.samples if s.phase == phase)

    def write_csv(self, fh: IO[str]) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BENCH_COLUMNS)
        for s in self.samples:
            writer.writerow((s.phase, s.repetition, f"{s.wall_ms:.3f}", s.peak_mem_bytes))
        for phase in PHASES:
            writer.writerow(
                (phase, "median", f"{self.median(phase):.3f}", int(self.median(phase, "peak_mem_bytes")))
            )


class _Probe:
    """Wall clock plus tracemalloc peak for one phase."""

    def __init__(self, trace_memory: bool):
        self.trace_memory = trace_memory

    def __enter__(self):
        if self.trace_memory:
            tracemalloc.start()
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.wall_ms = 1000.0 * (time.perf_counter() - self.t0)
        self.peak = 0
        if self.trace_memory:
            self.peak = tracemalloc.get_traced_memory()[1]
            tracemalloc.stop()
        return False


def run_local_bench(
    events: str | Path,
    profiles: str | Path,
    embeddings: str | Path,
    repetitions: int = 3,
    workers: int = 1,
    centrals: Sequence[str] | None = None,
    window=None,
    topics=None,
    trace_memory: bool = True,
) -> BenchReport:
    """Time parse, extract and estimate over ``repetitions`` runs.

    Peak memory is the tracemalloc peak of this process, so with
    ``workers > 1`` the estimate phase excludes the worker processes.
    """
    if repetitions < 1:
        raise RangeError("repetitions must be >= 1")
    report = None
    for rep in range(repetitions):
        with _Probe(trace_memory) as p_parse:
            log = load(events, parse_event_log, window=window, topics=topics)
            providers = SimilarityProviders(load(profiles, parse_profiles), load(embeddings, parse_embeddings))
        ids = list(centrals) if centrals is not None else list(log.actors)
        with _Probe(trace_memory) as p_extract:
            for c in ids:
                extract_star_graph(log, c)
        with _Probe(trace_memory) as p_estimate:
            estimate_many(log, ids, providers, workers=workers)
        if report is None:
            report = BenchReport(workers, repetitions, len(log), len(ids))
        for phase, probe in zip(PHASES, (p_parse, p_extract, p_estimate)):
            report.samples.append(PhaseSample(phase, rep, probe.wall_ms, probe.peak))
    return report


def time_estimate(log: EventLog, centrals: Sequence[str], providers: SimilarityProviders) -> float:
    """Seconds to estimate ``centrals`` serially (extraction included)."""
    t0 = time.perf_counter()
    estimate_many(log, centrals, providers)
    return time.perf_counter() - t0
