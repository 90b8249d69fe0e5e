"""Quantitative reports over kernel runs: transactions, op counts, chi-square.

The sweep mirrors the measurement protocol the kernels were built for
(eight topic counts, one full draw phase per kernel) but replaces
wall-clock claims with structural metrics: wall_ms is reported, never
asserted.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats as _scipy_stats

from . import rng as _rng
from .kernels import SeededStops, build_block_tables, butterfly_search, draw_z
from .lda import Corpus, ModelParams
from .rng import Xoshiro256StarStar
from .sampling import alias_draw, build_alias_vose, build_prefix, draw
from .warp import Trace, WarpConfig


class DegenerateBinsError(ValueError):
    """chi_square needs at least two bins with positive expectations."""


def chi_square(observed, expected) -> tuple[float, int]:
    """Pearson statistic and degrees of freedom (bins - 1).

    observed are counts; expected are probabilities summing to 1.
    """
    obs = np.asarray(observed, dtype=np.float64)
    exp = np.asarray(expected, dtype=np.float64)
    if obs.shape != exp.shape or obs.ndim != 1 or obs.size < 2:
        raise DegenerateBinsError("need matching 1-D bins, at least two")
    if np.any(exp <= 0):
        raise DegenerateBinsError("expected probabilities must be positive")
    if not np.isclose(exp.sum(), 1.0, rtol=0, atol=1e-9):
        raise DegenerateBinsError("expected probabilities must sum to 1")
    n = obs.sum()
    stat = float(np.sum((obs - exp * n) ** 2 / (exp * n)))
    return stat, obs.size - 1


def chi_square_critical(dof: int, significance: float = 0.001) -> float:
    """Critical value the statistic must stay below."""
    return float(_scipy_stats.chi2.ppf(1.0 - significance, dof))


# --- trace aggregation ---


@dataclass
class ArrayStats:
    accesses: int = 0
    transactions: int = 0
    scattered: int = 0


@dataclass
class TraceReport:
    """Per-(space, array) access totals plus warp op counters."""

    arrays: dict
    shuffles: int
    shuffle_xors: int
    adds: int

    @classmethod
    def from_trace(cls, trace: Trace, phase: str | None = None) -> "TraceReport":
        arrays: dict[tuple[str, str], ArrayStats] = {}
        for ev in trace.events:
            if phase is not None and ev.phase != phase:
                continue
            entry = arrays.setdefault((ev.space, ev.array), ArrayStats())
            entry.accesses += 1
            entry.transactions += ev.transactions
            if ev.transactions > 1:
                entry.scattered += 1
        return cls(
            arrays=arrays,
            shuffles=trace.op_total("shuffle", phase),
            shuffle_xors=trace.op_total("shuffle_xor", phase),
            adds=trace.op_total("add", phase),
        )

    def space_transactions(self, space: str) -> int:
        return sum(s.transactions for (sp, _), s in self.arrays.items() if sp == space)


def scattered_local_reads(trace: Trace, phase: str = "table_build") -> int:
    """Local-space read events touching more than one line in the phase."""
    return sum(
        1
        for ev in trace.events
        if ev.space == "local"
        and ev.kind == "read"
        and ev.transactions > 1
        and ev.phase == phase
    )


def total_transactions(trace: Trace, space: str, phase: str | None = None) -> int:
    return sum(
        ev.transactions
        for ev in trace.events
        if ev.space == space and (phase is None or ev.phase == phase)
    )


# --- bulk samplers (one weight vector, many draws) ---


def sample_binary(weights, n: int, seed: int) -> np.ndarray:
    table = build_prefix(weights)
    gen = Xoshiro256StarStar(_rng.derive_seed(seed, 4))
    return np.fromiter((draw(table, gen) for _ in range(n)), dtype=np.int64, count=n)


def sample_alias(weights, n: int, seed: int) -> np.ndarray:
    table = build_alias_vose(weights)
    gen = Xoshiro256StarStar(_rng.derive_seed(seed, 5))
    return np.fromiter((alias_draw(table, gen) for _ in range(n)), dtype=np.int64, count=n)


def sample_butterfly(weights, n: int, seed: int, lanes: int = 8) -> np.ndarray:
    """Draw through the butterfly table and search, batched across warps.

    The table is built once (every lane holds the same weights); searches
    run with one hashed unit value per draw.
    """
    w = np.asarray(weights, dtype=np.float64)
    if n <= 0:
        return np.zeros(0, dtype=np.int64)
    config = WarpConfig(lanes=lanes)
    products = np.broadcast_to(w, (1, lanes, w.size)).copy()
    warp, p, sums = build_block_tables(products, config)
    rows = -(-n // lanes)
    draw_ids = np.arange(rows * lanes).reshape(rows, lanes)
    units = _rng.units_for(_rng.derive_seed(seed, 6), draw_ids)
    stops = (sums * units).astype(np.float64)
    stops = np.minimum(stops, np.nextafter(sums, np.zeros_like(sums)))
    idx = butterfly_search(warp, p, np.broadcast_to(sums, stops.shape), stops)
    return np.asarray(idx).reshape(-1)[:n].astype(np.int64)


SAMPLERS = {
    "binary": sample_binary,
    "alias": sample_alias,
    "butterfly": sample_butterfly,
}


# --- kernel sweeps ---

SWEEP_SCHEMA = "sweep-v1"
SWEEP_COLUMNS = [
    "kernel",
    "K",
    "global_txn",
    "local_txn",
    "scattered_local",
    "shuffles",
    "adds",
    "draws",
    "wall_ms",
]
DEFAULT_K_SWEEP = (16, 48, 80, 112, 144, 176, 208, 240)


@dataclass
class SweepRow:
    kernel: str
    K: int
    global_txn: int
    local_txn: int
    scattered_local: int
    shuffles: int
    adds: int
    draws: int
    wall_ms: float


def synth_params(n_docs: int, vocab_size: int, n_topics: int, seed: int, dtype=np.float64) -> ModelParams:
    """Positive random weights for a draw-phase-only run."""
    gen = np.random.default_rng(_rng.derive_seed(seed, 7, n_topics))
    theta = gen.uniform(0.1, 1.0, size=(n_docs, n_topics)).astype(dtype)
    phi = gen.uniform(0.1, 1.0, size=(vocab_size, n_topics)).astype(dtype)
    return ModelParams(theta=theta, phi=phi)


def run_sweep(
    corpus: Corpus,
    k_values,
    kernels,
    seed: int,
    config: WarpConfig,
    dtype=np.float64,
    threads: int = 1,
) -> list[SweepRow]:
    """One fully traced draw phase per (kernel, K)."""
    rows = []
    padded = corpus.padded(config.lanes)
    for n_topics in k_values:
        params = synth_params(padded.n_docs, padded.vocab_size, n_topics, seed, dtype)
        for kernel in kernels:
            trace = Trace()
            stops = SeededStops(_rng.derive_seed(seed, 9, n_topics))
            start = time.perf_counter()
            if kernel == "basic":
                draw_z(kernel, corpus.lengths, params.theta[: corpus.n_docs], params.phi, corpus.words, config, stops)
            else:
                draw_z(
                    kernel,
                    padded.lengths,
                    params.theta,
                    params.phi,
                    padded.words,
                    config,
                    stops,
                    trace=trace,
                    threads=threads,
                )
            wall_ms = (time.perf_counter() - start) * 1e3
            report = TraceReport.from_trace(trace)
            rows.append(
                SweepRow(
                    kernel=kernel,
                    K=int(n_topics),
                    global_txn=report.space_transactions("global"),
                    local_txn=report.space_transactions("local"),
                    scattered_local=scattered_local_reads(trace),
                    shuffles=report.shuffles + report.shuffle_xors,
                    adds=report.adds,
                    draws=corpus.n_words,
                    wall_ms=wall_ms,
                )
            )
    return rows


def write_sweep_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema={SWEEP_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.kernel,
                    row.K,
                    row.global_txn,
                    row.local_txn,
                    row.scattered_local,
                    row.shuffles,
                    row.adds,
                    row.draws,
                    f"{row.wall_ms:.3f}",
                ]
            )
