"""Per-step latency measurement for the naive and efficient matchers.

Timing goes through the public ``step`` method of each matcher, the same
path used for real streams. Each step is timed individually with the
monotonic ``perf_counter_ns`` clock after an untimed warm-up.
"""

from __future__ import annotations

import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass

import numpy as np

from .core import N_CHANNELS, KernelSet, ModeKernel
from .formats import write_table
from .matcher import SCALAR_BYTES, EfficientMatcher, NaiveMatcher

ALGOS = ("efficient", "naive")
DEFAULT_WARMUP = 1000


@dataclass
class BenchReport:
    algo: str
    n: int
    m: int
    steps: int
    mean_us: float
    median_us: float
    p99_us: float
    cache_bytes: int
    history_bytes: int


def expected_cache_bytes(m: int, n: int) -> int:
    return m * n * n * SCALAR_BYTES


def synthetic_kernels(n: int, m: int, seed: int = 0) -> KernelSet:
    rng = np.random.default_rng(seed)
    return KernelSet(ModeKernel(f"k{i}", rng.normal(0.0, 20.0, size=(n, N_CHANNELS))) for i in range(m))


def synthetic_frames(steps: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed + 1).normal(0.0, 20.0, size=(steps, N_CHANNELS))


def make_matcher(algo: str, kernels: KernelSet):
    if algo == "efficient":
        return EfficientMatcher(kernels)
    if algo == "naive":
        return NaiveMatcher(kernels)
    raise ValueError(f"algo must be one of {ALGOS}, got {algo!r}")


@contextmanager
def single_cpu():
    """Pin the process to one CPU for the duration, where the OS allows it."""
    if not hasattr(os, "sched_getaffinity"):
        yield
        return
    before = os.sched_getaffinity(0)
    try:
        os.sched_setaffinity(0, {min(before)})
    except OSError:
        yield
        return
    try:
        yield
    finally:
        os.sched_setaffinity(0, before)


def time_steps(matcher, frames: np.ndarray, warmup: int = DEFAULT_WARMUP) -> np.ndarray:
    """Per-step wall time in nanoseconds for ``frames`` after ``warmup`` untimed steps."""
    clock = time.perf_counter_ns
    warm_rows = list(synthetic_frames(warmup, seed=12345)) if warmup else []
    for d in warm_rows:
        matcher.step(d)
    rows = list(frames)
    out = np.empty(len(rows), dtype=np.int64)
    step = matcher.step
    for i, d in enumerate(rows):
        t0 = clock()
        step(d)
        out[i] = clock() - t0
    return out


def bench_one(algo: str, n: int, m: int, steps: int, seed: int = 0, warmup: int = DEFAULT_WARMUP) -> BenchReport:
    """Time one fresh matcher over ``steps`` synthetic frames."""
    kernels = synthetic_kernels(n, m, seed)
    frames = synthetic_frames(steps, seed)
    matcher = make_matcher(algo, kernels)
    ns = time_steps(matcher, frames, warmup)
    if algo == "efficient":
        cache, history = matcher.cache_bytes, 0
    else:
        cache, history = 0, matcher.history.ring.nbytes
    return BenchReport(
        algo=algo,
        n=n,
        m=m,
        steps=steps,
        mean_us=float(ns.mean()) / 1e3,
        median_us=float(np.median(ns)) / 1e3,
        p99_us=float(np.percentile(ns, 99)) / 1e3,
        cache_bytes=int(cache),
        history_bytes=int(history),
    )


def run_sweep(n_values, m_values, steps: int, algos=ALGOS, seed: int = 0, warmup: int = DEFAULT_WARMUP,
              repeat: int = 1, pin: bool = True) -> list[BenchReport]:
    """Time every (algo, n, m) combination on identical synthetic input.

    With ``repeat > 1`` the whole grid is run that many times in interleaved
    rounds and each configuration keeps its fastest round, so a burst of
    host contention cannot skew one configuration against its neighbours.
    """
    if steps < 1000:
        raise ValueError(f"steps must be >= 1000, got {steps}")
    if repeat < 1:
        raise ValueError("repeat must be >= 1")
    for a in algos:
        if a not in ALGOS:
            raise ValueError(f"unknown algo {a!r}")
    grid = [(int(n), int(m), algo) for n in n_values for m in m_values for algo in algos]
    best = {}
    with single_cpu() if pin else _null():
        for _ in range(repeat):
            for n, m, algo in grid:
                r = bench_one(algo, n, m, steps, seed, warmup)
                key = (algo, n, m)
                if key not in best or r.mean_us < best[key].mean_us:
                    best[key] = r
    return [best[(algo, n, m)] for n, m, algo in grid]


@contextmanager
def _null():
    yield


def fit_linear(x, y) -> tuple[float, float, float]:
    """Least-squares line through (x, y); returns (slope, intercept, R^2)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def mode_headroom(reports, n: int, budget_us: float, algo: str = "efficient") -> int:
    """Largest mode count whose predicted per-step time fits in ``budget_us``.

    Extrapolates a line fitted over the measured M values at kernel length n.
    """
    rows = [r for r in reports if r.algo == algo and r.n == n]
    if len(rows) < 2:
        raise ValueError("need at least two mode counts at this n to extrapolate")
    slope, intercept, _ = fit_linear([r.m for r in rows], [r.mean_us for r in rows])
    if slope <= 0:
        raise ValueError("per-step time does not grow with M; cannot extrapolate")
    return int((budget_us - intercept) // slope)


def speedups(reports) -> dict:
    """naive/efficient mean-time ratio per (n, m)."""
    eff = {(r.n, r.m): r.mean_us for r in reports if r.algo == "efficient"}
    nai = {(r.n, r.m): r.mean_us for r in reports if r.algo == "naive"}
    return {k: nai[k] / eff[k] for k in eff if k in nai}


def write_reports(reports, path) -> None:
    rows = [asdict(r) for r in reports]
    cols = {k: [row[k] for row in rows] for k in (rows[0] if rows else asdict(BenchReport("", 0, 0, 0, 0, 0, 0, 0, 0)))}
    write_table(cols, path)
