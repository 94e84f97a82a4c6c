"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline;
they are also repeated in the terminal summary.
"""

import time
import warnings

import numpy as np
import pytest

import gaitmatch.matcher as matcher_mod
from gaitmatch.bench import expected_cache_bytes, fit_linear, run_sweep
from gaitmatch.core import KernelSet, LabeledStream, ModeKernel
from gaitmatch.evaluation import circular_phase_error, score
from gaitmatch.formats import (
    format_kernel,
    format_stream,
    read_kernel,
    read_stream,
    write_kernel,
    write_stream,
)
from gaitmatch.matcher import (
    SCALAR_BYTES,
    EfficientMatcher,
    HistoryBuffer,
    ModeErrorState,
    NaiveMatcher,
    naive_errors,
    step_efficient,
)
from gaitmatch.synthgait import GenConfig, default_profiles, generate
from gaitmatch.training import StrideSegment, build_kernel, train_kernel


def rel_dev(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.abs(b)))


# ------------------------------------------------------------------ 1

def test_1_oracle_equivalence(record_acceptance):
    rng = np.random.default_rng(1001)
    t0 = time.perf_counter()
    worst, mismatched, compared = 0.0, 0, 0
    for _ in range(50):
        M = int(rng.integers(1, 8))
        lengths = [int(n) for n in rng.integers(8, 65, size=M)]
        kernels = KernelSet(ModeKernel(f"m{i}", rng.normal(0, 20, size=(n, 4))) for i, n in enumerate(lengths))
        frames = rng.normal(0, 20, size=(5 * max(lengths), 4))
        eff, nai = EfficientMatcher(kernels), NaiveMatcher(kernels)
        for i, d in enumerate(frames):
            pe, pn = eff.step(d), nai.step(d)
            ev = eff.error_vectors()
            for k in kernels:
                if i + 1 >= k.n:
                    worst = max(worst, rel_dev(ev[k.mode_id], naive_errors(k, nai.history)))
            if i + 1 >= kernels.max_n:
                compared += 1
                mismatched += (pe.mode_id, pe.j_star) != (pn.mode_id, pn.j_star)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and mismatched == 0 and elapsed < 30
    record_acceptance(1, ok, f"max rel dev {worst:.2e} (<=1e-9), (m*,j*) mismatches {mismatched}/{compared}, "
                             f"{elapsed:.1f}s (<30s)")
    assert ok


# ------------------------------------------------------------------ 2

def recurrence_errors(kernel, frames, column_shift):
    """Run the rolling recurrence with an explicit history.

    e_i[j] = e_{i-1}[j-1] + |d_i - th_{j+s}|^2 - |d_{i-n} - th_{j+s}|^2 with s the
    column shift: s=0 uses the same column as the window end, s=-1 the one before.
    The history starts as n zero frames, so e starts at the all-zero window error.
    """
    cols = kernel.columns
    n = kernel.n
    e = np.full(n, np.sum(cols ** 2))
    history = np.zeros((len(frames) + n, 4))
    out = []
    for i, d in enumerate(frames):
        history[i + n] = d
        old = history[i]
        new = np.empty(n)
        for j in range(n):
            c = cols[(j + column_shift) % n]
            new[j] = e[j - 1] + np.sum((d - c) ** 2) - np.sum((old - c) ** 2)
        e = new
        out.append(e.copy())
    return out


def test_2_previous_column_recurrence_diverges(record_acceptance):
    rng = np.random.default_rng(1002)
    kernel = ModeKernel("k", rng.normal(0, 20, size=(16, 4)))
    frames = rng.normal(0, 20, size=(200, 4))
    same_col = recurrence_errors(kernel, frames, 0)
    prev_col = recurrence_errors(kernel, frames, -1)
    state = ModeErrorState.fresh(kernel)
    h = HistoryBuffer(kernel.n)
    dev_same = dev_prev = dev_pkg = 0.0
    for i, d in enumerate(frames):
        h.push(d)
        step_efficient(state, kernel, d)
        if i + 1 >= kernel.n:
            truth = naive_errors(kernel, h)
            dev_same = max(dev_same, rel_dev(same_col[i], truth))
            dev_prev = max(dev_prev, rel_dev(prev_col[i], truth))
            dev_pkg = max(dev_pkg, rel_dev(state.e, truth))
    ok = dev_same <= 1e-9 and dev_pkg <= 1e-9 and dev_prev > 1e-2
    record_acceptance(2, ok, f"same-column form rel dev {dev_same:.2e}, package {dev_pkg:.2e}; "
                             f"previous-column form rel dev {dev_prev:.2e} (diverges)")
    assert ok


# ------------------------------------------------------------------ 3

def test_3_noiseless_fixed_point(record_acceptance):
    t0 = time.perf_counter()
    profiles = default_profiles()
    streams = {p.mode_id: generate(p, 20.0) for p in profiles}
    kernels = KernelSet(train_kernel(streams[p.mode_id], p.mode_id, use_labels=False).kernel for p in profiles)
    details, ok = [], True
    for p in profiles:
        result = score(EfficientMatcher(kernels).run(streams[p.mode_id]), streams[p.mode_id])
        mean = result.phase.per_mode[p.mode_id].mean
        bound = 1 / kernels.by_id(p.mode_id).n
        ok &= result.accuracy == 1.0 and mean <= bound
        details.append(f"{p.mode_id} acc {result.accuracy:.3f} phase {mean:.2e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 10
    record_acceptance(3, ok, "; ".join(details) + f"; {elapsed:.1f}s (<10s)")
    assert ok


# ------------------------------------------------------------------ 4

def test_4_noise_robustness(record_acceptance):
    t0 = time.perf_counter()
    profiles = default_profiles()
    noisy = dict(noise_sigma_deg=1.0, cadence_jitter_frac=0.05)
    kernels = KernelSet(
        train_kernel(generate(p, 40.0, GenConfig(seed=400 + i, **noisy)), p.mode_id, use_labels=False).kernel
        for i, p in enumerate(profiles)
    )
    correct = total = 0
    phase_errors, details, strides = [], [], []
    for i, p in enumerate(profiles):
        stream = generate(p, 105 * p.period_s, GenConfig(seed=900 + i, **noisy))
        preds = EfficientMatcher(kernels).run(stream)
        warm = preds.warm
        hits = np.array(preds.predicted_modes)[warm] == p.mode_id
        correct += int(hits.sum())
        total += int(warm.sum())
        err = circular_phase_error(preds.phase[warm], stream.phase[warm])
        phase_errors.append(err)
        # strides that start after the matcher is warm
        strides.append(int(np.sum(stream.hs_indices >= kernels.max_n)) - 1)
        details.append(f"{p.mode_id} {hits.mean():.4f}/{err.mean():.4f}")
    accuracy = correct / total
    mean_phase = float(np.concatenate(phase_errors).mean())
    elapsed = time.perf_counter() - t0
    ok = accuracy >= 0.99 and mean_phase <= 0.04 and min(strides) >= 100 and elapsed < 60
    record_acceptance(4, ok, f"accuracy {accuracy:.4f} (>=0.99), mean phase error {mean_phase:.4f} (<=0.04), "
                             f">= {min(strides)} strides/mode, {elapsed:.1f}s (<60s); per mode acc/phase: "
                             + ", ".join(details))
    assert ok


# ------------------------------------------------------------------ 5 and 6

@pytest.fixture(scope="module")
def sweep():
    t0 = time.perf_counter()
    reports = run_sweep([100, 200, 400], [7], steps=10_000, repeat=2)
    return reports, time.perf_counter() - t0


def by(reports, algo):
    return {r.n: r.mean_us for r in reports if r.algo == algo}


def test_5_complexity_scaling(sweep, record_acceptance):
    reports, elapsed = sweep
    eff, nai = by(reports, "efficient"), by(reports, "naive")
    ns = sorted(eff)
    _, _, r2 = fit_linear(ns, [eff[n] for n in ns])
    growth = [nai[b] / nai[a] for a, b in zip(ns, ns[1:])]
    speedup = nai[400] / eff[400]
    ok = r2 > 0.9 and min(growth) >= 3 and speedup >= 50 and elapsed < 300
    record_acceptance(5, ok, "efficient us " + "/".join(f"{eff[n]:.2f}" for n in ns) + f" R^2 {r2:.3f} (>0.9); "
                             "naive us " + "/".join(f"{nai[n]:.0f}" for n in ns)
                             + " growth per doubling " + "/".join(f"{g:.2f}" for g in growth) + " (>=3); "
                             f"speedup at N=400 {speedup:.0f}x (>=50); {elapsed:.0f}s (<300s)")
    assert ok


def test_6_absolute_latency(sweep, record_acceptance):
    reports, _ = sweep
    mean = by(reports, "efficient")[400]
    ok = mean <= 50
    record_acceptance(6, ok, f"efficient mean per step at N=400, M=7: {mean:.2f} us (<=50 us); "
                             f"{1e6 / mean:.0f} steps/s vs 230 Hz sensing")
    assert ok


# ------------------------------------------------------------------ 7

def test_7_memory_accounting(monkeypatch, record_acceptance):
    rng = np.random.default_rng(1007)
    configs = [[n] * 7 for n in (100, 200, 400)]
    configs += [[int(n) for n in rng.integers(2, 80, size=rng.integers(1, 8))] for _ in range(50)]
    exact = True
    for lengths in configs:
        kernels = KernelSet(ModeKernel(f"m{i}", np.zeros((n, 4))) for i, n in enumerate(lengths))
        m = EfficientMatcher(kernels)
        exact &= m.cache_bytes == sum(n * n for n in lengths) * SCALAR_BYTES
        exact &= all(s.cache_bytes == s.n ** 2 * SCALAR_BYTES for s in m.states)
        if len(set(lengths)) == 1:
            exact &= m.cache_bytes == expected_cache_bytes(len(lengths), lengths[0])

    kernels = KernelSet(ModeKernel(f"m{i}", rng.normal(0, 20, size=(n, 4))) for i, n in enumerate((12, 30, 21)))
    frames = rng.normal(0, 20, size=(400, 4))
    reference = NaiveMatcher(kernels).run(frames)

    class NoHistory:
        def __init__(self, *a, **k):
            raise AssertionError("efficient matcher must not allocate a HistoryBuffer")

    monkeypatch.setattr(matcher_mod, "HistoryBuffer", NoHistory)
    m = matcher_mod.EfficientMatcher(kernels)
    preds = m.run(frames)
    for d in frames[:50]:
        m.step(d)
    warm = preds.warm
    runs = (np.array_equal(preds.mode_index[warm], reference.mode_index[warm])
            and np.array_equal(preds.j_star[warm], reference.j_star[warm]))
    ok = exact and runs
    record_acceptance(7, ok, f"cache bytes exact for {len(configs)} configs: {exact}; "
                             f"efficient run with HistoryBuffer disabled matches naive: {runs}")
    assert ok


# ------------------------------------------------------------------ 8

def random_float(rng):
    kind = rng.integers(0, 4)
    if kind == 0:
        return float(rng.normal(0, 30))
    if kind == 1:
        return float(rng.normal() * 10.0 ** rng.integers(-300, 300))
    if kind == 2:
        return float(rng.integers(-200, 200))
    return float(rng.choice([0.0, -0.0, 0.1, 1 / 3, 5e-324, 1.7976931348623157e308]))


def test_8_format_round_trips(tmp_path, record_acceptance):
    rng = np.random.default_rng(1008)
    kernel_ok = stream_ok = 0
    alphabet = list("abcdefghijklmnopqrstuvwxyzABC_-.0123456789")
    for i in range(100):
        n = int(rng.integers(2, 60))
        cols = np.array([[random_float(rng) for _ in range(4)] for _ in range(n)])
        mode = "".join(rng.choice(alphabet, size=int(rng.integers(1, 10))))
        k = ModeKernel(mode, cols, float(rng.choice([230.0, 100.0, 512.5])))
        text = format_kernel(k)
        path = tmp_path / f"k{i}.csv"
        write_kernel(k, path)
        back = read_kernel(path)
        kernel_ok += path.read_text() == text and format_kernel(back) == text and back == k

        T = int(rng.integers(1, 80))
        has_foot, has_labels = bool(rng.integers(0, 2)), bool(rng.integers(0, 2))
        t = np.cumsum(rng.integers(1, 4, size=T)) + int(rng.integers(-5, 5))
        stream = LabeledStream(
            t_index=t,
            angles=np.array([[random_float(rng) for _ in range(4)] for _ in range(T)]),
            foot=rng.normal(0, 10, size=(T, 2)) if has_foot else None,
            modes=[str(rng.choice(["Slow", "SA", "x-1"])) for _ in range(T)] if has_labels else None,
            phase=rng.uniform(1e-9, 1.0, size=T) if has_labels else None,
            hs_indices=np.flatnonzero(rng.random(T) < 0.1),
        )
        include_hs = bool(rng.integers(0, 2))
        text = format_stream(stream, include_hs)
        path = tmp_path / f"s{i}.csv"
        write_stream(stream, path, include_hs)
        again = format_stream(read_stream(path), include_hs)
        stream_ok += path.read_text() == text and again == text
    ok = kernel_ok == 100 and stream_ok == 100
    record_acceptance(8, ok, f"kernels {kernel_ok}/100, streams {stream_ok}/100 byte-identical")
    assert ok


# ------------------------------------------------------------------ 9

def test_9_training_properties(record_acceptance):
    rng = np.random.default_rng(1009)

    def stride(L):
        return StrideSegment(np.arange(L), rng.normal(0, 20, size=(L, 4)))

    perm_ok = dup_ok = True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(20):
            strides = [stride(int(L)) for L in rng.integers(30, 60, size=rng.integers(2, 9))]
            base = build_kernel("A", strides)
            for _ in range(5):
                perm_ok &= build_kernel("A", [strides[i] for i in rng.permutation(len(strides))]) == base
            for copies in (2, 3, 5):
                dup_ok &= build_kernel("A", strides * copies) == base
            single = strides[:1]
            dup_ok &= build_kernel("A", single * 3) == build_kernel("A", single)
    n = build_kernel("Slow", [stride(L) for L in (390, 392, 394)]).n
    ok = perm_ok and dup_ok and n == 392
    record_acceptance(9, ok, f"permutation invariant: {perm_ok}; duplicate-stride idempotent: {dup_ok}; "
                             f"N from {{390,392,394}} = {n} (expect 392)")
    assert ok
