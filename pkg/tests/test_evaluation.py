import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaitmatch.core import KernelSet, LabeledStream, Prediction
from gaitmatch.evaluation import circular_phase_error, rms_error, score, trace
from gaitmatch.matcher import PredictionSeries, run_efficient
from gaitmatch.synthgait import generate, generate_session, profiles_by_id
from gaitmatch.training import train_kernel


@pytest.mark.parametrize("p, t, expected", [(0.30, 0.30, 0.0), (0.99, 0.01, 0.02), (0.25, 0.75, 0.5), (1.0, 0.5, 0.5)])
def test_circular_examples(p, t, expected):
    assert circular_phase_error(p, t) == pytest.approx(expected)


@pytest.mark.parametrize("bad", [0.0, 1.5, -0.1, np.nan])
def test_circular_out_of_range(bad):
    with pytest.raises(ValueError):
        circular_phase_error(bad, 0.5)


phase = st.floats(1e-6, 1.0)


@given(phase, phase, phase)
@settings(max_examples=300)
def test_circular_metric_properties(a, b, c):
    ab = circular_phase_error(a, b)
    assert 0.0 <= ab <= 0.5
    assert ab == circular_phase_error(b, a)
    assert ab <= circular_phase_error(a, c) + circular_phase_error(c, b) + 1e-12


def series(modes, j, lengths, mode_ids, warm=None):
    T = len(modes)
    index = {m: i for i, m in enumerate(mode_ids)}
    return PredictionSeries(
        tuple(mode_ids), tuple(lengths), np.arange(T), np.array([index[m] for m in modes]),
        np.array(j), np.zeros((T, len(mode_ids))), np.ones(T, bool) if warm is None else np.array(warm),
    )


def labels(modes, phases):
    return LabeledStream(t_index=np.arange(len(modes)), angles=np.zeros((len(modes), 4)),
                         modes=list(modes), phase=np.array(phases, float))


def test_perfect_predictions():
    preds = series(["A", "A", "B"], [1, 2, 3], [2, 4], ["A", "B"])
    result = score(preds, labels(["A", "A", "B"], [0.5, 1.0, 0.75]))
    assert result.accuracy == 1.0
    assert all(s.max == 0.0 for s in result.phase.per_mode.values())
    assert result.confusion.counts.tolist() == [[2, 0], [0, 1]]


def test_misclassification_and_warmup():
    preds = series(["A", "B", "B", "B"], [1, 1, 2, 4], [4, 4], ["A", "B"], warm=[False, True, True, True])
    truth = labels(["A", "A", "B", "B"], [0.25, 0.5, 0.5, 0.25])
    result = score(preds, truth)
    assert result.confusion.total == 3
    assert result.accuracy == pytest.approx(2 / 3)
    assert result.accuracy * result.confusion.total == np.trace(result.confusion.counts)
    assert result.phase.per_mode["A"].misclassified_count == 1
    assert result.phase.per_mode["A"].misclassified_max == pytest.approx(0.25)
    assert result.phase.per_mode["B"].mean == pytest.approx(0.125)
    full = score(preds, truth, exclude_warmup=False)
    assert full.confusion.total == 4


def test_exclude_warmup_irrelevant_when_all_warm():
    preds = series(["A", "B", "A"], [1, 2, 3], [3, 3], ["A", "B"])
    truth = labels(["A", "A", "A"], [1 / 3, 2 / 3, 1.0])
    a, b = score(preds, truth), score(preds, truth, exclude_warmup=False)
    assert np.array_equal(a.confusion.counts, b.confusion.counts)
    assert a.phase.per_mode == b.phase.per_mode


def test_score_accepts_prediction_lists():
    preds = [Prediction("A", 1, 0.5, {"A": 0.0}, True, 0), Prediction("A", 2, 1.0, {"A": 0.0}, True, 1)]
    assert score(preds, labels(["A", "A"], [0.5, 1.0])).accuracy == 1.0


def test_score_alignment_errors():
    preds = series(["A", "A"], [1, 2], [2], ["A"])
    with pytest.raises(ValueError):
        score(preds, labels(["A"], [0.5]))
    shifted = LabeledStream(t_index=np.arange(1, 3), angles=np.zeros((2, 4)), modes=["A", "A"], phase=np.ones(2))
    with pytest.raises(ValueError):
        score(preds, shifted)


def test_rms_identity():
    assert rms_error(392 * 4, 392) == 1.0


@pytest.fixture(scope="module")
def kernels():
    profiles = profiles_by_id()
    return KernelSet(train_kernel(generate(p, 20.0), p.mode_id).kernel for p in profiles.values())


def test_noiseless_seven_mode_session(kernels):
    schedule = [(m, 8.0) for m in kernels.mode_ids]
    session = generate_session(profiles_by_id(), schedule)
    # score each steady segment from its own start so the window never spans two modes
    for m in kernels.mode_ids:
        sel = np.asarray(session.modes) == m
        part = session.slice(int(np.argmax(sel)), int(np.argmax(sel)) + int(sel.sum()))
        result = score(run_efficient(kernels, part), part)
        assert result.accuracy == 1.0
        assert result.phase.per_mode[m].mean <= 1 / kernels.by_id(m).n


def test_single_mode_trace_is_constant(kernels):
    stream = generate(profiles_by_id()["RD"], 5.0)
    t = trace(run_efficient(KernelSet([kernels.by_id("RD")]), stream), rms=True)
    assert set(t["mode"]) == {"RD"}
    assert len(t["rms_RD"]) == len(stream)


def test_trace_crossovers_match_prediction_switches(kernels):
    session = generate_session(profiles_by_id(), [("Slow", 8), ("Med", 8), ("Fast", 8)])
    preds = run_efficient(kernels, session)
    t = trace(preds, window=(kernels.max_n, len(session)))
    errs = np.stack([t[f"e_{m}"] for m in kernels.mode_ids], axis=1)
    lowest = np.array(kernels.mode_ids)[np.argmin(errs, axis=1)]
    assert np.array_equal(lowest, np.array(t["mode"]))
    switches = np.flatnonzero(lowest[1:] != lowest[:-1])
    assert len(switches) >= 2
    assert len(t["t_index"]) == len(session) - kernels.max_n
