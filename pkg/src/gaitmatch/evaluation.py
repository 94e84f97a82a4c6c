"""Scoring of prediction logs against labelled streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import N_CHANNELS, LabeledStream
from .matcher import PredictionSeries


def circular_phase_error(predicted, truth):
    """Distance on the unit phase circle, in [0, 0.5].

    Works elementwise on arrays. Both inputs must lie in (0, 1].
    """
    p = np.asarray(predicted, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if np.any(~(p > 0.0) | (p > 1.0)) or np.any(~(t > 0.0) | (t > 1.0)):
        raise ValueError("phases must lie in (0, 1]")
    d = np.abs(p - t)
    out = np.minimum(d, 1.0 - d)
    return float(out) if out.ndim == 0 else out


@dataclass
class ConfusionMatrix:
    """Rows are true modes, columns predicted modes."""

    modes: tuple
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else float("nan")

    def row_fractions(self) -> np.ndarray:
        rows = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, self.counts / np.maximum(rows, 1), 0.0)

    def format(self) -> str:
        width = max(6, *(len(m) for m in self.modes)) + 1
        lines = ["true\\pred".ljust(width) + "".join(m.rjust(width) for m in self.modes)]
        for m, row in zip(self.modes, self.counts):
            lines.append(m.ljust(width) + "".join(str(int(c)).rjust(width) for c in row))
        return "\n".join(lines)


@dataclass
class ModePhaseStats:
    count: int
    mean: float
    std: float
    max: float
    misclassified_count: int
    misclassified_max: float


@dataclass
class PhaseErrorStats:
    """Circular phase error per true mode.

    ``mean``/``std``/``max`` cover correctly classified samples only;
    ``misclassified_max`` is the worst error while the mode was wrong.
    """

    per_mode: dict

    @property
    def overall_mean(self) -> float:
        num = sum(s.mean * s.count for s in self.per_mode.values() if s.count)
        den = sum(s.count for s in self.per_mode.values())
        return num / den if den else float("nan")

    @property
    def misclassified_max(self) -> float:
        vals = [s.misclassified_max for s in self.per_mode.values() if s.misclassified_count]
        return max(vals) if vals else 0.0

    def format(self) -> str:
        lines = [f"{'mode':<8}{'n':>8}{'mean%':>9}{'std%':>9}{'max%':>9}{'n_mis':>8}{'mis_max%':>10}"]
        for m, s in self.per_mode.items():
            lines.append(f"{m:<8}{s.count:>8}{100 * s.mean:>9.3f}{100 * s.std:>9.3f}{100 * s.max:>9.3f}"
                         f"{s.misclassified_count:>8}{100 * s.misclassified_max:>10.3f}")
        return "\n".join(lines)


@dataclass
class Score:
    confusion: ConfusionMatrix
    accuracy: float
    phase: PhaseErrorStats


def _columns(preds):
    if isinstance(preds, PredictionSeries):
        return preds.t_index, preds.predicted_modes, preds.phase, preds.warm, list(preds.mode_ids)
    preds = list(preds)
    t = np.array([p.t_index for p in preds], dtype=np.int64)
    modes = [p.mode_id for p in preds]
    phase = np.array([p.phase for p in preds], dtype=np.float64)
    warm = np.array([p.warm for p in preds], dtype=bool)
    order = list(preds[0].min_error_per_mode) if preds else []
    return t, modes, phase, warm, order


def score(preds, labels: LabeledStream, exclude_warmup: bool = True) -> Score:
    """Confusion matrix, accuracy and phase error of ``preds`` against ``labels``."""
    if not labels.has_labels:
        raise ValueError("truth stream carries no mode/phase labels")
    t, pmodes, pphase, warm, order = _columns(preds)
    if len(t) != len(labels):
        raise ValueError(f"{len(t)} predictions for {len(labels)} labelled frames")
    if not np.array_equal(t, labels.t_index):
        bad = int(np.argmax(t != labels.t_index))
        raise ValueError(f"t_index mismatch at row {bad}: {t[bad]} vs {labels.t_index[bad]}")

    modes = list(order)
    for m in labels.modes:
        if m not in modes:
            modes.append(m)
    index = {m: i for i, m in enumerate(modes)}
    true_idx = np.array([index[m] for m in labels.modes], dtype=np.int64)
    pred_idx = np.array([index[m] for m in pmodes], dtype=np.int64)

    keep = warm if exclude_warmup else np.ones(len(t), dtype=bool)
    counts = np.zeros((len(modes), len(modes)), dtype=np.int64)
    np.add.at(counts, (true_idx[keep], pred_idx[keep]), 1)
    cm = ConfusionMatrix(tuple(modes), counts)

    per_mode = {}
    if keep.any():
        err = np.zeros(len(t))
        err[keep] = circular_phase_error(pphase[keep], labels.phase[keep])
    else:
        err = np.zeros(len(t))
    ok = true_idx == pred_idx
    for m, i in index.items():
        sel = keep & (true_idx == i)
        if not sel.any():
            continue
        good = err[sel & ok]
        bad = err[sel & ~ok]
        per_mode[m] = ModePhaseStats(
            count=int(good.size),
            mean=float(good.mean()) if good.size else float("nan"),
            std=float(good.std()) if good.size else float("nan"),
            max=float(good.max()) if good.size else float("nan"),
            misclassified_count=int(bad.size),
            misclassified_max=float(bad.max()) if bad.size else 0.0,
        )
    return Score(cm, cm.accuracy, PhaseErrorStats(per_mode))


def rms_error(sse, n: int):
    """Per-sample, per-channel RMS angle error from a window SSE."""
    return np.sqrt(np.asarray(sse, dtype=np.float64) / (N_CHANNELS * n))


def trace(preds: PredictionSeries, window=None, rms: bool = False) -> dict:
    """Interpretability trace: per-mode minimum error, winner and phase per step.

    ``window`` is an optional ``(start, stop)`` range of t_index values,
    stop exclusive.
    """
    sel = np.ones(len(preds), dtype=bool)
    if window is not None:
        start, stop = window
        sel = (preds.t_index >= start) & (preds.t_index < stop)
    cols = {"t_index": preds.t_index[sel]}
    for m, mode_id in enumerate(preds.mode_ids):
        cols[f"e_{mode_id}"] = preds.min_errors[sel, m]
    if rms:
        for m, (mode_id, n) in enumerate(zip(preds.mode_ids, preds.lengths)):
            cols[f"rms_{mode_id}"] = rms_error(preds.min_errors[sel, m], n)
    cols["mode"] = [preds.mode_ids[i] for i in preds.mode_index[sel]]
    cols["j_star"] = preds.j_star[sel]
    cols["phase"] = preds.phase[sel]
    cols["warm"] = preds.warm[sel]
    return cols
