"""Naive and incremental sliding-window mode/phase matchers.

Both matchers score the last ``n`` frames against every circular rotation of
each mode kernel by sum of squared errors and report the global argmin.

The naive matcher rebuilds every error from a history ring, costing
O(n^2) per mode per step. The efficient matcher keeps, per mode, the error
vector ``e`` and a cache ``S`` of squared distances between recent frames and
kernel columns, and updates each cell in O(1)::

    e_i[j] = e_{i-1}[j-1] + |d_i - k_j|^2 - S[i mod n, j]
    S[i mod n, j] = |d_i - k_j|^2

(indices modulo ``n``). It never needs the raw frame history.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import (
    N_CHANNELS,
    DataError,
    KernelSet,
    ModeKernel,
    Prediction,
    SampleFrame,
    StructuralError,
)


SCALAR_BYTES = np.dtype(np.float64).itemsize
# Drift below zero tolerated before a state is considered corrupt.
EPS_ACC = 1e-6
INIT_MODES = ("zeros", "history")


# ---------------------------------------------------------------------------
# compiled kernels


@njit(cache=True)
def _step_mode(d, cols, e, s_flat, row_base):
    """Advance one mode's error vector by one frame, in place.

    Walks j forward carrying the pre-update e[j-1] in a register, so cell j
    reads e_{i-1}[j-1] even though e is overwritten as it goes.
    """
    n = cols.shape[0]
    d0, d1, d2, d3 = d[0], d[1], d[2], d[3]
    prev = e[n - 1]
    for j in range(n):
        a = d0 - cols[j, 0]
        b = d1 - cols[j, 1]
        c = d2 - cols[j, 2]
        f = d3 - cols[j, 3]
        q = a * a + b * b + c * c + f * f
        cur = e[j]
        e[j] = prev + q - s_flat[row_base + j]
        s_flat[row_base + j] = q
        prev = cur


@njit(cache=True)
def _diag_sum(s_flat, s_off, n, newest_row, j):
    """Window SSE for column j summed straight from the square-term cache.

    Terms are added newest frame first, the same order the naive scan uses,
    so the result matches it bit for bit.
    """
    acc = 0.0
    for t in range(n):
        acc += s_flat[s_off + ((newest_row - t) % n) * n + (j - t) % n]
    return acc


@njit(cache=True)
def _resync_mode(e, s_flat, s_off, n, newest_row):
    """Rebuild ``e`` from the diagonals of the square-term cache."""
    for j in range(n):
        e[j] = _diag_sum(s_flat, s_off, n, newest_row, j)


@njit(cache=True)
def _init_zero_history(cols, e, s_flat):
    """Fill ``S`` and ``e`` as if the window held only zero frames."""
    n = cols.shape[0]
    for c in range(n):
        a = 0.0 - cols[c, 0]
        b = 0.0 - cols[c, 1]
        g = 0.0 - cols[c, 2]
        f = 0.0 - cols[c, 3]
        q = a * a + b * b + g * g + f * f
        for r in range(n):
            s_flat[r * n + c] = q
    _resync_mode(e, s_flat, 0, n, n - 1)


@njit(cache=True)
def _first_min(e):
    best = 0
    val = e[0]
    for j in range(1, e.shape[0]):
        if e[j] < val:
            val = e[j]
            best = j
    return best, val


@njit(cache=True)
def _pick_mode(mins):
    best = 0
    for m in range(1, mins.shape[0]):
        if mins[m] < mins[best]:
            best = m
    return best


@njit(cache=True)
def _all_finite(d):
    for c in range(d.shape[0]):
        if not np.isfinite(d[c]):
            return False
    return True


@njit(cache=True)
def _efficient_step_all(d, cols_flat, offs, lengths, e_flat, s_flat, s_offs, counts, resync_every, exact,
                        mins, args):
    """One timestep for every mode. Returns (winner, warm) or (-1, False) on bad input."""
    if not _all_finite(d):
        return -1, False
    warm = True
    for m in range(lengths.shape[0]):
        n = lengths[m]
        o = offs[m]
        cols = cols_flat[o:o + n]
        e = e_flat[o:o + n]
        row = counts[m] % n
        _step_mode(d, cols, e, s_flat, s_offs[m] + row * n)
        counts[m] += 1
        if resync_every > 0 and counts[m] % resync_every == 0:
            _resync_mode(e, s_flat, s_offs[m], n, row)
        j, v = _first_min(e)
        args[m] = j
        if exact:
            v = _diag_sum(s_flat, s_offs[m], n, row, j)
        mins[m] = v if v > 0.0 else 0.0
        if counts[m] < n:
            warm = False
    return _pick_mode(mins), warm


@njit(cache=True)
def _efficient_run(frames, cols_flat, offs, lengths, e_flat, s_flat, s_offs, counts, resync_every, exact,
                   out_mode, out_j, out_min, out_warm):
    mins = np.empty(lengths.shape[0])
    args = np.empty(lengths.shape[0], dtype=np.int64)
    for i in range(frames.shape[0]):
        best, warm = _efficient_step_all(frames[i], cols_flat, offs, lengths, e_flat, s_flat, s_offs,
                                         counts, resync_every, exact, mins, args)
        out_mode[i] = best
        out_j[i] = args[best] + 1
        out_warm[i] = warm
        for m in range(mins.shape[0]):
            out_min[i, m] = mins[m]


@njit(cache=True)
def _naive_mode(window, cols, out):
    """``window[t]`` is the frame t steps in the past (0 = newest)."""
    n = cols.shape[0]
    for j in range(n):
        acc = 0.0
        # window offset t pairs with kernel column j - t, wrapping below zero
        for t in range(j + 1):
            k = j - t
            a = window[t, 0] - cols[k, 0]
            b = window[t, 1] - cols[k, 1]
            c = window[t, 2] - cols[k, 2]
            f = window[t, 3] - cols[k, 3]
            acc += a * a + b * b + c * c + f * f
        for t in range(j + 1, n):
            k = j - t + n
            a = window[t, 0] - cols[k, 0]
            b = window[t, 1] - cols[k, 1]
            c = window[t, 2] - cols[k, 2]
            f = window[t, 3] - cols[k, 3]
            acc += a * a + b * b + c * c + f * f
        out[j] = acc


@njit(cache=True)
def _gather_newest_first(ring, head, n, out):
    cap = ring.shape[0]
    for t in range(n):
        r = (head - t) % cap
        for c in range(ring.shape[1]):
            out[t, c] = ring[r, c]


@njit(cache=True)
def _naive_step_all(ring, head, count, cols_flat, offs, lengths, e_flat, window, mins, args):
    warm = True
    for m in range(lengths.shape[0]):
        n = lengths[m]
        o = offs[m]
        _gather_newest_first(ring, head, n, window)
        e = e_flat[o:o + n]
        _naive_mode(window, cols_flat[o:o + n], e)
        j, v = _first_min(e)
        args[m] = j
        mins[m] = v
        if count < n:
            warm = False
    return _pick_mode(mins), warm


@njit(cache=True)
def _naive_run(frames, ring, head, count, cols_flat, offs, lengths, e_flat, window,
               out_mode, out_j, out_min, out_warm):
    cap = ring.shape[0]
    mins = np.empty(lengths.shape[0])
    args = np.empty(lengths.shape[0], dtype=np.int64)
    for i in range(frames.shape[0]):
        head = (head + 1) % cap
        for c in range(ring.shape[1]):
            ring[head, c] = frames[i, c]
        count += 1
        best, warm = _naive_step_all(ring, head, count, cols_flat, offs, lengths, e_flat, window, mins, args)
        out_mode[i] = best
        out_j[i] = args[best] + 1
        out_warm[i] = warm
        for m in range(mins.shape[0]):
            out_min[i, m] = mins[m]
    return head, count


# ---------------------------------------------------------------------------
# results


@dataclass
class PredictionSeries:
    """Columnar prediction log, one row per processed frame."""

    mode_ids: tuple
    lengths: tuple
    t_index: np.ndarray
    mode_index: np.ndarray
    j_star: np.ndarray
    min_errors: np.ndarray
    warm: np.ndarray

    def __len__(self):
        return self.t_index.shape[0]

    @property
    def phase(self) -> np.ndarray:
        if len(self) == 0:
            return np.zeros(0)
        return self.j_star / np.asarray(self.lengths, dtype=np.float64)[self.mode_index]

    @property
    def predicted_modes(self) -> list:
        return [self.mode_ids[i] for i in self.mode_index]

    def __getitem__(self, i) -> Prediction:
        m = int(self.mode_index[i])
        j = int(self.j_star[i])
        return Prediction(
            mode_id=self.mode_ids[m],
            j_star=j,
            phase=j / self.lengths[m],
            min_error_per_mode=dict(zip(self.mode_ids, self.min_errors[i].tolist())),
            warm=bool(self.warm[i]),
            t_index=int(self.t_index[i]),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def empty(cls, kernels: KernelSet) -> "PredictionSeries":
        return cls(
            mode_ids=kernels.mode_ids,
            lengths=kernels.lengths,
            t_index=np.zeros(0, dtype=np.int64),
            mode_index=np.zeros(0, dtype=np.int64),
            j_star=np.zeros(0, dtype=np.int64),
            min_errors=np.zeros((0, len(kernels))),
            warm=np.zeros(0, dtype=bool),
        )

    @classmethod
    def from_predictions(cls, predictions, mode_ids, lengths) -> "PredictionSeries":
        preds = list(predictions)
        index = {mid: i for i, mid in enumerate(mode_ids)}
        return cls(
            mode_ids=tuple(mode_ids),
            lengths=tuple(lengths),
            t_index=np.array([p.t_index for p in preds], dtype=np.int64),
            mode_index=np.array([index[p.mode_id] for p in preds], dtype=np.int64),
            j_star=np.array([p.j_star for p in preds], dtype=np.int64),
            min_errors=np.array([[p.min_error_per_mode[m] for m in mode_ids] for p in preds],
                                dtype=np.float64).reshape(len(preds), len(mode_ids)),
            warm=np.array([p.warm for p in preds], dtype=bool),
        )


def _frames_array(stream) -> tuple[np.ndarray, np.ndarray]:
    """Accept an (T, 4) array, a LabeledStream-like object, or SampleFrames."""
    if hasattr(stream, "angles") and hasattr(stream, "t_index") and not isinstance(stream, SampleFrame):
        angles = np.asarray(stream.angles, dtype=np.float64)
        t_index = np.asarray(stream.t_index, dtype=np.int64)
    else:
        items = list(stream) if not isinstance(stream, np.ndarray) else stream
        if len(items) and isinstance(items[0], SampleFrame):
            angles = np.array([f.angles for f in items], dtype=np.float64)
            t_index = np.array([f.t_index for f in items], dtype=np.int64)
        else:
            angles = np.asarray(items, dtype=np.float64)
            t_index = None
    if angles.size == 0:
        angles = angles.reshape(0, N_CHANNELS)
    if angles.ndim != 2 or angles.shape[1] != N_CHANNELS:
        raise StructuralError(f"stream must be (T, {N_CHANNELS}), got {angles.shape}")
    bad = ~np.isfinite(angles).all(axis=1)
    if bad.any():
        raise DataError(f"non-finite angles at stream row {int(np.argmax(bad))}")
    if t_index is None:
        t_index = np.arange(angles.shape[0], dtype=np.int64)
    return np.ascontiguousarray(angles), t_index


def _flatten_columns(kernels: KernelSet):
    lengths = np.array(kernels.lengths, dtype=np.int64)
    offs = np.zeros(len(kernels), dtype=np.int64)
    offs[1:] = np.cumsum(lengths)[:-1]
    cols = np.ascontiguousarray(np.concatenate([k.columns for k in kernels], axis=0))
    return cols, offs, lengths


def _unpack_frame(frame):
    if isinstance(frame, SampleFrame):
        return frame.angles, frame.t_index
    return frame, None


# ---------------------------------------------------------------------------
# efficient matcher


class ModeErrorState:
    """Rolling error vector and square-term cache for one mode.

    ``s_cache[r, j]`` holds ``|d - k_j|^2`` for the most recent frame whose
    step index is congruent to ``r`` modulo ``n``.
    """

    def __init__(self, mode_id: str, e: np.ndarray, s_cache: np.ndarray, counter: np.ndarray):
        self.mode_id = mode_id
        self.e = e
        self.s_cache = s_cache
        self._counter = counter

    @classmethod
    def fresh(cls, kernel: ModeKernel, init: str = "zeros") -> "ModeErrorState":
        n = kernel.n
        state = cls(kernel.mode_id, np.zeros(n), np.zeros((n, n)), np.zeros(1, dtype=np.int64))
        _initialise(state, kernel, init)
        return state

    @property
    def n(self) -> int:
        return self.e.shape[0]

    @property
    def step_count(self) -> int:
        return int(self._counter[0])

    @property
    def cache_bytes(self) -> int:
        return self.s_cache.size * self.s_cache.itemsize

    def __repr__(self):
        return f"ModeErrorState({self.mode_id!r}, n={self.n}, step_count={self.step_count})"


def _initialise(state: ModeErrorState, kernel: ModeKernel, init: str) -> None:
    if init == "zeros":
        state.e[:] = 0.0
        state.s_cache[:] = 0.0
    elif init == "history":
        _init_zero_history(kernel.columns, state.e, state.s_cache.reshape(-1))
    else:
        raise ValueError(f"init must be one of {INIT_MODES}, got {init!r}")
    state._counter[0] = 0


def step_efficient(state: ModeErrorState, kernel: ModeKernel, new_frame) -> ModeErrorState:
    """Advance a single mode's state by one frame, in place, and return it."""
    if state.mode_id != kernel.mode_id:
        raise StructuralError(f"state is for {state.mode_id!r}, kernel is {kernel.mode_id!r}")
    if state.n != kernel.n:
        raise StructuralError(f"state length {state.n} != kernel length {kernel.n}")
    angles, _ = _unpack_frame(new_frame)
    d = np.asarray(angles, dtype=np.float64)
    if d.shape != (N_CHANNELS,):
        raise StructuralError(f"frame must have {N_CHANNELS} channels, got shape {d.shape}")
    if not _all_finite(d):
        raise DataError(f"non-finite frame {d.tolist()}")
    n = kernel.n
    row = state.step_count % n
    if not state.s_cache.flags.c_contiguous:
        raise StructuralError("s_cache must be C-contiguous")
    _step_mode(d, kernel.columns, state.e, state.s_cache.reshape(-1), row * n)
    state._counter[0] += 1
    return state


class EfficientMatcher:
    """Streaming mode/phase estimator with O(n) work per mode per frame.

    Parameters
    ----------
    kernels
        The mode kernels, in tie-break order.
    init
        ``"zeros"`` starts ``e`` and ``S`` at zero; errors equal the full
        window SSE once a mode has seen ``n`` frames. ``"history"`` starts
        them as if an all-zero history had already been seen, which makes
        the output match :class:`NaiveMatcher` from the first frame.
    resync_every
        If set, rebuild each mode's ``e`` from its cache diagonals every this
        many steps to bound floating-point drift. Off by default.
    exact_report
        Recompute each mode's reported minimum from the cache diagonal
        instead of taking the running value. The winner is unchanged, but the
        reported errors then equal the naive matcher's bit for bit. Costs a
        strided O(n) read per mode, so it is off for benchmarking.
    """

    def __init__(self, kernels, init: str = "zeros", resync_every: int | None = None,
                 exact_report: bool = False):
        if not isinstance(kernels, KernelSet):
            kernels = KernelSet(kernels)
        if init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}, got {init!r}")
        if resync_every is not None and resync_every < 1:
            raise ValueError("resync_every must be a positive integer")
        self.kernels = kernels
        self.init = init
        self.resync_every = resync_every or 0
        self.exact_report = bool(exact_report)
        self._cols, self._offs, self._lengths = _flatten_columns(kernels)
        sq = self._lengths * self._lengths
        self._s_offs = np.zeros_like(self._lengths)
        self._s_offs[1:] = np.cumsum(sq)[:-1]
        self._e = np.zeros(int(self._lengths.sum()))
        self._s = np.zeros(int(sq.sum()))
        self._counts = np.zeros(len(kernels), dtype=np.int64)
        self._mins = np.zeros(len(kernels))
        self._args = np.zeros(len(kernels), dtype=np.int64)
        self._ids = kernels.mode_ids
        self._ns = kernels.lengths
        self._t = 0
        self.states = []
        for m, k in enumerate(kernels):
            o, so, n = self._offs[m], self._s_offs[m], k.n
            self.states.append(ModeErrorState(
                k.mode_id,
                self._e[o:o + n],
                self._s[so:so + n * n].reshape(n, n),
                self._counts[m:m + 1],
            ))
        self.reset()

    def reset(self) -> None:
        for state, kernel in zip(self.states, self.kernels):
            _initialise(state, kernel, self.init)
        self._t = 0

    @property
    def cache_bytes(self) -> int:
        """Footprint of all square-term caches: sum of n_m^2 scalars."""
        return self._s.size * self._s.itemsize

    @property
    def step_count(self) -> int:
        return self._t

    def error_vectors(self) -> dict:
        return {s.mode_id: s.e.copy() for s in self.states}

    def step(self, frame, t_index: int | None = None) -> Prediction:
        """Consume one frame and return the current prediction."""
        angles, t_frame = _unpack_frame(frame)
        d = np.asarray(angles, dtype=np.float64)
        if d.shape != (N_CHANNELS,):
            raise StructuralError(f"frame must have {N_CHANNELS} channels, got shape {d.shape}")
        best, warm = _efficient_step_all(d, self._cols, self._offs, self._lengths, self._e, self._s,
                                         self._s_offs, self._counts, self.resync_every,
                                         self.exact_report, self._mins, self._args)
        if best < 0:
            raise DataError(f"non-finite frame {d.tolist()}")
        if t_index is None:
            t_index = self._t if t_frame is None else t_frame
        self._t += 1
        j = int(self._args[best]) + 1
        return Prediction(self._ids[best], j, j / self._ns[best],
                          dict(zip(self._ids, self._mins.tolist())), warm, t_index)

    def run(self, stream) -> PredictionSeries:
        """Process a whole stream in one compiled loop (same per-step kernel as :meth:`step`)."""
        frames, t_index = _frames_array(stream)
        T, M = frames.shape[0], len(self.kernels)
        out_mode = np.zeros(T, dtype=np.int64)
        out_j = np.zeros(T, dtype=np.int64)
        out_min = np.zeros((T, M))
        out_warm = np.zeros(T, dtype=np.bool_)
        if T:
            _efficient_run(frames, self._cols, self._offs, self._lengths, self._e, self._s, self._s_offs,
                           self._counts, self.resync_every, self.exact_report,
                           out_mode, out_j, out_min, out_warm)
        self._t += T
        return PredictionSeries(self._ids, self._ns, t_index, out_mode, out_j, out_min, out_warm)


def step_all(matcher: EfficientMatcher, new_frame) -> Prediction:
    return matcher.step(new_frame)


def run_efficient(kernels, stream, **kwargs) -> PredictionSeries:
    return EfficientMatcher(kernels, **kwargs).run(stream)


# ---------------------------------------------------------------------------
# naive matcher


class HistoryBuffer:
    """Zero-filled ring of the most recent frames.

    Logical offset 0 is the newest frame; unfilled slots read as zeros.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.ring = np.zeros((self.capacity, N_CHANNELS))
        self.head = self.capacity - 1
        self.count = 0

    def push(self, frame) -> None:
        angles, _ = _unpack_frame(frame)
        d = np.asarray(angles, dtype=np.float64)
        if d.shape != (N_CHANNELS,):
            raise StructuralError(f"frame must have {N_CHANNELS} channels, got shape {d.shape}")
        if not _all_finite(d):
            raise DataError(f"non-finite frame {d.tolist()}")
        self.head = (self.head + 1) % self.capacity
        self.ring[self.head] = d
        self.count += 1

    def __getitem__(self, offset: int) -> np.ndarray:
        if not 0 <= offset < self.capacity:
            raise IndexError(offset)
        return self.ring[(self.head - offset) % self.capacity].copy()

    def newest_first(self, n: int) -> np.ndarray:
        if n > self.capacity:
            raise ValueError(f"requested {n} frames from a buffer of {self.capacity}")
        out = np.empty((n, N_CHANNELS))
        _gather_newest_first(self.ring, self.head, n, out)
        return out

    def window(self, n: int) -> np.ndarray:
        """The last ``n`` frames oldest first, shape (n, 4)."""
        return self.newest_first(n)[::-1].copy()

    def clear(self) -> None:
        self.ring[:] = 0.0
        self.head = self.capacity - 1
        self.count = 0


def naive_errors(kernel: ModeKernel, history: HistoryBuffer) -> np.ndarray:
    """SSE between the last ``n`` frames and every circular kernel window.

    ``out[j - 1]`` compares the history against the window of kernel columns
    ending with column j.
    """
    if history.ring.shape[1] != kernel.columns.shape[1]:
        raise StructuralError(
            f"history has {history.ring.shape[1]} channels, kernel has {kernel.columns.shape[1]}")
    if history.capacity < kernel.n:
        raise StructuralError(f"history capacity {history.capacity} < kernel length {kernel.n}")
    out = np.empty(kernel.n)
    _naive_mode(history.newest_first(kernel.n), kernel.columns, out)
    return out


class NaiveMatcher:
    """Reference matcher that rescans the full window every step."""

    def __init__(self, kernels):
        if not isinstance(kernels, KernelSet):
            kernels = KernelSet(kernels)
        self.kernels = kernels
        self.history = HistoryBuffer(kernels.max_n)
        self._cols, self._offs, self._lengths = _flatten_columns(kernels)
        self._e = np.zeros(int(self._lengths.sum()))
        self._window = np.zeros((kernels.max_n, N_CHANNELS))
        self._mins = np.zeros(len(kernels))
        self._args = np.zeros(len(kernels), dtype=np.int64)
        self._ids = kernels.mode_ids
        self._ns = kernels.lengths
        self._t = 0

    def reset(self) -> None:
        self.history.clear()
        self._t = 0

    def error_vectors(self) -> dict:
        return {k.mode_id: naive_errors(k, self.history) for k in self.kernels}

    def step(self, frame, t_index: int | None = None) -> Prediction:
        angles, t_frame = _unpack_frame(frame)
        self.history.push(angles)
        h = self.history
        best, warm = _naive_step_all(h.ring, h.head, h.count, self._cols, self._offs, self._lengths,
                                     self._e, self._window, self._mins, self._args)
        if t_index is None:
            t_index = self._t if t_frame is None else t_frame
        self._t += 1
        j = int(self._args[best]) + 1
        return Prediction(self._ids[best], j, j / self._ns[best],
                          dict(zip(self._ids, self._mins.tolist())), warm, t_index)

    def run(self, stream) -> PredictionSeries:
        frames, t_index = _frames_array(stream)
        T, M = frames.shape[0], len(self.kernels)
        out_mode = np.zeros(T, dtype=np.int64)
        out_j = np.zeros(T, dtype=np.int64)
        out_min = np.zeros((T, M))
        out_warm = np.zeros(T, dtype=np.bool_)
        if T:
            h = self.history
            h.head, h.count = _naive_run(frames, h.ring, h.head, h.count, self._cols, self._offs,
                                         self._lengths, self._e, self._window,
                                         out_mode, out_j, out_min, out_warm)
        self._t += T
        return PredictionSeries(self._ids, self._ns, t_index, out_mode, out_j, out_min, out_warm)


def run_naive(kernels, stream) -> PredictionSeries:
    return NaiveMatcher(kernels).run(stream)
