"""Domain types and the argmin/phase arithmetic shared by both matchers.

Angles are degrees throughout. The four matching channels are always ordered
``[right-thigh, left-thigh, right-shank, left-shank]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

CHANNELS = ("theta_rth", "theta_lth", "theta_rsh", "theta_lsh")
N_CHANNELS = len(CHANNELS)


class GaitMatchError(Exception):
    """Base class for errors raised by this package."""


class DataError(GaitMatchError, ValueError):
    """Non-finite or otherwise unusable numeric input."""


class StructuralError(GaitMatchError, ValueError):
    """Shapes or identities of inputs do not line up."""


class InsufficientDataError(GaitMatchError, ValueError):
    """Not enough strides / heel strikes to do the requested work."""


class FormatError(GaitMatchError, ValueError):
    """A file does not follow the expected layout."""


def _as_angles(values, *, what: str = "angles") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (N_CHANNELS,):
        raise StructuralError(f"{what} must have shape ({N_CHANNELS},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{what} contain non-finite values: {arr.tolist()}")
    return arr


@dataclass(frozen=True)
class SampleFrame:
    """One timestep of the four segment angles."""

    t_index: int
    angles: np.ndarray

    def __post_init__(self):
        arr = _as_angles(self.angles)
        arr.setflags(write=False)
        object.__setattr__(self, "angles", arr)


@dataclass(frozen=True, eq=False)
class ModeKernel:
    """Averaged one-stride trajectory for a locomotion mode.

    ``columns[j - 1]`` holds the mean angles at the j-th sample of the stride;
    column 1 is the heel-strike sample. The kernel is never physically doubled,
    circular windows are taken modulo ``n``.
    """

    mode_id: str
    columns: np.ndarray
    sample_rate_hz: float = 230.0

    def __post_init__(self):
        if not isinstance(self.mode_id, str) or not self.mode_id:
            raise ValueError("mode_id must be a non-empty string")
        cols = np.array(self.columns, dtype=np.float64, copy=True)
        if cols.ndim != 2 or cols.shape[1] != N_CHANNELS:
            raise StructuralError(f"kernel columns must be (n, {N_CHANNELS}), got {cols.shape}")
        if cols.shape[0] < 2:
            raise ValueError(f"kernel length must be >= 2, got {cols.shape[0]}")
        if not np.all(np.isfinite(cols)):
            raise DataError(f"kernel {self.mode_id!r} has non-finite columns")
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise ValueError("sample_rate_hz must be positive")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @property
    def n(self) -> int:
        return self.columns.shape[0]

    @property
    def resolution(self) -> float:
        """Finest detectable phase step, 1/n."""
        return 1.0 / self.n

    def __eq__(self, other):
        if not isinstance(other, ModeKernel):
            return NotImplemented
        return (
            self.mode_id == other.mode_id
            and self.sample_rate_hz == other.sample_rate_hz
            and np.array_equal(self.columns, other.columns)
        )

    def __hash__(self):
        return hash((self.mode_id, self.n, self.sample_rate_hz))

    def __repr__(self):
        return f"ModeKernel(mode_id={self.mode_id!r}, n={self.n}, sample_rate_hz={self.sample_rate_hz})"


class KernelSet(Sequence[ModeKernel]):
    """Ordered collection of kernels with unique mode ids.

    Declared order is significant: it breaks ties between modes.
    """

    def __init__(self, kernels):
        kernels = list(kernels)
        if not kernels:
            raise ValueError("a KernelSet needs at least one kernel")
        for k in kernels:
            if not isinstance(k, ModeKernel):
                raise TypeError(f"expected ModeKernel, got {type(k).__name__}")
        ids = [k.mode_id for k in kernels]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate mode ids in {ids}")
        self._kernels = tuple(kernels)
        self._index = {mid: i for i, mid in enumerate(ids)}

    def __getitem__(self, i):
        return self._kernels[i]

    def __len__(self):
        return len(self._kernels)

    def __iter__(self) -> Iterator[ModeKernel]:
        return iter(self._kernels)

    def __repr__(self):
        return f"KernelSet({[k.mode_id for k in self._kernels]})"

    @property
    def mode_ids(self) -> tuple[str, ...]:
        return tuple(k.mode_id for k in self._kernels)

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(k.n for k in self._kernels)

    @property
    def max_n(self) -> int:
        return max(self.lengths)

    def index(self, mode_id: str) -> int:
        try:
            return self._index[mode_id]
        except KeyError:
            raise KeyError(f"unknown mode {mode_id!r}") from None

    def by_id(self, mode_id: str) -> ModeKernel:
        return self._kernels[self.index(mode_id)]


@dataclass(frozen=True)
class Prediction:
    """Mode and phase estimate for one timestep.

    ``j_star`` is 1-based and ``phase == j_star / n`` of the winning kernel.
    """

    mode_id: str
    j_star: int
    phase: float
    min_error_per_mode: Mapping[str, float] = field(default_factory=dict)
    warm: bool = False
    t_index: int = -1


def phase_of(j_star: int, n: int) -> float:
    """Map a 1-based kernel index to gait phase in (0, 1]."""
    if n < 1:
        raise ValueError(f"kernel length must be positive, got {n}")
    if not 1 <= j_star <= n:
        raise ValueError(f"j_star={j_star} outside [1, {n}]")
    return j_star / n


def select_from_minima(minima, argmins) -> tuple[int, int]:
    """Pick the winning mode from per-mode minima.

    ``argmins`` are 0-based positions of each mode's first minimum. Returns
    ``(mode_index, j_star)``; ties go to the earlier mode.
    """
    best = 0
    best_val = minima[0]
    for m in range(1, len(minima)):
        if minima[m] < best_val:
            best, best_val = m, minima[m]
    return best, int(argmins[best]) + 1


def select_prediction(
    per_mode_errors: Mapping[str, Sequence[float]],
    *,
    warm: bool = True,
    t_index: int = -1,
) -> Prediction:
    """Global argmin over (mode, j) of per-mode error vectors.

    Modes are considered in mapping order; on equal errors the earlier mode
    wins, then the smaller j.
    """
    if not per_mode_errors:
        raise ValueError("no error vectors given")
    ids, lengths, minima, argmins = [], [], [], []
    for mode_id, errs in per_mode_errors.items():
        e = np.asarray(errs, dtype=np.float64)
        if e.ndim != 1 or e.size == 0:
            raise ValueError(f"error vector for {mode_id!r} must be a non-empty 1-D array")
        if np.isnan(e).any():
            raise DataError(f"NaN in error vector for {mode_id!r}")
        j = int(np.argmin(e))
        ids.append(mode_id)
        lengths.append(e.size)
        minima.append(float(e[j]))
        argmins.append(j)
    best, j_star = select_from_minima(minima, argmins)
    return Prediction(
        mode_id=ids[best],
        j_star=j_star,
        phase=phase_of(j_star, lengths[best]),
        min_error_per_mode=dict(zip(ids, minima)),
        warm=warm,
        t_index=t_index,
    )


@dataclass(eq=False)
class LabeledStream:
    """A recorded or synthetic stream, optionally with ground truth.

    ``foot`` holds the right/left foot angles used only for heel-strike
    detection. ``modes``/``phase`` are per-frame labels and ``hs_indices``
    are known heel-strike rows (positions in the stream, not t_index values).
    """

    t_index: np.ndarray
    angles: np.ndarray
    foot: np.ndarray | None = None
    modes: list | None = None
    phase: np.ndarray | None = None
    hs_indices: np.ndarray | None = None
    sample_rate_hz: float = 230.0

    def __post_init__(self):
        self.t_index = np.asarray(self.t_index, dtype=np.int64)
        self.angles = np.asarray(self.angles, dtype=np.float64).reshape(-1, N_CHANNELS)
        T = self.t_index.shape[0]
        if self.angles.shape[0] != T:
            raise StructuralError(f"{self.angles.shape[0]} angle rows for {T} t_index values")
        if T > 1 and np.any(np.diff(self.t_index) <= 0):
            raise DataError("t_index must be strictly increasing")
        if self.foot is not None:
            self.foot = np.asarray(self.foot, dtype=np.float64).reshape(-1, 2)
            if self.foot.shape[0] != T:
                raise StructuralError("foot channel length mismatch")
        if (self.modes is None) != (self.phase is None):
            raise StructuralError("modes and phase labels must be given together")
        if self.modes is not None:
            self.modes = [str(m) for m in self.modes]
            self.phase = np.asarray(self.phase, dtype=np.float64)
            if len(self.modes) != T or self.phase.shape[0] != T:
                raise StructuralError("label length mismatch")
        if self.hs_indices is not None:
            self.hs_indices = np.asarray(self.hs_indices, dtype=np.int64)

    def __len__(self):
        return self.t_index.shape[0]

    @property
    def has_labels(self) -> bool:
        return self.modes is not None

    def frames(self) -> Iterator[SampleFrame]:
        for t, a in zip(self.t_index.tolist(), self.angles):
            yield SampleFrame(t, a)

    def slice(self, start: int, stop: int) -> "LabeledStream":
        hs = None
        if self.hs_indices is not None:
            keep = (self.hs_indices >= start) & (self.hs_indices < stop)
            hs = self.hs_indices[keep] - start
        return LabeledStream(
            t_index=self.t_index[start:stop],
            angles=self.angles[start:stop],
            foot=None if self.foot is None else self.foot[start:stop],
            modes=None if self.modes is None else self.modes[start:stop],
            phase=None if self.phase is None else self.phase[start:stop],
            hs_indices=hs,
            sample_rate_hz=self.sample_rate_hz,
        )

    def equals(self, other: "LabeledStream") -> bool:
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(np.asarray(a), np.asarray(b))

        return (
            np.array_equal(self.t_index, other.t_index)
            and np.array_equal(self.angles, other.angles)
            and same(self.foot, other.foot)
            and (self.modes == other.modes)
            and same(self.phase, other.phase)
            and same(self.hs_indices, other.hs_indices)
        )
