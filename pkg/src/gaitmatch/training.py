"""Kernel construction from steady-state recordings.

Heel strikes are peaks of a foot (or shank) angle. The frames between
consecutive heel strikes form one stride; strides are linearly resampled to
the rounded mean stride length and averaged column by column.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal import butter, find_peaks, sosfiltfilt

from .core import N_CHANNELS, InsufficientDataError, LabeledStream, ModeKernel, StructuralError

log = logging.getLogger(__name__)

MIN_STRIDE_SAMPLES = 4
HS_CHANNELS = ("rft", "rsh")


@dataclass(frozen=True)
class PeakConfig:
    """Heel-strike peak finder settings.

    ``lowpass_hz`` applies a zero-phase 2nd-order Butterworth filter before
    peak picking (``None`` disables it); sensor noise otherwise moves the
    maximum of a slow stride-rate signal by many samples.
    """

    min_separation_s: float = 0.5
    min_prominence_deg: float = 5.0
    lowpass_hz: float | None = 3.0

    def __post_init__(self):
        if not self.min_separation_s > 0:
            raise ValueError("min_separation_s must be > 0")
        if not self.min_prominence_deg > 0:
            raise ValueError("min_prominence_deg must be > 0")
        if self.lowpass_hz is not None and not self.lowpass_hz > 0:
            raise ValueError("lowpass_hz must be > 0 or None")


@dataclass(frozen=True, eq=False)
class StrideSegment:
    """Frames from one heel strike up to (not including) the next."""

    t_index: np.ndarray
    frames: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_index, dtype=np.int64)
        f = np.asarray(self.frames, dtype=np.float64)
        if f.ndim != 2 or f.shape[1] != N_CHANNELS or f.shape[0] != t.shape[0]:
            raise StructuralError(f"stride frames must be (L, {N_CHANNELS}) matching t_index")
        if f.shape[0] < MIN_STRIDE_SAMPLES:
            raise ValueError(f"stride shorter than {MIN_STRIDE_SAMPLES} samples")
        if np.any(np.diff(t) != 1):
            raise ValueError("stride frames must be contiguous in t_index")
        object.__setattr__(self, "t_index", t)
        object.__setattr__(self, "frames", f)

    def __len__(self):
        return self.frames.shape[0]


def _lowpass(signal: np.ndarray, rate: float, cutoff: float) -> np.ndarray:
    if cutoff >= 0.5 * rate:
        return signal
    sos = butter(2, cutoff, fs=rate, output="sos")
    if signal.shape[0] <= 3 * (2 * sos.shape[0] + 1):
        return signal
    return sosfiltfilt(sos, signal)


def detect_heel_strikes(signal, sample_rate_hz: float, cfg: PeakConfig = PeakConfig()) -> np.ndarray:
    """Sample indices of heel strikes, strictly ascending."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("signal must be one-dimensional")
    if not sample_rate_hz > 0:
        raise ValueError("sample_rate_hz must be positive")
    distance = max(1, int(round(cfg.min_separation_s * sample_rate_hz)))
    if x.shape[0] < 2 * distance:
        raise ValueError(f"signal of {x.shape[0]} samples is shorter than two peak separations ({2 * distance})")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite samples")
    if cfg.lowpass_hz is not None:
        x = _lowpass(x, sample_rate_hz, cfg.lowpass_hz)
    peaks, _ = find_peaks(x, distance=distance, prominence=cfg.min_prominence_deg)
    return peaks.astype(np.int64)


def segment_strides(frames, hs_indices, t_index=None) -> list[StrideSegment]:
    """Cut ``frames`` at consecutive heel strikes; short strides are dropped."""
    if isinstance(frames, LabeledStream):
        t_index = frames.t_index if t_index is None else t_index
        frames = frames.angles
    frames = np.asarray(frames, dtype=np.float64)
    if t_index is None:
        t_index = np.arange(frames.shape[0])
    hs = np.asarray(hs_indices, dtype=np.int64)
    if hs.size < 2:
        raise InsufficientDataError(f"need at least 2 heel strikes, got {hs.size}")
    if np.any(np.diff(hs) <= 0):
        raise ValueError("heel-strike indices must be strictly ascending")
    if hs[0] < 0 or hs[-1] > frames.shape[0]:
        raise ValueError("heel-strike index outside the stream")
    segments = []
    for a, b in zip(hs[:-1], hs[1:]):
        if b - a < MIN_STRIDE_SAMPLES:
            log.debug("dropping %d-sample stride at %d", b - a, a)
            continue
        t = np.asarray(t_index[a:b])
        if np.any(np.diff(t) != 1):
            log.debug("dropping stride at %d with a gap in t_index", a)
            continue
        segments.append(StrideSegment(t, frames[a:b]))
    if not segments:
        raise InsufficientDataError("no stride of usable length between heel strikes")
    return segments


def resample_stride(segment, n: int) -> np.ndarray:
    """Linearly interpolate a stride onto ``n`` uniformly spaced phase points.

    The first and last samples map exactly onto the first and last output
    rows. Returns an ``(n, 4)`` array.
    """
    if n < 2:
        raise ValueError(f"target length must be >= 2, got {n}")
    frames = segment.frames if isinstance(segment, StrideSegment) else np.asarray(segment, dtype=np.float64)
    L = frames.shape[0]
    if L == n:
        return frames.copy()
    src = np.arange(L, dtype=np.float64)
    dst = np.linspace(0.0, L - 1.0, n)
    return np.stack([np.interp(dst, src, frames[:, c]) for c in range(frames.shape[1])], axis=1)


def kernel_length(lengths) -> int:
    """Rounded (half-up) mean stride length."""
    mean = float(np.mean(lengths))
    return int(np.floor(mean + 0.5))


def build_kernel(mode_id: str, strides, sample_rate_hz: float = 230.0) -> ModeKernel:
    """Average strides into a kernel of ``round(mean length)`` columns."""
    strides = list(strides)
    if not strides:
        raise InsufficientDataError(f"no strides to build kernel {mode_id!r}")
    if len(strides) < 3:
        warnings.warn(f"kernel {mode_id!r} built from only {len(strides)} stride(s)", stacklevel=2)
    n = kernel_length([len(s) for s in strides])
    stack = np.stack([resample_stride(s, n) for s in strides])
    return ModeKernel(mode_id, _exact_mean(stack), sample_rate_hz)


def _exact_mean(stack: np.ndarray) -> np.ndarray:
    """Mean over axis 0, correctly rounded from the exact rational sum.

    The result depends only on the multiset of values per cell and their
    ratio to the count, so it is unchanged by reordering strides or by
    repeating every stride the same number of times.
    """
    k = stack.shape[0]
    flat = stack.reshape(k, -1).T.tolist()
    out = np.array([float(sum(map(Fraction, cell)) / k) for cell in flat])
    return out.reshape(stack.shape[1:])


def hs_signal(stream: LabeledStream, channel: str) -> np.ndarray:
    if channel == "rft":
        if stream.foot is None:
            raise StructuralError("stream has no foot channels; use --hs-channel rsh or add theta_rft")
        return stream.foot[:, 0]
    if channel == "rsh":
        return stream.angles[:, 2]
    raise ValueError(f"hs channel must be one of {HS_CHANNELS}, got {channel!r}")


@dataclass
class TrainingResult:
    kernel: ModeKernel
    strides: list
    hs_indices: np.ndarray


def train_kernel(
    stream: LabeledStream,
    mode_id: str,
    hs_channel: str = "rft",
    cfg: PeakConfig = PeakConfig(),
    use_labels: bool = True,
) -> TrainingResult:
    """Full training path: heel strikes, strides, kernel.

    Heel strikes stored with the stream (an override column or generator
    ground truth) take precedence over peak detection when ``use_labels``.
    """
    if use_labels and stream.hs_indices is not None and len(stream.hs_indices) >= 2:
        hs = stream.hs_indices
    else:
        hs = detect_heel_strikes(hs_signal(stream, hs_channel), stream.sample_rate_hz, cfg)
    strides = segment_strides(stream, hs)
    kernel = build_kernel(mode_id, strides, stream.sample_rate_hz)
    return TrainingResult(kernel, strides, np.asarray(hs))
