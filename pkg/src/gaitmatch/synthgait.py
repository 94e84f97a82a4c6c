"""Seeded generator of four-channel gait-like angle streams with labels.

Each channel is a mean offset plus three sine harmonics of stride phase.
The numbers in :func:`default_profiles` are synthetic; they only need to be
smooth, periodic, distinct, and loosely gait-shaped. Stride lengths at the
default 230 Hz echo a typical slow/medium/fast/ramp/stair set (392 samples
for Slow down to 280 for Fast).

Phase convention: within a stride of ``L`` samples, the k-th sample
(0-based) is drawn at waveform phase ``k / L`` and labelled with phase
``(k + 1) / L``. Sample 0 is the heel strike and carries label ``1 / L``,
the last sample carries label 1.0, matching a kernel whose first column is
the heel-strike sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import N_CHANNELS, LabeledStream

DEFAULT_RATE_HZ = 230.0

# (amplitude deg, harmonic, phase rad)
Harmonic = tuple[float, int, float]


@dataclass(frozen=True)
class ChannelShape:
    offset: float
    harmonics: tuple[Harmonic, Harmonic, Harmonic]

    def __post_init__(self):
        if len(self.harmonics) != 3:
            raise ValueError("exactly three harmonic terms per channel")
        for amp, harm, _ in self.harmonics:
            if amp < 0:
                raise ValueError(f"harmonic amplitude must be >= 0, got {amp}")
            if int(harm) != harm or harm < 1:
                raise ValueError(f"harmonic number must be a positive integer, got {harm}")

    def evaluate(self, phase: np.ndarray) -> np.ndarray:
        out = np.full(phase.shape, float(self.offset))
        for amp, harm, ph in self.harmonics:
            out += amp * np.sin(2.0 * np.pi * harm * phase + ph)
        return out

    def half_cycle(self, scale: float = 1.0, offset_shift: float = 0.0) -> "ChannelShape":
        """Same trajectory delayed by half a stride (the contralateral leg)."""
        return ChannelShape(
            self.offset + offset_shift,
            tuple((a * scale, h, p + h * np.pi) for a, h, p in self.harmonics),
        )


@dataclass(frozen=True)
class ModeProfile:
    """Trajectory recipe for one locomotion mode.

    ``channels`` follow the matching order (R thigh, L thigh, R shank,
    L shank). The foot angles peak exactly at heel strike.
    """

    mode_id: str
    period_s: float
    channels: tuple[ChannelShape, ChannelShape, ChannelShape, ChannelShape]
    foot_amp_deg: float = 15.0
    foot_offset_deg: float = 5.0

    def __post_init__(self):
        if not self.period_s > 0:
            raise ValueError(f"period_s must be positive, got {self.period_s}")
        if len(self.channels) != N_CHANNELS:
            raise ValueError(f"need {N_CHANNELS} channel shapes")
        if self.foot_amp_deg < 0:
            raise ValueError("foot_amp_deg must be >= 0")

    def angles_at(self, phase: np.ndarray) -> np.ndarray:
        phase = np.asarray(phase, dtype=np.float64)
        return np.stack([ch.evaluate(phase) for ch in self.channels], axis=-1)

    def foot_at(self, phase: np.ndarray) -> np.ndarray:
        phase = np.asarray(phase, dtype=np.float64)

        def bump(p):
            w = 2.0 * np.pi * p
            return np.cos(w) + 0.5 * np.cos(2 * w) + 0.25 * np.cos(3 * w)

        right = self.foot_offset_deg + self.foot_amp_deg * bump(phase)
        left = self.foot_offset_deg + self.foot_amp_deg * bump(phase + 0.5)
        return np.stack([right, left], axis=-1)


@dataclass(frozen=True)
class GenConfig:
    sample_rate_hz: float = DEFAULT_RATE_HZ
    noise_sigma_deg: float = 0.0
    cadence_jitter_frac: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.noise_sigma_deg < 0:
            raise ValueError("noise_sigma_deg must be >= 0")
        if not 0.0 <= self.cadence_jitter_frac <= 0.2:
            raise ValueError("cadence_jitter_frac must lie in [0, 0.2]")


def _leg(thigh: ChannelShape, shank: ChannelShape, *, left_scale: float = 1.0):
    return (thigh, thigh.half_cycle(left_scale), shank, shank.half_cycle(left_scale))


def _level(mode_id: str, n: int, thigh_amp: float, shank_amp: float, knee_lag: float) -> ModeProfile:
    thigh = ChannelShape(8.0, ((thigh_amp, 1, 0.3), (0.22 * thigh_amp, 2, 1.1), (0.06 * thigh_amp, 3, 2.0)))
    shank = ChannelShape(-12.0, ((shank_amp, 1, -0.6 + knee_lag), (0.32 * shank_amp, 2, 0.4),
                                 (0.10 * shank_amp, 3, -1.2)))
    return ModeProfile(mode_id, n / DEFAULT_RATE_HZ, _leg(thigh, shank))


def default_profiles() -> list[ModeProfile]:
    """Seven synthetic modes: three walking speeds, ramp and stair up/down.

    Slow/Med and Med/Fast are deliberately close neighbours that differ by
    cadence and a few degrees of amplitude. SA and SD put their right-shank
    maximum at heel strike so either foot or shank can mark strides.
    """
    slow = _level("Slow", 392, 21.0, 28.0, 0.00)
    med = _level("Med", 313, 23.5, 31.0, 0.08)
    fast = _level("Fast", 280, 26.0, 34.0, 0.16)

    ra_thigh = ChannelShape(15.0, ((27.0, 1, 0.5), (5.0, 2, 1.6), (2.5, 3, 0.2)))
    ra_shank = ChannelShape(-6.0, ((30.0, 1, -0.3), (11.0, 2, 0.9), (3.0, 3, -2.0)))
    ra = ModeProfile("RA", 283 / DEFAULT_RATE_HZ, _leg(ra_thigh, ra_shank))

    rd_thigh = ChannelShape(3.0, ((20.0, 1, 0.1), (7.0, 2, 0.5), (1.0, 3, 1.5)))
    rd_shank = ChannelShape(-18.0, ((33.0, 1, -0.9), (8.0, 2, -0.2), (4.5, 3, 0.7)))
    rd = ModeProfile("RD", 286 / DEFAULT_RATE_HZ, _leg(rd_thigh, rd_shank))

    # stair shanks: all cosine terms with positive amplitude -> maximum at phase 0
    cos = np.pi / 2
    sa_thigh = ChannelShape(30.0, ((32.0, 1, 1.2), (6.0, 2, -0.5), (3.0, 3, 0.9)))
    sa_shank = ChannelShape(0.0, ((26.0, 1, cos), (9.0, 2, cos), (4.0, 3, cos)))
    sa = ModeProfile("SA", 318 / DEFAULT_RATE_HZ, _leg(sa_thigh, sa_shank))

    sd_thigh = ChannelShape(12.0, ((16.0, 1, -0.7), (9.0, 2, 2.2), (2.0, 3, 0.3)))
    sd_shank = ChannelShape(-22.0, ((24.0, 1, cos), (12.0, 2, cos), (5.0, 3, cos)))
    sd = ModeProfile("SD", 309 / DEFAULT_RATE_HZ, _leg(sd_thigh, sd_shank))

    return [slow, med, fast, ra, rd, sa, sd]


def profiles_by_id(profiles: Sequence[ModeProfile] | None = None) -> dict[str, ModeProfile]:
    return {p.mode_id: p for p in (profiles or default_profiles())}


def _stride_lengths(profile: ModeProfile, n_frames: int, cfg: GenConfig, rng) -> list[int]:
    base = profile.period_s * cfg.sample_rate_hz
    lengths, total = [], 0
    while total < n_frames:
        u = rng.uniform(-cfg.cadence_jitter_frac, cfg.cadence_jitter_frac) if cfg.cadence_jitter_frac else 0.0
        L = max(4, int(round(base * (1.0 + u))))
        lengths.append(L)
        total += L
    return lengths


def _generate(profile: ModeProfile, duration_s: float, cfg: GenConfig, rng, t0: int) -> LabeledStream:
    if not duration_s > 0:
        raise ValueError(f"duration_s must be positive, got {duration_s}")
    T = int(round(duration_s * cfg.sample_rate_hz))
    if T < 1:
        raise ValueError(f"duration {duration_s}s yields no samples at {cfg.sample_rate_hz} Hz")
    lengths = _stride_lengths(profile, T, cfg, rng)
    wave_phase = np.concatenate([np.arange(L) / L for L in lengths])[:T]
    label_phase = np.concatenate([np.arange(1, L + 1) / L for L in lengths])[:T]
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    hs = starts[starts < T]

    angles = profile.angles_at(wave_phase)
    foot = profile.foot_at(wave_phase)
    if cfg.noise_sigma_deg > 0:
        noise = rng.normal(0.0, cfg.noise_sigma_deg, size=(T, N_CHANNELS + 2))
        angles = angles + noise[:, :N_CHANNELS]
        foot = foot + noise[:, N_CHANNELS:]
    return LabeledStream(
        t_index=np.arange(t0, t0 + T, dtype=np.int64),
        angles=angles,
        foot=foot,
        modes=[profile.mode_id] * T,
        phase=label_phase,
        hs_indices=hs,
        sample_rate_hz=cfg.sample_rate_hz,
    )


def generate(profile: ModeProfile, duration_s: float, cfg: GenConfig = GenConfig()) -> LabeledStream:
    """Steady-state stream for one mode, ``round(duration_s * rate)`` frames long."""
    return _generate(profile, duration_s, cfg, np.random.default_rng(cfg.seed), 0)


def generate_session(
    profiles: Sequence[ModeProfile] | Mapping[str, ModeProfile],
    schedule: Sequence[tuple[str, float]],
    cfg: GenConfig = GenConfig(),
) -> LabeledStream:
    """Concatenate per-mode segments following ``schedule``.

    One random generator runs through the whole session, so a single-entry
    schedule reproduces :func:`generate` exactly.
    """
    if not schedule:
        raise ValueError("schedule must not be empty")
    table = dict(profiles) if isinstance(profiles, Mapping) else profiles_by_id(profiles)
    for mode_id, _ in schedule:
        if mode_id not in table:
            raise ValueError(f"unknown mode {mode_id!r}; known: {sorted(table)}")
    rng = np.random.default_rng(cfg.seed)
    parts, t0 = [], 0
    for mode_id, duration in schedule:
        part = _generate(table[mode_id], duration, cfg, rng, t0)
        parts.append(part)
        t0 += len(part)
    offsets = np.cumsum([0] + [len(p) for p in parts[:-1]])
    return LabeledStream(
        t_index=np.concatenate([p.t_index for p in parts]),
        angles=np.concatenate([p.angles for p in parts]),
        foot=np.concatenate([p.foot for p in parts]),
        modes=[m for p in parts for m in p.modes],
        phase=np.concatenate([p.phase for p in parts]),
        hs_indices=np.concatenate([p.hs_indices + o for p, o in zip(parts, offsets)]),
        sample_rate_hz=cfg.sample_rate_hz,
    )


def parse_schedule(text: str, default_duration: float | None = None) -> list[tuple[str, float]]:
    """Parse ``"Slow:10,Med:10"`` (or a bare ``"Slow"`` with a default duration)."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            mode_id, dur = item.split(":", 1)
            out.append((mode_id.strip(), float(dur)))
        elif default_duration is not None:
            out.append((item, float(default_duration)))
        else:
            raise ValueError(f"no duration for {item!r}")
    if not out:
        raise ValueError(f"empty schedule {text!r}")
    return out
