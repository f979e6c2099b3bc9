"""Shared domain types: audio buffers, time-frequency matrices, spike trains,
and encoder parameter sets.

All types are immutable after construction (backing arrays are marked
read-only) and safe to share across threads. Operations are pure functions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

#: Channel count of the time-frequency front-ends feeding the encoders.
SOURCE_CHANNELS = 24

#: Frame rate of the front-end outputs after temporal downsampling.
DEFAULT_FRAME_RATE_HZ = 1000.0


class SilentUtteranceWarning(UserWarning):
    """An all-zero representation was normalized (silent input, not an error)."""


class TFKind(Enum):
    SPECTROGRAM = "spectrogram"
    COCHLEAGRAM = "cochleagram"
    DECODED = "decoded"


class Polarity(Enum):
    ON = 0
    OFF = 1
    UNIPOLAR = 2


def _readonly(values, dtype, ndim, name):
    arr = np.array(values, dtype=dtype)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AudioSignal:
    """Mono sample buffer with its sampling rate (20 kHz in this toolkit)."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "samples", _readonly(self.samples, np.float64, 1, "samples"))
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True, eq=False)
class TFRepresentation:
    """Real-valued channels x frames matrix with its frame rate and, for
    front-end outputs, the per-channel center frequencies (ascending)."""

    values: np.ndarray
    frame_rate_hz: float
    center_freqs_hz: np.ndarray
    kind: TFKind

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values, np.float64, 2, "values"))
        object.__setattr__(
            self, "center_freqs_hz", _readonly(self.center_freqs_hz, np.float64, 1, "center_freqs_hz")
        )
        if not self.frame_rate_hz > 0:
            raise ValueError("frame_rate_hz must be positive")
        if self.kind is not TFKind.DECODED:
            if len(self.center_freqs_hz) != self.num_channels:
                raise ValueError(
                    f"{self.num_channels} channels but {len(self.center_freqs_hz)} center frequencies"
                )
            if np.any(np.diff(self.center_freqs_hz) <= 0):
                raise ValueError("center_freqs_hz must be strictly ascending")

    @property
    def num_channels(self) -> int:
        return self.values.shape[0]

    @property
    def num_frames(self) -> int:
        return self.values.shape[1]

    @property
    def duration_s(self) -> float:
        return self.num_frames / self.frame_rate_hz


@dataclass(frozen=True)
class SpikeEvent:
    channel: int
    polarity: Polarity
    time_s: float


@dataclass(frozen=True, eq=False)
class SpikeTrainSet:
    """Ordered spike events plus the source dimensions used for density
    accounting.

    Events are stored as parallel arrays (channel address, polarity code,
    time in seconds) sorted by the total order (time_s, channel). The
    constructor does not enforce ordering; see :func:`validate_spike_train`
    and :meth:`build_sorted`.
    """

    channels: np.ndarray
    times_s: np.ndarray
    polarities: np.ndarray
    num_logical_channels: int
    source_channels: int
    source_frames: int
    frame_rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "channels", _readonly(self.channels, np.int64, 1, "channels"))
        object.__setattr__(self, "times_s", _readonly(self.times_s, np.float64, 1, "times_s"))
        object.__setattr__(self, "polarities", _readonly(self.polarities, np.int8, 1, "polarities"))
        if not len(self.channels) == len(self.times_s) == len(self.polarities):
            raise ValueError("channels, times_s and polarities must have equal length")
        if self.num_logical_channels <= 0:
            raise ValueError("num_logical_channels must be positive")
        if self.source_channels < 0 or self.source_frames < 0:
            raise ValueError("source dimensions must be non-negative")
        if not self.frame_rate_hz > 0:
            raise ValueError("frame_rate_hz must be positive")

    @classmethod
    def build_sorted(cls, channels, times_s, polarities, *, num_logical_channels,
                     source_channels, source_frames, frame_rate_hz) -> "SpikeTrainSet":
        """Assemble a train, sorting events by (time, channel)."""
        channels = np.asarray(channels, dtype=np.int64)
        times_s = np.asarray(times_s, dtype=np.float64)
        polarities = np.asarray(polarities, dtype=np.int8)
        order = np.lexsort((channels, times_s))
        return cls(channels[order], times_s[order], polarities[order],
                   num_logical_channels=num_logical_channels,
                   source_channels=source_channels,
                   source_frames=source_frames,
                   frame_rate_hz=frame_rate_hz)

    @classmethod
    def from_events(cls, events, *, num_logical_channels, source_channels,
                    source_frames, frame_rate_hz) -> "SpikeTrainSet":
        events = list(events)
        return cls(
            np.array([e.channel for e in events], dtype=np.int64),
            np.array([e.time_s for e in events], dtype=np.float64),
            np.array([e.polarity.value for e in events], dtype=np.int8),
            num_logical_channels=num_logical_channels,
            source_channels=source_channels,
            source_frames=source_frames,
            frame_rate_hz=frame_rate_hz,
        )

    def __len__(self) -> int:
        return len(self.channels)

    @property
    def events(self) -> list[SpikeEvent]:
        return [
            SpikeEvent(int(c), Polarity(int(p)), float(t))
            for c, p, t in zip(self.channels, self.polarities, self.times_s)
        ]

    @property
    def duration_s(self) -> float:
        return self.source_frames / self.frame_rate_hz

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpikeTrainSet):
            return NotImplemented
        return (
            self.num_logical_channels == other.num_logical_channels
            and self.source_channels == other.source_channels
            and self.source_frames == other.source_frames
            and self.frame_rate_hz == other.frame_rate_hz
            and np.array_equal(self.channels, other.channels)
            and np.array_equal(self.times_s, other.times_s)
            and np.array_equal(self.polarities, other.polarities)
        )


class SodMode(Enum):
    FULL = "full"
    ON_ONLY = "on_only"
    OFF_ONLY = "off_only"


@dataclass(frozen=True)
class SodParams:
    delta: float
    mode: SodMode = SodMode.FULL

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be > 0")

    def describe(self) -> str:
        return f"sod(delta={self.delta:g},mode={self.mode.value})"


@dataclass(frozen=True)
class TtfsParams:
    delta: float

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie strictly inside (0, 1)")

    def describe(self) -> str:
        return f"ttfs(delta={self.delta:g})"


@dataclass(frozen=True)
class LifParams:
    delta: float
    tau_s: tuple[float, ...]

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be > 0")
        object.__setattr__(self, "tau_s", tuple(float(t) for t in self.tau_s))
        if any(t <= 0 for t in self.tau_s):
            raise ValueError("all time constants must be > 0")

    def describe(self) -> str:
        return f"lif(delta={self.delta:g},tau=[{min(self.tau_s):g},{max(self.tau_s):g}])"


@dataclass(frozen=True)
class BsaParams:
    filter_taps: tuple[float, ...]
    threshold: float

    def __post_init__(self):
        object.__setattr__(self, "filter_taps", tuple(float(t) for t in self.filter_taps))
        if len(self.filter_taps) == 0:
            raise ValueError("filter_taps must be non-empty")
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")

    def describe(self) -> str:
        return f"bsa(taps={len(self.filter_taps)},threshold={self.threshold:g})"


EncoderParams = Union[SodParams, TtfsParams, LifParams, BsaParams]


def normalize(tf: TFRepresentation) -> TFRepresentation:
    """Scale a representation by its single global maximum.

    The maximal element maps to exactly 1.0. An all-zero input is returned
    unchanged and raises :class:`SilentUtteranceWarning` so corpus sweeps
    can proceed past silent utterances.
    """
    vals = tf.values
    if not np.all(np.isfinite(vals)):
        raise ValueError("values must all be finite")
    if vals.size and np.any(vals < 0):
        raise ValueError("values must be non-negative before normalization")
    peak = float(vals.max()) if vals.size else 0.0
    if peak == 0.0:
        warnings.warn("all-zero representation (silent utterance)",
                      SilentUtteranceWarning, stacklevel=2)
        return TFRepresentation(vals, tf.frame_rate_hz, tf.center_freqs_hz, tf.kind)
    return TFRepresentation(vals / peak, tf.frame_rate_hz, tf.center_freqs_hz, tf.kind)


def validate_spike_train(s: SpikeTrainSet) -> list[str]:
    """Diagnostic check returning every invariant violation (empty list = ok)."""
    violations: list[str] = []
    if s.num_logical_channels not in (24, 48):
        violations.append(
            f"num_logical_channels {s.num_logical_channels} not in {{24, 48}}"
        )
    ch, t = s.channels, s.times_s
    for i in range(1, len(s)):
        if (t[i], ch[i]) < (t[i - 1], ch[i - 1]):
            violations.append(f"events not sorted by (time, channel) at index {i}")
            break
    for i in np.nonzero((ch < 0) | (ch >= s.num_logical_channels))[0]:
        violations.append(
            f"event {i}: channel {ch[i]} out of range for {s.num_logical_channels} logical channels"
        )
    for i in np.nonzero(t < 0)[0]:
        violations.append(f"event {i}: negative time {t[i]}")
    if s.source_frames > 0:
        limit = s.duration_s
        for i in np.nonzero(t > limit)[0]:
            violations.append(f"event {i}: time {t[i]} exceeds duration {limit}")
    return violations
