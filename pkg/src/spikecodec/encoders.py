"""Spike encoders.

Four ways to turn a normalized channels x frames representation into spike
events: threshold-crossing of amplitude changes (send-on-delta), latency
coding of amplitudes (time-to-first-spike), leaky integration with reset
(LIF), and FIR stimulus estimation (BSA), plus the BSA filter/threshold
grid search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from . import codec, metrics
from .core import Polarity, SodMode, SpikeTrainSet, TFRepresentation


@dataclass(frozen=True)
class LifTauMap:
    """Per-channel time constants, spread over [tau_min, tau_max] so that
    low center frequencies integrate slowly and high ones quickly."""

    tau_min_s: float = 0.020
    tau_max_s: float = 0.040

    def __post_init__(self):
        if not 0 < self.tau_min_s < self.tau_max_s:
            raise ValueError("require 0 < tau_min_s < tau_max_s")


@dataclass(frozen=True)
class BsaGrid:
    cutoff_hz_candidates: tuple[float, ...]
    filter_len_candidates: tuple[int, ...]
    threshold_candidates: tuple[float, ...]
    subset_fraction: float = 0.10

    def __post_init__(self):
        object.__setattr__(self, "cutoff_hz_candidates", tuple(self.cutoff_hz_candidates))
        object.__setattr__(self, "filter_len_candidates", tuple(self.filter_len_candidates))
        object.__setattr__(self, "threshold_candidates", tuple(self.threshold_candidates))
        if not (self.cutoff_hz_candidates and self.filter_len_candidates
                and self.threshold_candidates):
            raise ValueError("all candidate lists must be non-empty")
        if not 0 < self.subset_fraction <= 1:
            raise ValueError("subset_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class BsaOptimum:
    filter_taps: tuple[float, ...]
    threshold: float
    snr_db: float
    cutoff_hz: float
    num_taps: int


def sod_spike_frames(values, delta: float) -> tuple[list[int], list[int]]:
    """Send-on-delta scan of one channel.

    The reference amplitude starts at the first sample and moves to the
    current sample whenever the deviation from it reaches ``delta`` in
    either direction; upward crossings are ON frames, downward OFF frames.
    """
    vals = np.asarray(values, dtype=np.float64).tolist()
    on: list[int] = []
    off: list[int] = []
    if not vals:
        return on, off
    ref = vals[0]
    for t, v in enumerate(vals):
        if v - ref >= delta:
            on.append(t)
            ref = v
        elif ref - v >= delta:
            off.append(t)
            ref = v
    return on, off


def encode_sod(tf: TFRepresentation, delta: float, mode: SodMode = SodMode.FULL) -> SpikeTrainSet:
    """Send-on-delta encoding.

    FULL mode keeps ON events at the source channel address and OFF events
    at address ``channel + num_channels`` (48 logical channels for a
    24-channel input). ON_ONLY / OFF_ONLY run the same scan but retain a
    single polarity on 24 logical channels.
    """
    if not delta > 0:
        raise ValueError("delta must be > 0")
    nch = tf.num_channels
    channels: list[int] = []
    frames: list[int] = []
    pols: list[int] = []
    for i in range(nch):
        on, off = sod_spike_frames(tf.values[i], delta)
        if mode in (SodMode.FULL, SodMode.ON_ONLY):
            channels.extend([i] * len(on))
            frames.extend(on)
            pols.extend([Polarity.ON.value] * len(on))
        if mode is SodMode.FULL:
            channels.extend([i + nch] * len(off))
            frames.extend(off)
            pols.extend([Polarity.OFF.value] * len(off))
        elif mode is SodMode.OFF_ONLY:
            channels.extend([i] * len(off))
            frames.extend(off)
            pols.extend([Polarity.OFF.value] * len(off))
    times = np.asarray(frames, dtype=np.float64) / tf.frame_rate_hz
    return SpikeTrainSet.build_sorted(
        channels, times, pols,
        num_logical_channels=2 * nch if mode is SodMode.FULL else nch,
        source_channels=nch,
        source_frames=tf.num_frames,
        frame_rate_hz=tf.frame_rate_hz,
    )


def encode_ttfs(tf: TFRepresentation, delta: float) -> SpikeTrainSet:
    """Latency coding: every sample at or above ``delta`` emits one spike at
    the continuous time ``(n + log(y[n]) / log(delta)) / frame_rate``.

    A full-scale sample spikes exactly at its frame time; a sample equal to
    ``delta`` spikes one full frame period later; smaller samples emit
    nothing.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie strictly inside (0, 1)")
    ts = 1.0 / tf.frame_rate_hz
    log_delta = math.log(delta)
    channels: list[np.ndarray] = []
    times: list[np.ndarray] = []
    for i in range(tf.num_channels):
        row = tf.values[i]
        n = np.nonzero(row >= delta)[0]
        if n.size == 0:
            continue
        t = (n + np.log(row[n]) / log_delta) * ts
        channels.append(np.full(n.size, i, dtype=np.int64))
        times.append(t)
    ch = np.concatenate(channels) if channels else np.empty(0, dtype=np.int64)
    tm = np.concatenate(times) if times else np.empty(0, dtype=np.float64)
    return SpikeTrainSet.build_sorted(
        ch, tm, np.full(len(ch), Polarity.UNIPOLAR.value, dtype=np.int8),
        num_logical_channels=tf.num_channels,
        source_channels=tf.num_channels,
        source_frames=tf.num_frames,
        frame_rate_hz=tf.frame_rate_hz,
    )


def lif_time_constants(center_freqs_hz, tau_map: LifTauMap) -> np.ndarray:
    """Map center frequencies to time constants, linear in 1/f.

    The lowest positive center gets ``tau_max``, the highest ``tau_min``;
    non-positive centers (a DC bin) clamp to ``tau_max``.
    """
    f = np.asarray(center_freqs_hz, dtype=np.float64)
    taus = np.full(f.shape, tau_map.tau_max_s)
    pos = f > 0
    if not np.any(pos):
        return taus
    fmin = float(f[pos].min())
    fmax = float(f[pos].max())
    if fmin == fmax:
        taus[pos] = tau_map.tau_min_s
        return taus
    span = tau_map.tau_max_s - tau_map.tau_min_s
    ratio = (1.0 / f[pos] - 1.0 / fmax) / (1.0 / fmin - 1.0 / fmax)
    taus[pos] = tau_map.tau_min_s + span * ratio
    return taus


def lif_spike_frames(values, delta: float, tau_s: float, frame_rate_hz: float) -> list[int]:
    """Forward-Euler leaky integration of one channel.

    The membrane potential is checked against the threshold at each frame
    time before that frame's input is integrated, so a constant unit input
    with tau = 20 ms and threshold 0.5 first fires at frame 14. On firing
    the potential resets to zero; there is no refractory period.
    """
    a = (1.0 / frame_rate_hz) / tau_s
    v = 0.0
    frames: list[int] = []
    for n, y in enumerate(np.asarray(values, dtype=np.float64).tolist()):
        if v >= delta:
            frames.append(n)
            v = 0.0
        v += a * (y - v)
    return frames


def encode_lif(tf: TFRepresentation, delta: float, tau_map: LifTauMap | None = None) -> SpikeTrainSet:
    """Leaky integrate-and-fire encoding with per-channel time constants."""
    if not delta > 0:
        raise ValueError("delta must be > 0")
    if len(tf.center_freqs_hz) != tf.num_channels:
        raise ValueError("channel center frequencies required for the tau map")
    tau_map = tau_map or LifTauMap()
    taus = lif_time_constants(tf.center_freqs_hz, tau_map)
    channels: list[int] = []
    frames: list[int] = []
    for i in range(tf.num_channels):
        fired = lif_spike_frames(tf.values[i], delta, taus[i], tf.frame_rate_hz)
        channels.extend([i] * len(fired))
        frames.extend(fired)
    times = np.asarray(frames, dtype=np.float64) / tf.frame_rate_hz
    return SpikeTrainSet.build_sorted(
        channels, times, np.full(len(channels), Polarity.UNIPOLAR.value, dtype=np.int8),
        num_logical_channels=tf.num_channels,
        source_channels=tf.num_channels,
        source_frames=tf.num_frames,
        frame_rate_hz=tf.frame_rate_hz,
    )


def bsa_spike_frames(values, filter_taps, threshold: float) -> list[int]:
    """Stimulus-estimation scan of one channel.

    At each frame t on a working copy r of the signal, compare the L1 cost
    of matching the filter (e1 = sum |r[t+k] - h[k]|) against the cost of
    matching nothing (e2 = sum |r[t+k]|), both truncated at the signal end.
    When e1 <= e2 - threshold a spike is emitted and the filter subtracted
    in place; r is allowed to go negative.

    Both error sums use exact summation so the spike decision does not
    depend on accumulation order.
    """
    taps = np.asarray(filter_taps, dtype=np.float64)
    r = np.array(values, dtype=np.float64)
    n = len(r)
    frames: list[int] = []
    for t in range(n):
        k = min(len(taps), n - t)
        seg = r[t : t + k]
        e1 = math.fsum(np.abs(seg - taps[:k]).tolist())
        e2 = math.fsum(np.abs(seg).tolist())
        if e1 <= e2 - threshold:
            frames.append(t)
            seg -= taps[:k]
    return frames


def encode_bsa(tf: TFRepresentation, filter_taps, threshold: float) -> SpikeTrainSet:
    """FIR stimulus-estimation encoding on 24 unipolar channels."""
    taps = np.asarray(filter_taps, dtype=np.float64)
    if taps.size == 0:
        raise ValueError("filter_taps must be non-empty")
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    channels: list[int] = []
    frames: list[int] = []
    for i in range(tf.num_channels):
        fired = bsa_spike_frames(tf.values[i], taps, threshold)
        channels.extend([i] * len(fired))
        frames.extend(fired)
    times = np.asarray(frames, dtype=np.float64) / tf.frame_rate_hz
    return SpikeTrainSet.build_sorted(
        channels, times, np.full(len(channels), Polarity.UNIPOLAR.value, dtype=np.int8),
        num_logical_channels=tf.num_channels,
        source_channels=tf.num_channels,
        source_frames=tf.num_frames,
        frame_rate_hz=tf.frame_rate_hz,
    )


def design_lowpass_taps(cutoff_hz: float, num_taps: int, frame_rate_hz: float = 1000.0) -> np.ndarray:
    """Raised-cosine-windowed sinc low-pass, taps scaled to unit sum."""
    if not 0 < cutoff_hz < frame_rate_hz / 2:
        raise ValueError("cutoff_hz must lie in (0, frame_rate/2)")
    if num_taps < 1:
        raise ValueError("num_taps must be >= 1")
    taps = sps.firwin(num_taps, cutoff_hz, window="hann", fs=frame_rate_hz)
    return taps / taps.sum()


def optimize_bsa(training: list[TFRepresentation], grid: BsaGrid, seed: int) -> BsaOptimum:
    """Grid-search the BSA filter and threshold on a seeded training subset.

    A deterministic ``subset_fraction`` sample of the utterances is drawn
    from ``seed``; each (cutoff, length, threshold) point is scored by the
    mean encode-decode reconstruction SNR over the subset and the best mean
    wins, ties broken by enumeration order (cutoff-major, then length, then
    threshold).
    """
    if not training:
        raise ValueError("training set must be non-empty")
    rng = np.random.default_rng(seed)
    n_pick = max(1, round(grid.subset_fraction * len(training)))
    picks = np.sort(rng.permutation(len(training))[:n_pick])
    subset = [training[i] for i in picks]
    if not subset:
        raise ValueError("training subset is empty")
    frame_rate = subset[0].frame_rate_hz
    best: BsaOptimum | None = None
    for cutoff in grid.cutoff_hz_candidates:
        for num_taps in grid.filter_len_candidates:
            taps = design_lowpass_taps(cutoff, num_taps, frame_rate)
            for threshold in grid.threshold_candidates:
                snrs = []
                for tf in subset:
                    train = encode_bsa(tf, taps, threshold)
                    recon = codec.decode_bsa(train, taps)
                    snrs.append(metrics.snr(tf, recon))
                mean_snr = float(np.mean(snrs))
                if best is None or mean_snr > best.snr_db:
                    best = BsaOptimum(tuple(taps), float(threshold), mean_snr,
                                      float(cutoff), int(num_taps))
    assert best is not None
    return best
