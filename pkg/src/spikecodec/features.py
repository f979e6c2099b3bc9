"""Time-frequency front-ends.

Both front-ends reduce 20 kHz audio to 24 channels sampled at 1000 Hz:
a magnitude STFT with a short Tukey window, and a cochlear filterbank
with envelope extraction, compression, and lateral inhibition.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as sps

from .core import AudioSignal, TFKind, TFRepresentation, normalize


class Frontend(Enum):
    SPECTROGRAM = "spectrogram"
    COCHLEAGRAM = "cochleagram"


@dataclass(frozen=True)
class SpectrogramConfig:
    window_ms: float = 5.0
    hop_ms: float = 0.5
    tukey_alpha: float = 0.25
    num_bins_kept: int = 24
    post_downsample: int = 2

    def __post_init__(self):
        if not self.window_ms > self.hop_ms > 0:
            raise ValueError("require window_ms > hop_ms > 0")
        if self.num_bins_kept < 1:
            raise ValueError("num_bins_kept must be >= 1")
        if not 0 <= self.tukey_alpha <= 1:
            raise ValueError("tukey_alpha must lie in [0, 1]")
        if self.post_downsample < 1:
            raise ValueError("post_downsample must be >= 1")


@dataclass(frozen=True)
class CochleagramConfig:
    num_filters: int = 24
    fmin_hz: float = 100.0
    fmax_hz: float = 4500.0
    filter_order: int = 4
    env_downsample: int = 10
    lateral_alpha: float = 0.25
    post_downsample: int = 2

    def __post_init__(self):
        if not self.fmin_hz < self.fmax_hz:
            raise ValueError("require fmin_hz < fmax_hz")
        if self.num_filters < 2:
            raise ValueError("num_filters must be >= 2")
        if self.filter_order < 1:
            raise ValueError("filter_order must be >= 1")
        if self.env_downsample < 1 or self.post_downsample < 1:
            raise ValueError("downsample factors must be >= 1")


def erb_center_frequencies(num_filters: int, fmin_hz: float, fmax_hz: float) -> np.ndarray:
    """Center frequencies equally spaced on the ERB-rate scale, endpoints included."""

    def rate(f):
        return 21.4 * np.log10(1.0 + 0.00437 * f)

    def inv(r):
        return (10.0 ** (r / 21.4) - 1.0) / 0.00437

    return inv(np.linspace(rate(fmin_hz), rate(fmax_hz), num_filters))


def spectrogram(signal: AudioSignal, cfg: SpectrogramConfig | None = None) -> TFRepresentation:
    """Magnitude STFT keeping the lowest ``num_bins_kept`` frequency bins.

    With the defaults at 20 kHz this is a 100-sample Tukey window advanced
    by 10 samples, a 100-point transform (200 Hz bin spacing, 0-4600 Hz
    kept), and every 2nd frame retained for a 1000 Hz frame rate.
    """
    cfg = cfg or SpectrogramConfig()
    fs = signal.sample_rate_hz
    win_len = int(round(cfg.window_ms * fs / 1000.0))
    hop = int(round(cfg.hop_ms * fs / 1000.0))
    if cfg.num_bins_kept > win_len // 2 + 1:
        raise ValueError("num_bins_kept exceeds available transform bins")
    x = signal.samples
    if len(x) < win_len:
        raise ValueError(f"signal too short: {len(x)} samples < one {win_len}-sample window")
    window = sps.windows.tukey(win_len, cfg.tukey_alpha, sym=False)
    frames = sliding_window_view(x, win_len)[::hop]
    mags = np.abs(np.fft.rfft(frames * window, n=win_len, axis=1))
    kept = mags[:, : cfg.num_bins_kept].T[:, :: cfg.post_downsample]
    bin_hz = fs / win_len
    centers = np.arange(cfg.num_bins_kept) * bin_hz
    frame_rate = fs / hop / cfg.post_downsample
    return TFRepresentation(kept, frame_rate, centers, TFKind.SPECTROGRAM)


def _gammatone_coeffs(fc: float, order: int, fs: float):
    if order == 4:
        return sps.gammatone(fc, "iir", fs=fs)
    return sps.gammatone(fc, "fir", order=order, fs=fs)


def cochleagram(signal: AudioSignal, cfg: CochleagramConfig | None = None) -> TFRepresentation:
    """Cochlear filterbank front-end.

    Per channel: gammatone band-pass at ERB-spaced centers, analytic-signal
    envelope, anti-aliased decimation by ``env_downsample``, square-root
    compression, lateral inhibition across channels (replicate edges) with
    half-wave rectification, and a final keep-every-``post_downsample``
    frame step.
    """
    cfg = cfg or CochleagramConfig()
    fs = signal.sample_rate_hz
    x = signal.samples
    min_len = int(round(0.010 * fs))
    if len(x) < min_len:
        raise ValueError(f"signal too short: {len(x)} samples < {min_len} (10 ms)")
    centers = erb_center_frequencies(cfg.num_filters, cfg.fmin_hz, cfg.fmax_hz)
    rows = []
    for fc in centers:
        b, a = _gammatone_coeffs(fc, cfg.filter_order, fs)
        band = sps.lfilter(b, a, x)
        env = np.abs(sps.hilbert(band))
        dec = sps.decimate(env, cfg.env_downsample, ftype="fir", zero_phase=True)
        # anti-alias FIR can undershoot below zero; sqrt needs non-negative
        rows.append(np.sqrt(np.maximum(dec, 0.0)))
    v = np.vstack(rows)
    padded = np.pad(v, ((1, 1), (0, 0)), mode="edge")
    inhibited = v - cfg.lateral_alpha * (padded[:-2] + padded[2:])
    rect = np.maximum(inhibited, 0.0)[:, :: cfg.post_downsample]
    frame_rate = fs / cfg.env_downsample / cfg.post_downsample
    return TFRepresentation(rect, frame_rate, centers, TFKind.COCHLEAGRAM)


def extract(signal: AudioSignal, frontend: Frontend, cfg=None) -> TFRepresentation:
    """Run the selected front-end with default (or given) config, normalized."""
    if frontend is Frontend.SPECTROGRAM:
        tf = spectrogram(signal, cfg)
    elif frontend is Frontend.COCHLEAGRAM:
        tf = cochleagram(signal, cfg)
    else:
        raise ValueError(f"unknown frontend {frontend!r}")
    return normalize(tf)
