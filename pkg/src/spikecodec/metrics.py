"""Spike density, reconstruction SNR, and bit-compression ratio."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .core import EncoderParams, SpikeTrainSet, TFRepresentation
from .features import Frontend

#: AER cost of one spike event.
BITS_PER_EVENT = 16

#: 20 kHz PCM at a 32-bit depth.
RAW_PCM_BITS_PER_S = 640_000

#: 32 coefficients every 5 ms at a 32-bit depth.
MFCC_BITS_PER_S = 204_800

#: Finite stand-in for an infinite SNR (identical reconstruction).
SNR_CAP_DB = 300.0


class Baseline(Enum):
    RAW_PCM = "raw_pcm"
    MFCC = "mfcc"


_BASELINE_BITS_PER_S = {
    Baseline.RAW_PCM: RAW_PCM_BITS_PER_S,
    Baseline.MFCC: MFCC_BITS_PER_S,
}


@dataclass(frozen=True)
class MetricsReport:
    spike_density: float
    snr_db: float | None
    bcr_raw: float
    bcr_mfcc: float
    encoder: EncoderParams
    frontend: Frontend
    num_utterances: int = 1

    def __post_init__(self):
        if self.spike_density < 0:
            raise ValueError("spike_density must be >= 0")
        if self.bcr_raw < 0 or self.bcr_mfcc < 0:
            raise ValueError("bit-compression ratios must be >= 0")

    def to_key_value(self) -> str:
        """Flat key=value record, one field per line."""
        snr = "" if self.snr_db is None else f"{self.snr_db:.6g}"
        return "\n".join(
            [
                f"spike_density={self.spike_density:.6g}",
                f"snr_db={snr}",
                f"bcr_raw={self.bcr_raw:.6g}",
                f"bcr_mfcc={self.bcr_mfcc:.6g}",
                f"encoder={self.encoder.describe()}",
                f"frontend={self.frontend.value}",
                f"num_utterances={self.num_utterances}",
            ]
        )


def spike_density(s: SpikeTrainSet) -> float:
    """Events per source sample: count / (source_channels x source_frames).

    The denominator always uses the source dimensions (24 channels), so
    full send-on-delta at 48 logical channels stays comparable with the
    unipolar encoders.
    """
    if s.source_frames <= 0:
        raise ValueError("source_frames must be positive for density")
    if s.source_channels <= 0:
        raise ValueError("source_channels must be positive for density")
    return len(s) / (s.source_channels * s.source_frames)


def snr(original: TFRepresentation, reconstruction: TFRepresentation) -> float:
    """Reconstruction SNR in dB, capped at ``SNR_CAP_DB`` to stay sortable."""
    y = original.values
    yhat = reconstruction.values
    if y.shape != yhat.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {yhat.shape}")
    signal = float(np.sum(y * y))
    if signal == 0.0:
        raise ValueError("SNR undefined for a zero-energy original")
    noise = float(np.sum((y - yhat) ** 2))
    if noise == 0.0:
        return SNR_CAP_DB
    return min(10.0 * math.log10(signal / noise), SNR_CAP_DB)


def bit_compression_ratio(s: SpikeTrainSet, duration_s: float,
                          baseline: Baseline = Baseline.RAW_PCM) -> float:
    """Encoded AER bits over the baseline bitstream bits for one utterance."""
    if not duration_s > 0:
        raise ValueError("duration_s must be positive")
    encoded_bits = BITS_PER_EVENT * len(s)
    return encoded_bits / (_BASELINE_BITS_PER_S[baseline] * duration_s)


def aggregate(reports: list[MetricsReport]) -> MetricsReport:
    """Unweighted mean of densities, SNRs, and ratios over utterances."""
    if not reports:
        raise ValueError("no reports to aggregate")
    first = reports[0]
    for r in reports[1:]:
        if r.encoder != first.encoder or r.frontend != first.frontend:
            raise ValueError("cannot aggregate mixed encoder/frontend configurations")
    snrs = [r.snr_db for r in reports]
    mean_snr = float(np.mean(snrs)) if all(v is not None for v in snrs) else None
    return replace(
        first,
        spike_density=float(np.mean([r.spike_density for r in reports])),
        snr_db=mean_snr,
        bcr_raw=float(np.mean([r.bcr_raw for r in reports])),
        bcr_mfcc=float(np.mean([r.bcr_mfcc for r in reports])),
        num_utterances=sum(r.num_utterances for r in reports),
    )
