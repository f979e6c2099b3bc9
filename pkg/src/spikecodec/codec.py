"""Bit-exact binary formats and spike-to-real decoding.

AER streams pack each spike into one little-endian 16-bit word (6 address
bits, 10 delta-tick bits) behind a fixed 14-byte header; address 63 is a
time-wrap marker advancing time by 1023 ticks without a spike. Tensor
files carry raw little-endian float32 payloads behind a magic/rank/dims
header. Byte layouts are documented in docs/formats.md with golden sample
files under tests/golden/.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import (
    DEFAULT_FRAME_RATE_HZ,
    SOURCE_CHANNELS,
    Polarity,
    SpikeTrainSet,
    TFKind,
    TFRepresentation,
)

AER_MAGIC = b"AER1"
AER_VERSION = 1
DEFAULT_TICK_NS = 1_000_000  # 1 ms
TTFS_TICK_NS = 62_500  # 1/16 ms, preserves sub-frame latency-coded times
WRAP_ADDRESS = 63
MAX_DELTA_TICKS = 1023
MAX_LOGICAL_CHANNELS = 62

_HEADER = struct.Struct("<4sBBII")
_WORD = struct.Struct("<H")

TENSOR_MAGIC = b"SPKT"

#: Impulse-response length of the spike-to-real averaging filter, seconds.
DECODER_FIR_S = 0.005


class AerParseError(ValueError):
    """Base class for malformed AER streams."""


class AerMagicError(AerParseError):
    pass


class AerVersionError(AerParseError):
    pass


class AerTruncatedError(AerParseError):
    pass


class AerEventCountError(AerParseError):
    pass


class TensorParseError(ValueError):
    """Malformed tensor file."""


def _ticks(times_s: np.ndarray, tick_ns: int) -> np.ndarray:
    # round half up onto the tick grid
    return np.floor(times_s * 1e9 / tick_ns + 0.5).astype(np.int64)


def to_aer(s: SpikeTrainSet, tick_ns: int = DEFAULT_TICK_NS) -> bytes:
    """Serialize a spike train, delta-encoded on the given tick grid.

    Identical trains always produce byte-identical output.
    """
    if not 0 < tick_ns < 2**32:
        raise ValueError("tick_ns must fit an unsigned 32-bit field")
    if s.num_logical_channels > MAX_LOGICAL_CHANNELS:
        raise ValueError(
            f"address space exceeded: {s.num_logical_channels} logical channels > {MAX_LOGICAL_CHANNELS}"
        )
    if len(s) >= 2**32:
        raise ValueError("event count exceeds 32-bit field")
    if len(s):
        if int(s.channels.min()) < 0 or int(s.channels.max()) >= WRAP_ADDRESS:
            raise ValueError("address space exceeded: channel outside [0, 62]")
    ticks = _ticks(s.times_s, tick_ns)
    if len(ticks) and int(ticks[0]) < 0:
        raise ValueError("negative event time")
    if np.any(np.diff(ticks) < 0):
        raise ValueError("events must be sorted by time")
    out = bytearray(_HEADER.pack(AER_MAGIC, AER_VERSION, s.num_logical_channels, tick_ns, len(s)))
    prev = 0
    pack = _WORD.pack
    for ch, tk in zip(s.channels.tolist(), ticks.tolist()):
        d = tk - prev
        while d > MAX_DELTA_TICKS:
            out += pack((WRAP_ADDRESS << 10) | MAX_DELTA_TICKS)
            d -= MAX_DELTA_TICKS
        out += pack((ch << 10) | d)
        prev = tk
    return bytes(out)


def _frame_index(times_s: np.ndarray, frame_rate_hz: float) -> np.ndarray:
    # nearest-frame binning (round half up) keeps grid-aligned times exact
    return np.floor(times_s * frame_rate_hz + 0.5).astype(np.int64)


def from_aer(data: bytes) -> SpikeTrainSet:
    """Parse an AER stream back into a spike train.

    The header carries no polarity or source-dimension metadata, so the
    returned train uses the canonical reconstruction: 48-channel streams
    map addresses below 24 to ON and the rest to OFF, anything else is
    unipolar; the frame rate is the toolkit's 1000 Hz and source_frames
    covers the last event.
    """
    if len(data) < _HEADER.size:
        raise AerTruncatedError(f"header truncated: {len(data)} bytes < {_HEADER.size}")
    magic, version, nlc, tick_ns, count = _HEADER.unpack_from(data, 0)
    if magic != AER_MAGIC:
        raise AerMagicError(f"bad magic {magic!r}, expected {AER_MAGIC!r}")
    if version != AER_VERSION:
        raise AerVersionError(f"unsupported version {version}, expected {AER_VERSION}")
    offset = _HEADER.size
    addrs: list[int] = []
    ticks: list[int] = []
    t = 0
    while len(addrs) < count:
        if offset + _WORD.size > len(data):
            raise AerTruncatedError(
                f"payload truncated at byte offset {offset}: "
                f"{len(addrs)} of {count} events decoded"
            )
        (word,) = _WORD.unpack_from(data, offset)
        offset += _WORD.size
        addr = word >> 10
        if addr == WRAP_ADDRESS:
            t += MAX_DELTA_TICKS
            continue
        t += word & MAX_DELTA_TICKS
        addrs.append(addr)
        ticks.append(t)
    if offset != len(data):
        raise AerEventCountError(
            f"event count mismatch: {len(data) - offset} trailing bytes after {count} events"
        )
    channels = np.asarray(addrs, dtype=np.int64)
    times = np.asarray(ticks, dtype=np.int64) * tick_ns / 1e9
    if nlc == 2 * SOURCE_CHANNELS:
        pols = np.where(channels < SOURCE_CHANNELS, Polarity.ON.value, Polarity.OFF.value)
    else:
        pols = np.full(len(channels), Polarity.UNIPOLAR.value)
    frame_rate = DEFAULT_FRAME_RATE_HZ
    if len(times):
        source_frames = int(_frame_index(times[-1:], frame_rate)[0]) + 1
    else:
        source_frames = 0
    return SpikeTrainSet.build_sorted(
        channels, times, pols.astype(np.int8),
        num_logical_channels=int(nlc),
        source_channels=SOURCE_CHANNELS,
        source_frames=source_frames,
        frame_rate_hz=frame_rate,
    )


def write_aer(s: SpikeTrainSet, path, tick_ns: int = DEFAULT_TICK_NS) -> None:
    Path(path).write_bytes(to_aer(s, tick_ns))


def read_aer(path) -> SpikeTrainSet:
    return from_aer(Path(path).read_bytes())


def _binned_counts(s: SpikeTrainSet) -> np.ndarray:
    counts = np.zeros((s.num_logical_channels, s.source_frames))
    if len(s) == 0 or s.source_frames == 0:
        return counts
    if int(s.channels.min()) < 0 or int(s.channels.max()) >= s.num_logical_channels:
        raise ValueError("event channel outside the train's logical channel range")
    frames = _frame_index(s.times_s, s.frame_rate_hz)
    frames = np.clip(frames, 0, s.source_frames - 1)
    np.add.at(counts, (s.channels, frames), 1.0)
    return counts


def decode_spikes(s: SpikeTrainSet) -> TFRepresentation:
    """Spike-to-real decoding with a short causal averaging filter.

    Events are binned per logical channel into frames (coincident spikes
    sum) and each channel is convolved with a moving average spanning
    ``DECODER_FIR_S`` (5 taps of gain 1/5 at 1000 Hz), truncated to the
    frame count.
    """
    counts = _binned_counts(s)
    if s.source_frames == 0:
        return TFRepresentation(counts, s.frame_rate_hz, np.empty(0), TFKind.DECODED)
    ntaps = max(1, int(round(DECODER_FIR_S * s.frame_rate_hz)))
    kernel = np.full(ntaps, 1.0 / ntaps)
    out = np.empty_like(counts)
    for i in range(counts.shape[0]):
        out[i] = np.convolve(counts[i], kernel)[: s.source_frames]
    return TFRepresentation(out, s.frame_rate_hz, np.empty(0), TFKind.DECODED)


def decode_bsa(s: SpikeTrainSet, filter_taps) -> TFRepresentation:
    """Linear stimulus estimate: spike indicators convolved with the filter."""
    taps = np.asarray(filter_taps, dtype=np.float64)
    if taps.size == 0:
        raise ValueError("filter_taps must be non-empty")
    indicator = (_binned_counts(s) > 0).astype(np.float64)
    if s.source_frames == 0:
        return TFRepresentation(indicator, s.frame_rate_hz, np.empty(0), TFKind.DECODED)
    out = np.empty_like(indicator)
    for i in range(indicator.shape[0]):
        out[i] = np.convolve(indicator[i], taps)[: s.source_frames]
    return TFRepresentation(out, s.frame_rate_hz, np.empty(0), TFKind.DECODED)


def pad_for_classifier(tf: TFRepresentation, target_channels: int = 64, *,
                       target_frames: int) -> TFRepresentation:
    """Zero-pad channels and frames up to an exact classifier input shape."""
    c, f = tf.values.shape
    if c > target_channels or f > target_frames:
        raise ValueError(
            f"representation {c}x{f} exceeds target shape {target_channels}x{target_frames}"
        )
    out = np.zeros((target_channels, target_frames))
    out[:c, :f] = tf.values
    return TFRepresentation(out, tf.frame_rate_hz, np.empty(0), TFKind.DECODED)


def export_tensor(values: np.ndarray, path) -> None:
    """Write a row-major little-endian float32 tensor file."""
    arr = np.ascontiguousarray(values, dtype="<f4")
    if arr.ndim < 1 or arr.ndim > 255:
        raise ValueError("tensor rank must lie in [1, 255]")
    if any(d >= 2**32 for d in arr.shape):
        raise ValueError("dimension exceeds 32-bit field")
    header = TENSOR_MAGIC + struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + arr.tobytes(order="C"))


def import_tensor(path) -> np.ndarray:
    """Read a tensor file back as a float32 array; exact inverse of export."""
    data = Path(path).read_bytes()
    if len(data) < 5:
        raise TensorParseError(f"header truncated: {len(data)} bytes")
    if data[:4] != TENSOR_MAGIC:
        raise TensorParseError(f"bad magic {data[:4]!r}, expected {TENSOR_MAGIC!r}")
    rank = data[4]
    if rank < 1:
        raise TensorParseError("rank must be >= 1")
    dims_end = 5 + 4 * rank
    if len(data) < dims_end:
        raise TensorParseError("header truncated: missing dimensions")
    dims = struct.unpack(f"<{rank}I", data[5:dims_end])
    expected = int(np.prod(dims, dtype=np.int64)) * 4
    payload = data[dims_end:]
    if len(payload) != expected:
        raise TensorParseError(
            f"payload size mismatch: {len(payload)} bytes, expected {expected} for dims {dims}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
