"""AER and tensor formats, spike-to-real decoding, and padding."""

from pathlib import Path

import numpy as np
import pytest

from spikecodec import (
    AerEventCountError,
    AerMagicError,
    AerTruncatedError,
    AerVersionError,
    DEFAULT_TICK_NS,
    Polarity,
    SpikeEvent,
    SpikeTrainSet,
    TFKind,
    TTFS_TICK_NS,
    TensorParseError,
    decode_bsa,
    decode_spikes,
    design_lowpass_taps,
    export_tensor,
    from_aer,
    import_tensor,
    pad_for_classifier,
    to_aer,
)

from conftest import make_tf
from oracles import convolve_reference, moving_average_reference

GOLDEN = Path(__file__).parent / "golden"


def grid_train(frames, channels, nlc=24, polarities=None, source_frames=None):
    """A train on the 1 ms frame grid with from_aer's canonical metadata."""
    frames = np.asarray(frames, dtype=np.int64)
    channels = np.asarray(channels, dtype=np.int64)
    if polarities is None:
        if nlc == 48:
            polarities = np.where(channels < 24, Polarity.ON.value, Polarity.OFF.value)
        else:
            polarities = np.full(len(channels), Polarity.UNIPOLAR.value)
    if source_frames is None:
        source_frames = int(frames.max()) + 1 if len(frames) else 0
    return SpikeTrainSet.build_sorted(
        channels, frames / 1000.0, np.asarray(polarities, dtype=np.int8),
        num_logical_channels=nlc, source_channels=24,
        source_frames=source_frames,
        frame_rate_hz=1000.0,
    )


class TestAerGolden:
    def test_two_events_byte_match(self):
        train = grid_train([5, 7], [3, 3])
        assert to_aer(train, DEFAULT_TICK_NS) == (GOLDEN / "two_events.aer").read_bytes()

    def test_two_events_parse(self):
        train = from_aer((GOLDEN / "two_events.aer").read_bytes())
        assert train == grid_train([5, 7], [3, 3])

    def test_wrap_marker_byte_match(self):
        train = grid_train([0, 2000], [0, 1])
        assert to_aer(train, DEFAULT_TICK_NS) == (GOLDEN / "wrap.aer").read_bytes()
        assert from_aer((GOLDEN / "wrap.aer").read_bytes()) == train

    def test_empty_stream_byte_match(self):
        train = grid_train([], [], nlc=48)
        assert to_aer(train, DEFAULT_TICK_NS) == (GOLDEN / "empty.aer").read_bytes()
        parsed = from_aer((GOLDEN / "empty.aer").read_bytes())
        assert len(parsed) == 0 and parsed.num_logical_channels == 48


class TestAerRoundTrip:
    def test_grid_aligned_trains_round_trip_exactly(self, rng):
        for _ in range(50):
            nlc = int(rng.choice([24, 48]))
            n = int(rng.integers(0, 200))
            frames = np.sort(rng.integers(0, 3000, size=n))
            channels = rng.integers(0, nlc, size=n)
            train = grid_train(frames, channels, nlc=nlc)
            assert from_aer(to_aer(train)) == train

    def test_off_grid_times_round_trip_within_half_tick(self, rng):
        n = 200
        times = np.sort(rng.uniform(0, 1.0, size=n))
        channels = rng.integers(0, 24, size=n)
        train = SpikeTrainSet.build_sorted(
            channels, times, np.full(n, Polarity.UNIPOLAR.value, dtype=np.int8),
            num_logical_channels=24, source_channels=24,
            source_frames=1000, frame_rate_hz=1000.0,
        )
        back = from_aer(to_aer(train, TTFS_TICK_NS))
        assert len(back) == n
        tick_s = TTFS_TICK_NS / 1e9
        assert np.max(np.abs(np.sort(back.times_s) - np.sort(train.times_s))) <= tick_s / 2

    def test_serialization_is_deterministic(self, rng):
        frames = np.sort(rng.integers(0, 500, size=40))
        train = grid_train(frames, rng.integers(0, 24, size=40))
        assert to_aer(train) == to_aer(train)

    def test_quantization_rounds_half_up(self):
        train = SpikeTrainSet.build_sorted(
            [0], [0.0005], np.array([2], dtype=np.int8),
            num_logical_channels=24, source_channels=24,
            source_frames=10, frame_rate_hz=1000.0,
        )
        back = from_aer(to_aer(train, DEFAULT_TICK_NS))
        assert back.times_s[0] == 0.001


class TestAerErrors:
    def test_channel_63_rejected(self):
        train = grid_train([1], [63], nlc=24)
        with pytest.raises(ValueError, match="address space exceeded"):
            to_aer(train)

    def test_too_many_logical_channels_rejected(self):
        train = grid_train([1], [0], nlc=63)
        with pytest.raises(ValueError, match="address space exceeded"):
            to_aer(train)

    def test_bad_magic(self):
        data = bytearray((GOLDEN / "two_events.aer").read_bytes())
        data[0] = ord("X")
        with pytest.raises(AerMagicError):
            from_aer(bytes(data))

    def test_bad_version(self):
        data = bytearray((GOLDEN / "two_events.aer").read_bytes())
        data[4] = 9
        with pytest.raises(AerVersionError):
            from_aer(bytes(data))

    def test_truncated_payload_names_byte_offset(self):
        data = (GOLDEN / "two_events.aer").read_bytes()[:-2]
        with pytest.raises(AerTruncatedError, match="byte offset 16"):
            from_aer(data)

    def test_truncated_header(self):
        with pytest.raises(AerTruncatedError):
            from_aer(b"AER1\x01")

    def test_trailing_bytes_reported_as_count_mismatch(self):
        data = (GOLDEN / "two_events.aer").read_bytes() + b"\x00\x0c"
        with pytest.raises(AerEventCountError, match="trailing"):
            from_aer(data)


class TestDecodeSpikes:
    def test_single_spike_pulse_shape(self):
        train = grid_train([10], [0], source_frames=20)
        decoded = decode_spikes(train)
        assert decoded.kind is TFKind.DECODED
        expected = np.zeros(20)
        expected[10:15] = 0.2
        assert np.array_equal(decoded.values[0], expected)
        assert not decoded.values[1:].any()

    def test_two_spikes_overlap(self):
        train = grid_train([10, 12], [0, 0], source_frames=20)
        row = decode_spikes(train).values[0]
        expected = np.zeros(20)
        expected[10:12] = 0.2
        expected[12:15] = 0.4
        expected[15:17] = 0.2
        assert np.array_equal(row, expected)

    def test_empty_train_decodes_to_zeros(self):
        train = SpikeTrainSet.build_sorted(
            [], [], [], num_logical_channels=24, source_channels=24,
            source_frames=50, frame_rate_hz=1000.0)
        decoded = decode_spikes(train)
        assert decoded.values.shape == (24, 50)
        assert not decoded.values.any()

    def test_full_sod_train_decodes_to_48_channels(self):
        train = grid_train([3, 5], [2, 30], nlc=48)
        assert decode_spikes(train).values.shape[0] == 48

    def test_linearity_is_exact(self, rng):
        for _ in range(20):
            n1, n2 = rng.integers(1, 60, size=2)
            f1 = rng.integers(0, 100, size=n1)
            f2 = rng.integers(0, 100, size=n2)
            c1 = rng.integers(0, 24, size=n1)
            c2 = rng.integers(0, 24, size=n2)
            union = grid_train(np.concatenate([f1, f2]), np.concatenate([c1, c2]),
                               source_frames=100)
            a = grid_train(f1, c1, source_frames=100)
            b = grid_train(f2, c2, source_frames=100)
            assert np.array_equal(decode_spikes(union).values,
                                  decode_spikes(a).values + decode_spikes(b).values)

    def test_matches_direct_summation(self, rng):
        frames = rng.integers(0, 50, size=30)
        train = grid_train(frames, np.zeros(30, dtype=int), source_frames=60)
        counts = np.bincount(frames, minlength=60).astype(float)
        want = moving_average_reference(counts.tolist(), 5)
        np.testing.assert_allclose(decode_spikes(train).values[0], want, rtol=0, atol=1e-15)

    def test_total_mass_equals_spike_count(self, rng):
        # away from the end-truncation the filter has unit gain
        frames = rng.integers(0, 80, size=40)
        train = grid_train(frames, rng.integers(0, 24, size=40), source_frames=100)
        assert decode_spikes(train).values.sum() == pytest.approx(40.0, rel=1e-12)


class TestDecodeBsa:
    def test_impulse_reconstructs_filter(self):
        taps = design_lowpass_taps(100.0, 8)
        train = grid_train([0], [0], source_frames=12)
        row = decode_bsa(train, taps).values[0]
        expected = np.zeros(12)
        expected[:8] = taps
        assert np.array_equal(row, expected)

    def test_empty_train_gives_zeros(self):
        train = SpikeTrainSet.build_sorted(
            [], [], [], num_logical_channels=24, source_channels=24,
            source_frames=30, frame_rate_hz=1000.0)
        assert not decode_bsa(train, design_lowpass_taps(100.0, 8)).values.any()

    def test_two_spikes_superpose(self):
        taps = design_lowpass_taps(80.0, 6)
        train = grid_train([4, 9], [0, 0], source_frames=25)
        row = decode_bsa(train, taps).values[0]
        indicator = np.zeros(25)
        indicator[[4, 9]] = 1.0
        want = convolve_reference(indicator.tolist(), taps.tolist())
        np.testing.assert_allclose(row, want, rtol=0, atol=1e-15)


class TestPadForClassifier:
    def test_pads_24x996_to_64_square_block(self, rng):
        tf = make_tf(rng.uniform(0, 1, size=(24, 996)))
        out = pad_for_classifier(tf, 64, target_frames=1200)
        assert out.values.shape == (64, 1200)
        assert np.array_equal(out.values[:24, :996], tf.values)
        assert not out.values[24:].any()
        assert not out.values[:, 996:].any()

    def test_pads_48_channel_decoded(self):
        tf = make_tf(np.ones((24, 900)))
        decoded = decode_spikes(grid_train(np.arange(10), np.arange(10), nlc=48))
        out = pad_for_classifier(decoded, 64, target_frames=900)
        assert out.values.shape == (64, 900)

    def test_too_many_channels_rejected(self):
        from spikecodec import TFRepresentation
        tf = TFRepresentation(np.zeros((65, 10)), 1000.0, np.empty(0), TFKind.DECODED)
        with pytest.raises(ValueError, match="exceeds target shape"):
            pad_for_classifier(tf, 64, target_frames=100)

    def test_too_many_frames_rejected(self):
        tf = make_tf(np.zeros((24, 101)))
        with pytest.raises(ValueError, match="exceeds target shape"):
            pad_for_classifier(tf, 64, target_frames=100)


class TestTensorFile:
    def test_golden_byte_match(self, tmp_path):
        values = np.array([[0.0, 0.5, 1.0], [1.5, 2.0, 2.5]], dtype=np.float32)
        path = tmp_path / "t.spkt"
        export_tensor(values, path)
        assert path.read_bytes() == (GOLDEN / "sample.spkt").read_bytes()
        assert np.array_equal(import_tensor(GOLDEN / "sample.spkt"), values)

    def test_rank2_round_trip_and_size(self, tmp_path, rng):
        values = rng.uniform(0, 1, size=(64, 1000)).astype(np.float32)
        path = tmp_path / "t.spkt"
        export_tensor(values, path)
        assert path.stat().st_size == 4 + 1 + 2 * 4 + 64 * 1000 * 4
        assert np.array_equal(import_tensor(path), values)

    def test_rank3_round_trip(self, tmp_path, rng):
        values = rng.normal(size=(3, 24, 50)).astype(np.float32)
        path = tmp_path / "t.spkt"
        export_tensor(values, path)
        back = import_tensor(path)
        assert back.shape == (3, 24, 50)
        assert np.array_equal(back, values)

    def test_corrupt_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.spkt"
        data = bytearray((GOLDEN / "sample.spkt").read_bytes())
        data[0] = ord("x")
        path.write_bytes(bytes(data))
        with pytest.raises(TensorParseError, match="bad magic"):
            import_tensor(path)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "short.spkt"
        path.write_bytes((GOLDEN / "sample.spkt").read_bytes()[:-4])
        with pytest.raises(TensorParseError, match="size mismatch"):
            import_tensor(path)
