"""spikecodec: audio to spike-event streams and back.

Two time-frequency front-ends (spectrogram, cochleagram), four spike
encoders (send-on-delta, time-to-first-spike, leaky integrate-and-fire,
BSA), a compact binary AER codec, spike-to-real decoding, and density /
SNR / bit-compression metrics with a parameter-sweep CLI.
"""

from .codec import (
    AerEventCountError,
    AerMagicError,
    AerParseError,
    AerTruncatedError,
    AerVersionError,
    DEFAULT_TICK_NS,
    TTFS_TICK_NS,
    TensorParseError,
    decode_bsa,
    decode_spikes,
    export_tensor,
    from_aer,
    import_tensor,
    pad_for_classifier,
    read_aer,
    to_aer,
    write_aer,
)
from .core import (
    AudioSignal,
    BsaParams,
    EncoderParams,
    LifParams,
    Polarity,
    SilentUtteranceWarning,
    SodMode,
    SodParams,
    SpikeEvent,
    SpikeTrainSet,
    TFKind,
    TFRepresentation,
    TtfsParams,
    normalize,
    validate_spike_train,
)
from .encoders import (
    BsaGrid,
    BsaOptimum,
    LifTauMap,
    design_lowpass_taps,
    encode_bsa,
    encode_lif,
    encode_sod,
    encode_ttfs,
    lif_time_constants,
    optimize_bsa,
)
from .features import (
    CochleagramConfig,
    Frontend,
    SpectrogramConfig,
    cochleagram,
    erb_center_frequencies,
    extract,
    spectrogram,
)
from .metrics import (
    Baseline,
    MetricsReport,
    aggregate,
    bit_compression_ratio,
    snr,
    spike_density,
)

__version__ = "0.1.0"
