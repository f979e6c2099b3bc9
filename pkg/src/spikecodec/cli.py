"""Command-line surface for reproducible batch runs.

Subcommands: ``features`` (WAV -> tensor files), ``encode`` (WAV -> AER +
metrics), ``decode`` (AER -> padded tensor files), ``sweep`` (parameter
grid -> CSV table), and ``bsa-optimize`` (grid search -> parameter file).

Fixed inputs, flags, and seed give byte-identical outputs regardless of
``--parallelism``. Exit codes: 0 success, 1 processing failure, 2 usage
error.
"""

from __future__ import annotations

import argparse
import glob as globlib
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from . import codec, encoders, metrics
from .core import (
    AudioSignal,
    BsaParams,
    LifParams,
    SodMode,
    SodParams,
    TtfsParams,
)
from .features import Frontend, extract

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

EXPECTED_SAMPLE_RATE_HZ = 20000
THREADS_ENV_VAR = "SPIKECODEC_THREADS"

_FRONTENDS = {f.value: f for f in Frontend}
_SOD_MODES = {"sod": SodMode.FULL, "sod-on": SodMode.ON_ONLY, "sod-off": SodMode.OFF_ONLY}
_ENCODERS = ("sod", "sod-on", "sod-off", "ttfs", "lif", "bsa")


def read_wav(path) -> AudioSignal:
    """Load a mono 20 kHz WAV (8/16-bit integer or 32-bit float PCM)."""
    try:
        rate, data = wavfile.read(path)
    except Exception as exc:
        raise ValueError(f"unreadable WAV file: {exc}") from exc
    if data.ndim != 1:
        raise ValueError(f"expected mono audio, got {data.shape[1]} channels")
    if rate != EXPECTED_SAMPLE_RATE_HZ:
        raise ValueError(f"expected {EXPECTED_SAMPLE_RATE_HZ} Hz sample rate, got {rate}")
    if data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise ValueError(
            f"unsupported WAV sample format {data.dtype} (use 8/16-bit integer or 32-bit float)"
        )
    return AudioSignal(samples, float(rate))


def expand_inputs(patterns) -> list[Path]:
    """Resolve paths and glob patterns into a lexicographic, deduplicated list."""
    found: list[str] = []
    for pattern in patterns:
        if os.path.exists(pattern):
            found.append(pattern)
        else:
            found.extend(globlib.glob(pattern))
    return [Path(p) for p in sorted(dict.fromkeys(found))]


def _run_all(fn, items, workers: int):
    """Apply fn per item (optionally threaded), results in input order.

    Returns triples (item, result, error_message)."""

    def safe(item):
        try:
            return item, fn(item), None
        except Exception as exc:  # per-file isolation: one bad input must not abort a batch
            return item, None, f"{type(exc).__name__}: {exc}"

    if workers <= 1:
        return [safe(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(safe, items))


def parse_grid(spec: str) -> list[float]:
    """Grid spec: comma-separated values, or ``log:START:STOP:NUM``."""
    if spec.startswith("log:"):
        parts = spec.split(":")
        if len(parts) != 4:
            raise ValueError("log grid must be log:START:STOP:NUM")
        start, stop, num = float(parts[1]), float(parts[2]), int(parts[3])
        return [float(v) for v in np.geomspace(start, stop, num)]
    return [float(v) for v in spec.split(",") if v.strip()]


def _parse_float_list(spec: str) -> list[float]:
    return [float(v) for v in spec.split(",") if v.strip()]


def _parse_int_list(spec: str) -> list[int]:
    return [int(v) for v in spec.split(",") if v.strip()]


def load_key_value(path) -> dict[str, str]:
    """Parse a flat key=value file, ignoring blanks and # comments."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_params_spec(spec: str) -> dict[str, str]:
    """Encoder parameter source: a key=value file path or an inline
    comma-separated key=value string (e.g. ``delta=0.05``)."""
    if os.path.exists(spec):
        return load_key_value(spec)
    out: dict[str, str] = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"expected key=value, got {part!r}")
        key, value = part.split("=", 1)
        out[key.strip()] = value.strip()
    return out


_CONFIG_KEYS = {
    "frontend": str,
    "encoder": str,
    "delta": float,
    "tick_ns": int,
    "out": str,
    "seed": int,
    "parallelism": int,
    "pad_frames": int,
    "pad_channels": int,
    "grid": str,
    "tau_min": float,
    "tau_max": float,
    "bsa_params": str,
    "bsa_cutoff": float,
    "bsa_taps": int,
    "bsa_threshold": float,
    "cutoffs": str,
    "lengths": str,
    "thresholds": str,
    "subset_fraction": float,
    "inputs": str,
}


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    if not getattr(args, "config", None):
        return
    try:
        kv = load_key_value(args.config)
    except (OSError, ValueError) as exc:
        parser.error(f"cannot load config: {exc}")
    for key, raw in kv.items():
        if key not in _CONFIG_KEYS:
            parser.error(f"unknown config key {key!r}")
        if key == "inputs":
            if not args.inputs:
                args.inputs = [p for p in raw.split(",") if p.strip()]
            continue
        if getattr(args, key, None) is None:
            try:
                setattr(args, key, _CONFIG_KEYS[key](raw))
            except ValueError:
                parser.error(f"config key {key!r}: invalid value {raw!r}")


def _parallelism(args) -> int:
    if args.parallelism is not None:
        return max(1, args.parallelism)
    return max(1, int(os.environ.get(THREADS_ENV_VAR, "1")))


def _require(args, parser, *names) -> None:
    for name in names:
        if getattr(args, name, None) is None:
            parser.error(f"--{name.replace('_', '-')} is required")


def _resolved_inputs(args, parser) -> list[Path]:
    paths = expand_inputs(args.inputs)
    if not paths:
        parser.error("no input files matched")
    return paths


def _frontend(args, parser) -> Frontend:
    _require(args, parser, "frontend")
    if args.frontend not in _FRONTENDS:
        parser.error(f"unknown frontend {args.frontend!r}")
    return _FRONTENDS[args.frontend]


def _fmt(value) -> str:
    if value is None:
        return ""
    return f"{value:.6g}"


def _encoder_setup(args, parser, *, need_delta: bool):
    """Resolve the encoder closure: (tf, param) -> (train, EncoderParams).

    For BSA the swept parameter is the threshold; for the others the
    threshold delta. Returns (name, run, fixed_param, default_tick,
    bsa_taps)."""
    name = args.encoder
    if name not in _ENCODERS:
        parser.error(f"unknown encoder {name!r} (choose from {', '.join(_ENCODERS)})")
    tick = codec.TTFS_TICK_NS if name == "ttfs" else codec.DEFAULT_TICK_NS
    if name in _SOD_MODES:
        mode = _SOD_MODES[name]

        def run(tf, param):
            return encoders.encode_sod(tf, param, mode), SodParams(param, mode)

        fixed = args.delta
    elif name == "ttfs":

        def run(tf, param):
            return encoders.encode_ttfs(tf, param), TtfsParams(param)

        fixed = args.delta
    elif name == "lif":
        tau_map = encoders.LifTauMap(
            args.tau_min if args.tau_min is not None else 0.020,
            args.tau_max if args.tau_max is not None else 0.040,
        )

        def run(tf, param):
            taus = encoders.lif_time_constants(tf.center_freqs_hz, tau_map)
            return encoders.encode_lif(tf, param, tau_map), LifParams(param, tuple(taus))

        fixed = args.delta
    else:  # bsa: sweep/encode over the threshold with a fixed filter
        if args.bsa_params is not None:
            try:
                taps, file_threshold = load_bsa_params(args.bsa_params)
            except (OSError, ValueError) as exc:
                parser.error(f"cannot load BSA parameters: {exc}")
        elif args.bsa_cutoff is not None and args.bsa_taps is not None:
            taps = encoders.design_lowpass_taps(args.bsa_cutoff, args.bsa_taps)
            file_threshold = None
        else:
            parser.error("bsa needs --bsa-params FILE or --bsa-cutoff plus --bsa-taps")

        def run(tf, param):
            return encoders.encode_bsa(tf, taps, param), BsaParams(tuple(taps), param)

        fixed = args.bsa_threshold if args.bsa_threshold is not None else file_threshold
        if need_delta and fixed is None:
            parser.error("bsa needs a threshold (--bsa-threshold or the parameter file)")
        return name, run, fixed, tick, taps
    if need_delta and fixed is None:
        parser.error("--delta is required")
    return name, run, fixed, tick, None


def _utterance_report(tf, train, duration_s, params, frontend, snr_db) -> metrics.MetricsReport:
    return metrics.MetricsReport(
        spike_density=metrics.spike_density(train),
        snr_db=snr_db,
        bcr_raw=metrics.bit_compression_ratio(train, duration_s, metrics.Baseline.RAW_PCM),
        bcr_mfcc=metrics.bit_compression_ratio(train, duration_s, metrics.Baseline.MFCC),
        encoder=params,
        frontend=frontend,
        num_utterances=1,
    )


def _reconstruction_snr(tf, train, encoder_name, bsa_taps):
    """Mean-filter (or BSA-filter) reconstruction SNR; None when undefined.

    Full send-on-delta decodes to 48 channels and has no same-shape
    reconstruction; silent utterances have no defined SNR."""
    if encoder_name == "bsa":
        recon = codec.decode_bsa(train, bsa_taps)
    else:
        recon = codec.decode_spikes(train)
    if recon.values.shape != tf.values.shape:
        return None
    if float(np.sum(tf.values * tf.values)) == 0.0:
        return None
    return metrics.snr(tf, recon)


def cmd_features(args, parser) -> int:
    inputs = _resolved_inputs(args, parser)
    frontend = _frontend(args, parser)
    _require(args, parser, "out")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    def work(path):
        return extract(read_wav(path), frontend)

    failures = 0
    for path, tf, err in _run_all(work, inputs, _parallelism(args)):
        if err is not None:
            print(f"error: {path}: {err}", file=sys.stderr)
            failures += 1
            continue
        dest = outdir / (path.stem + ".spkt")
        codec.export_tensor(tf.values, dest)
        print(f"{path} -> {dest} [{tf.num_channels}x{tf.num_frames}]")
    return EXIT_FAILURE if failures else EXIT_OK


def cmd_encode(args, parser) -> int:
    inputs = _resolved_inputs(args, parser)
    frontend = _frontend(args, parser)
    _require(args, parser, "out", "encoder")
    name, run, param, default_tick, _taps = _encoder_setup(args, parser, need_delta=True)
    tick = args.tick_ns if args.tick_ns is not None else default_tick
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    def work(path):
        sig = read_wav(path)
        tf = extract(sig, frontend)
        train, params = run(tf, param)
        report = _utterance_report(tf, train, sig.duration_s, params, frontend, None)
        return codec.to_aer(train, tick), report

    failures = 0
    reports = []
    for path, result, err in _run_all(work, inputs, _parallelism(args)):
        if err is not None:
            print(f"error: {path}: {err}", file=sys.stderr)
            failures += 1
            continue
        aer, report = result
        (outdir / (path.stem + ".aer")).write_bytes(aer)
        (outdir / (path.stem + ".metrics")).write_text(report.to_key_value() + "\n")
        reports.append(report)
        print(f"{path}: density={report.spike_density:.6g}")
    if reports:
        agg = metrics.aggregate(reports)
        print(
            f"aggregate over {agg.num_utterances} utterances: "
            f"density={agg.spike_density:.6g} bcr_raw={agg.bcr_raw:.6g} bcr_mfcc={agg.bcr_mfcc:.6g}"
        )
    return EXIT_FAILURE if failures else EXIT_OK


def cmd_decode(args, parser) -> int:
    inputs = _resolved_inputs(args, parser)
    _require(args, parser, "out", "pad_frames")
    pad_channels = args.pad_channels if args.pad_channels is not None else 64
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    def work(path):
        train = codec.read_aer(path)
        decoded = codec.decode_spikes(train)
        return codec.pad_for_classifier(decoded, pad_channels, target_frames=args.pad_frames)

    failures = 0
    for path, padded, err in _run_all(work, inputs, _parallelism(args)):
        if err is not None:
            print(f"error: {path}: {err}", file=sys.stderr)
            failures += 1
            continue
        dest = outdir / (path.stem + ".spkt")
        codec.export_tensor(padded.values, dest)
        print(f"{path} -> {dest} [{padded.num_channels}x{padded.num_frames}]")
    return EXIT_FAILURE if failures else EXIT_OK


def cmd_sweep(args, parser) -> int:
    inputs = _resolved_inputs(args, parser)
    frontend = _frontend(args, parser)
    _require(args, parser, "out", "encoder", "grid")
    name, run, _param, _tick, bsa_taps = _encoder_setup(args, parser, need_delta=False)
    try:
        grid = parse_grid(args.grid)
    except ValueError as exc:
        parser.error(f"bad grid: {exc}")
    if not grid:
        parser.error("grid is empty")
    workers = _parallelism(args)

    def load(path):
        sig = read_wav(path)
        return extract(sig, frontend), sig.duration_s

    loaded = []
    failures = 0
    for path, result, err in _run_all(load, inputs, workers):
        if err is not None:
            print(f"error: {path}: {err}", file=sys.stderr)
            failures += 1
            continue
        loaded.append(result)
    if not loaded:
        print("error: no usable utterances", file=sys.stderr)
        return EXIT_FAILURE

    lines = ["param,density,snr_db,bcr_raw,bcr_mfcc"]
    for value in grid:

        def score(item, value=value):
            tf, duration = item
            train, params = run(tf, value)
            snr_db = _reconstruction_snr(tf, train, name, bsa_taps)
            return _utterance_report(tf, train, duration, params, frontend, snr_db)

        results = _run_all(score, loaded, workers)
        errs = [e for _, _, e in results if e is not None]
        if errs:
            print(f"error: grid point {value:.6g}: {errs[0]}", file=sys.stderr)
            return EXIT_FAILURE
        agg = metrics.aggregate([rep for _, rep, _ in results])
        lines.append(
            f"{_fmt(value)},{_fmt(agg.spike_density)},{_fmt(agg.snr_db)},"
            f"{_fmt(agg.bcr_raw)},{_fmt(agg.bcr_mfcc)}"
        )
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out} ({len(grid)} grid points, {len(loaded)} utterances)")
    return EXIT_FAILURE if failures else EXIT_OK


def cmd_bsa_optimize(args, parser) -> int:
    inputs = _resolved_inputs(args, parser)
    frontend = _frontend(args, parser)
    _require(args, parser, "out", "cutoffs", "lengths", "thresholds")
    try:
        grid = encoders.BsaGrid(
            tuple(_parse_float_list(args.cutoffs)),
            tuple(_parse_int_list(args.lengths)),
            tuple(_parse_float_list(args.thresholds)),
            args.subset_fraction if args.subset_fraction is not None else 0.10,
        )
    except ValueError as exc:
        parser.error(f"bad grid: {exc}")
    seed = args.seed if args.seed is not None else 0

    def load(path):
        return extract(read_wav(path), frontend)

    tfs = []
    failures = 0
    for path, tf, err in _run_all(load, inputs, _parallelism(args)):
        if err is not None:
            print(f"error: {path}: {err}", file=sys.stderr)
            failures += 1
            continue
        tfs.append(tf)
    if not tfs:
        print("error: no usable utterances", file=sys.stderr)
        return EXIT_FAILURE
    try:
        best = encoders.optimize_bsa(tfs, grid, seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    taps_text = ",".join(f"{t:.17g}" for t in best.filter_taps)
    Path(args.out).write_text(
        "\n".join(
            [
                "encoder=bsa",
                f"cutoff_hz={best.cutoff_hz:.17g}",
                f"num_taps={best.num_taps}",
                f"threshold={best.threshold:.17g}",
                f"snr_db={best.snr_db:.6g}",
                f"filter_taps={taps_text}",
            ]
        )
        + "\n"
    )
    print(
        f"wrote {args.out}: cutoff={best.cutoff_hz:.6g} Hz, {best.num_taps} taps, "
        f"threshold={best.threshold:.6g}, mean snr={best.snr_db:.6g} dB"
    )
    return EXIT_FAILURE if failures else EXIT_OK


def _add_common(sub):
    sub.add_argument("inputs", nargs="*", help="input files or glob patterns")
    sub.add_argument("--out", help="output directory or file")
    sub.add_argument("--parallelism", type=int, default=None,
                     help=f"worker threads (default ${THREADS_ENV_VAR} or 1)")
    sub.add_argument("--config", help="flat key=value config file supplying defaults")


def _add_encoder_flags(sub):
    sub.add_argument("--encoder", choices=_ENCODERS)
    sub.add_argument("--delta", type=float, default=None, help="threshold parameter")
    sub.add_argument("--tau-min", dest="tau_min", type=float, default=None,
                     help="LIF minimum time constant in seconds (default 0.020)")
    sub.add_argument("--tau-max", dest="tau_max", type=float, default=None,
                     help="LIF maximum time constant in seconds (default 0.040)")
    sub.add_argument("--bsa-params", dest="bsa_params", default=None,
                     help="BSA parameter file from bsa-optimize")
    sub.add_argument("--bsa-cutoff", dest="bsa_cutoff", type=float, default=None,
                     help="BSA filter cutoff in Hz (with --bsa-taps)")
    sub.add_argument("--bsa-taps", dest="bsa_taps", type=int, default=None,
                     help="BSA filter length in taps")
    sub.add_argument("--bsa-threshold", dest="bsa_threshold", type=float, default=None,
                     help="BSA spike threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikecodec",
        description="Convert audio to spike-event streams and back, with sweep metrics.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("features", help="extract normalized time-frequency tensors")
    _add_common(p)
    p.add_argument("--frontend", choices=sorted(_FRONTENDS))
    p.set_defaults(func=cmd_features)

    p = subs.add_parser("encode", help="encode WAV files to AER spike streams")
    _add_common(p)
    p.add_argument("--frontend", choices=sorted(_FRONTENDS))
    _add_encoder_flags(p)
    p.add_argument("--tick-ns", dest="tick_ns", type=int, default=None,
                   help="AER tick in ns (default 1000000; 62500 for ttfs)")
    p.set_defaults(func=cmd_encode)

    p = subs.add_parser("decode", help="decode AER streams to padded tensors")
    _add_common(p)
    p.add_argument("--pad-channels", dest="pad_channels", type=int, default=None,
                   help="channel count after zero padding (default 64)")
    p.add_argument("--pad-frames", dest="pad_frames", type=int, default=None,
                   help="frame count after zero padding (required)")
    p.set_defaults(func=cmd_decode)

    p = subs.add_parser("sweep", help="sweep an encoder parameter over a corpus")
    _add_common(p)
    p.add_argument("--frontend", choices=sorted(_FRONTENDS))
    _add_encoder_flags(p)
    p.add_argument("--grid", default=None,
                   help="comma-separated values or log:START:STOP:NUM")
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("bsa-optimize", help="grid-search the BSA filter and threshold")
    _add_common(p)
    p.add_argument("--frontend", choices=sorted(_FRONTENDS))
    p.add_argument("--cutoffs", default=None, help="comma-separated cutoff frequencies in Hz")
    p.add_argument("--lengths", default=None, help="comma-separated filter lengths in taps")
    p.add_argument("--thresholds", default=None, help="comma-separated thresholds")
    p.add_argument("--seed", type=int, default=None, help="subset sampling seed (default 0)")
    p.add_argument("--subset-fraction", dest="subset_fraction", type=float, default=None,
                   help="fraction of the corpus used for scoring (default 0.10)")
    p.set_defaults(func=cmd_bsa_optimize)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_config(args, parser)
    return args.func(args, parser)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
