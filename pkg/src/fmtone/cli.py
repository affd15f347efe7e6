"""Command-line front end for the whole toolchain.

Subcommands:

    gen      build a dataset from a bank voice and write train/valid/test files
    train    fit the envelope model on a generated dataset
    eval     envelope L1 + segmented SNR of a model on a test split
    render   offline tone transfer: WAV in, FM-synthesized WAV out
    bench    per-frame latency of the inference pipeline vs the frame budget
    features dump per-frame (a, f, f0) features of a WAV to CSV
    patch    print a human-readable voice summary

Every run is reproducible from its flags; all randomness flows from
explicit seeds.  Errors exit nonzero with one line of the form
``error:<category>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from . import dataset as ds
from . import metrics, sysex, wavio
from .errors import FmToneError, UnsupportedSampleRate
from .features import AnalysisConfig, f_norm, frame_window, rms_norm, yin_f0
from .gru import (
    GruParams,
    ModelConfig,
    forward_frame,
    forward_sequence,
    init_params,
    load_model,
    reset_state,
    save_model,
)
from .synth import SynthState, VoiceConfig, render_window
from .training import TrainConfig, train, write_loss_csv

FRAME_BUDGET_S = 64.0 / 44100.0  # ~1.451 ms per control frame


def _load_patch(bank_path: str, voice: int) -> sysex.Dx7Patch:
    try:
        with open(bank_path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise FmToneError(str(exc)) from exc
    bank = sysex.parse_sysex_bank(blob)
    return sysex.unpack_voice(bank, voice)


def make_predictor(params: GruParams):
    """Whole-sequence predictor over a training tuple's (a, f) inputs."""

    def predict(tup: ds.TrainingTuple) -> np.ndarray:
        xs = np.stack([tup.a, tup.f], axis=-1)
        h0 = reset_state(params.hidden_dim)
        ys, _ = forward_sequence(params, h0, xs)
        return ys

    return predict


def cmd_gen(args) -> int:
    patch = _load_patch(args.patch, args.voice)
    data = ds.build_dataset(patch, args.notes, args.frames, args.seed)
    train_split, valid_split, test_split = ds.split_dataset(data, args.seed)
    for name, split in (
        ("train", train_split),
        ("valid", valid_split),
        ("test", test_split),
    ):
        path = f"{args.out}.{name}.fmtd"
        ds.save_dataset(split, path)
        print(f"wrote {path} ({len(split.tuples)} tuples)")
    return 0


def cmd_train(args) -> int:
    train_split = ds.load_dataset(f"{args.dataset}.train.fmtd")
    valid_split = ds.load_dataset(f"{args.dataset}.valid.fmtd")
    model_config = ModelConfig(hidden_dim=args.hidden)
    train_config = TrainConfig(
        batch_size=args.batch, total_steps=args.steps, seed=args.seed
    )
    if args.steps == 0:
        params = init_params(model_config, args.seed)
        reports = []
    else:
        params, reports = train(train_split, valid_split, model_config, train_config)
    save_model(params, model_config, args.out)
    loss_csv = args.loss_csv or f"{args.out}.loss.csv"
    write_loss_csv(reports, loss_csv)
    print(f"wrote {args.out} and {loss_csv}")
    if reports:
        print(f"final valid L1: {reports[-1].valid_l1:.6g}")
    return 0


def cmd_eval(args) -> int:
    test_split = ds.load_dataset(args.dataset)
    params, _ = load_model(args.model)
    patch = _load_patch(args.patch, args.voice)
    row = metrics.evaluate_model(make_predictor(params), test_split, patch)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patch", "envelope_l1", "snr_onset_db", "snr_mid_db", "snr_end_db"])
        writer.writerow(
            [
                row.patch_name,
                f"{row.envelope_l1:.8g}",
                f"{row.snr_onset_db:.4f}",
                f"{row.snr_mid_db:.4f}",
                f"{row.snr_end_db:.4f}",
            ]
        )
    print(
        f"patch={row.patch_name!r} l1={row.envelope_l1:.6g} "
        f"snr_onset={row.snr_onset_db:.1f}dB snr_mid={row.snr_mid_db:.1f}dB "
        f"snr_end={row.snr_end_db:.1f}dB"
    )
    return 0


def _render_stream(
    samples: np.ndarray,
    params: GruParams,
    voice: VoiceConfig,
    analysis: AnalysisConfig,
    clamp: bool = True,
    reset_on_silence: bool = True,
) -> np.ndarray:
    """Frame loop shared by cmd_render and cmd_bench.

    When both conditioning features are zero the model state and the
    oscillator state are re-zeroed and the frame is emitted as silence, so
    every note starts from a known state and silent spans stay exactly
    silent.
    """
    hop = analysis.hop
    n_frames = len(samples) // hop
    hidden = reset_state(params.hidden_dim)
    synth_state = SynthState.initial()
    out = np.empty(n_frames * hop)
    for k in range(n_frames):
        window = frame_window(samples, k, analysis.yin_window, hop)
        a = rms_norm(window, analysis.db_floor)
        f0 = yin_f0(window, analysis)
        f = f_norm(f0)
        if reset_on_silence and a == 0.0 and f == 0.0:
            hidden = reset_state(params.hidden_dim)
            synth_state = SynthState.initial()
            out[k * hop : (k + 1) * hop] = 0.0
            continue
        controls, hidden = forward_frame(params, hidden, np.array([a, f], dtype=np.float32))
        controls = controls.astype(np.float64)
        if clamp:
            controls = np.clip(controls, 0.0, 1.0)
        out[k * hop : (k + 1) * hop] = render_window(voice, synth_state, controls, f0, hop)
    return out


def cmd_render(args) -> int:
    params, _ = load_model(args.model)
    patch = _load_patch(args.patch, args.voice)
    voice = VoiceConfig.from_patch(patch)
    analysis = AnalysisConfig()
    buffer = wavio.read_wav(args.infile)
    if buffer.sample_rate != analysis.sample_rate:
        raise UnsupportedSampleRate(
            f"expected {analysis.sample_rate} Hz input, got {buffer.sample_rate}"
        )
    samples = buffer.samples
    remainder = len(samples) % analysis.hop
    if remainder:
        samples = np.concatenate([samples, np.zeros(analysis.hop - remainder)])
    rendered = _render_stream(
        samples,
        params,
        voice,
        analysis,
        clamp=not args.no_clamp,
        reset_on_silence=not args.no_reset,
    )
    wavio.write_wav(
        wavio.AudioBuffer(sample_rate=analysis.sample_rate, samples=rendered),
        args.out,
        encoding="float32",
    )
    print(f"wrote {args.out} ({rendered.size} samples)")
    return 0


def cmd_bench(args) -> int:
    params, _ = load_model(args.model)
    patch = _load_patch(args.patch, args.voice)
    voice = VoiceConfig.from_patch(patch)
    analysis = AnalysisConfig()
    hop = analysis.hop

    # deterministic test signal: a mid-range tone at moderate level
    t = np.arange(args.frames * hop) / analysis.sample_rate
    samples = 0.5 * np.sin(2.0 * np.pi * 440.0 * t)

    hidden = reset_state(params.hidden_dim)
    synth_state = SynthState.initial()
    latencies = np.empty(args.frames)
    for k in range(args.frames):
        start = time.perf_counter()
        window = frame_window(samples, k, analysis.yin_window, hop)
        a = rms_norm(window, analysis.db_floor)
        f0 = yin_f0(window, analysis)
        f = f_norm(f0)
        controls, hidden = forward_frame(params, hidden, np.array([a, f], dtype=np.float32))
        render_window(voice, synth_state, np.clip(controls.astype(np.float64), 0.0, 1.0), f0, hop)
        latencies[k] = time.perf_counter() - start

    mean_s = float(latencies.mean())
    p99_s = float(np.percentile(latencies, 99))
    rtf = FRAME_BUDGET_S / mean_s
    print(
        f"frames={args.frames} mean_ms={mean_s * 1e3:.4f} p99_ms={p99_s * 1e3:.4f} "
        f"budget_ms={FRAME_BUDGET_S * 1e3:.4f} realtime_factor={rtf:.2f}"
    )
    return 0


def cmd_features(args) -> int:
    from .features import analyze

    buffer = wavio.read_wav(args.infile)
    frames = analyze(buffer, AnalysisConfig())
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_index", "a", "f", "f0_hz"])
        for k, frame in enumerate(frames):
            writer.writerow([k, f"{frame.a:.8g}", f"{frame.f:.8g}", f"{frame.f0:.8g}"])
    print(f"wrote {args.out} ({len(frames)} frames)")
    return 0


def cmd_patch(args) -> int:
    patch = _load_patch(args.patch, args.voice)
    print(sysex.patch_summary(patch))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fmtone",
        description="Learn and play FM envelope mappings from audio features.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a dataset from a bank voice")
    p.add_argument("--patch", required=True, help="path to a 32-voice .syx bank")
    p.add_argument("--voice", type=int, default=0, help="voice index 0..31")
    p.add_argument("--notes", type=int, default=1000)
    p.add_argument("--frames", type=int, default=1000, help="tuple length K")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output prefix for the three splits")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the envelope model")
    p.add_argument("--dataset", required=True, help="dataset prefix from 'gen'")
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--steps", type=int, default=120000)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--loss-csv", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a test split")
    p.add_argument("--dataset", required=True, help="path to a .test.fmtd file")
    p.add_argument("--model", required=True)
    p.add_argument("--patch", required=True)
    p.add_argument("--voice", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV file to write")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="tone-transfer a WAV file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--patch", required=True)
    p.add_argument("--voice", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--no-clamp", action="store_true", help="do not clamp controls to [0,1]")
    p.add_argument("--no-reset", action="store_true", help="keep state across silence")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("bench", help="measure per-frame inference latency")
    p.add_argument("--model", required=True)
    p.add_argument("--patch", required=True)
    p.add_argument("--voice", type=int, default=0)
    p.add_argument("--frames", type=int, default=10000)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("features", help="dump per-frame features to CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("patch", help="print a voice summary")
    p.add_argument("--patch", required=True)
    p.add_argument("--voice", type=int, default=0)
    p.set_defaults(func=cmd_patch)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FmToneError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
