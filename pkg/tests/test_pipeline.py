"""Closed-loop checks that need the desk-scale trained model."""

import numpy as np

from fmtone.dataset import NoteEvent, render_tuple
from fmtone.features import AnalysisConfig, f_norm, frame_window, rms_norm, yin_f0
from fmtone.gru import forward_frame, forward_sequence, reset_state

SR = 44100
HOP = 64


def test_trained_outputs_stay_near_unit_range(desk_bundle):
    # raw (unclamped) predictions on held-out tuples stay in a soft range
    params = desk_bundle["params"]
    for tup in desk_bundle["test"].tuples[:5]:
        xs = np.stack([tup.a, tup.f], axis=-1)
        ys, _ = forward_sequence(params, reset_state(params.hidden_dim), xs)
        assert ys.min() > -0.1
        assert ys.max() < 1.1


def _amp_for_target(a_target):
    # sine amplitude whose windowed dB-RMS feature equals a_target
    return np.sqrt(2.0) * 10.0 ** (3.5 * (a_target - 1.0))


def test_synthetic_trapezoid_tone_reproduces_dataset_envelopes(desk_bundle):
    """A tone shaped like the dataset's note model, fed through the real
    feature extractors, must drive the model to the same envelopes it was
    trained on for that (velocity, note)."""
    patch = desk_bundle["patch"]
    params = desk_bundle["params"]
    event = NoteEvent(velocity=100, note=60, duration_frames=650)
    tup = render_tuple(patch, event, 1000)  # centered, no random padding

    f0 = 440.0 * 2.0 ** ((event.note - 69) / 12.0)
    frames = tup.a.shape[0]
    amp = np.where(tup.a > 0, _amp_for_target(tup.a.astype(np.float64)), 0.0)
    per_sample_amp = np.repeat(amp, HOP)
    t = np.arange(frames * HOP) / SR
    audio = per_sample_amp * np.sin(2 * np.pi * f0 * t)

    analysis = AnalysisConfig()
    hidden = reset_state(params.hidden_dim)
    predicted = np.zeros((frames, 6), dtype=np.float64)
    for k in range(frames):
        window = frame_window(audio, k, analysis.yin_window, HOP)
        a_k = rms_norm(window, analysis.db_floor)
        f0_k = yin_f0(window, analysis)
        f_k = f_norm(f0_k)
        if a_k == 0.0 and f_k == 0.0:
            hidden = reset_state(params.hidden_dim)
            continue
        controls, hidden = forward_frame(
            params, hidden, np.array([a_k, f_k], dtype=np.float32)
        )
        predicted[k] = np.clip(controls.astype(np.float64), 0.0, 1.0)

    l1 = float(np.abs(predicted - tup.ol).mean())
    assert l1 < 0.05
