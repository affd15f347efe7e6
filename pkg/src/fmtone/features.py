"""Frame-rate feature extraction: dB-scale RMS amplitude and YIN pitch.

One feature frame is produced per hop (64 samples at 44.1 kHz, ~689
frames per second).  Analysis windows are right-aligned to the current
hop, so the extractor is causal; windows that start before the stream
are zero-padded on the left.

Normalizations map both features into [0, 1]:

    a = 1 + max(-70, 10*log10(mean(x^2))) / 70        (silence -> 0)
    f = (12*log2(f0/220) + 57.01) / 127               (unvoiced -> 0)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedSampleRate

DB_FLOOR = -70.0
PITCH_NORM_OFFSET = 57.01  # MIDI value of the 220 Hz reference, kept as-is


@dataclass
class AnalysisConfig:
    sample_rate: int = 44100
    hop: int = 64
    yin_window: int = 1024
    yin_threshold: float = 0.15
    rms_window: int = 1024
    db_floor: float = DB_FLOOR
    f0_max: float = 1200.0

    def __post_init__(self):
        if self.hop < 1 or self.yin_window < self.hop or self.rms_window < self.hop:
            raise ValueError("windows must be at least one hop long")


@dataclass(frozen=True)
class FeatureFrame:
    a: float  # normalized amplitude in [0, 1]
    f: float  # normalized pitch in [0, 1]
    f0: float  # Hz; 0 when unvoiced


def rms_norm(window: np.ndarray, db_floor: float = DB_FLOOR) -> float:
    """Normalized dB-scale RMS of one analysis window."""
    window = np.asarray(window, dtype=np.float64)
    if window.size == 0:
        raise ValueError("empty window")
    power = float(np.mean(window * window))
    if power <= 0.0:
        return 0.0
    value = 1.0 + max(db_floor, 10.0 * np.log10(power)) / -db_floor
    return float(min(max(value, 0.0), 1.0))


def f_norm(f0: float) -> float:
    """Map a fundamental in Hz to the normalized MIDI range [0, 1]."""
    if f0 <= 0.0:
        return 0.0
    value = (12.0 * np.log2(f0 / 220.0) + PITCH_NORM_OFFSET) / 127.0
    return float(min(max(value, 0.0), 1.0))


def yin_f0(window: np.ndarray, config: AnalysisConfig) -> float:
    """YIN fundamental-frequency estimate for one window; 0 when unvoiced.

    Difference function over an integration window of half the analysis
    window, cumulative-mean normalization, absolute-threshold pick of the
    first dip, then parabolic refinement.  Candidates must be interior
    local minima: a dip still falling at the largest lag is rejected,
    which puts the lowest detectable pitch near sample_rate / (window/2).
    """
    window = np.asarray(window, dtype=np.float64)
    if window.size != config.yin_window:
        raise ValueError(f"window must have {config.yin_window} samples")
    half = config.yin_window // 2
    tau_max = half  # inclusive largest lag
    tau_min = max(2, int(np.ceil(config.sample_rate / config.f0_max)))

    # d[tau] = sum_{j<half} (x[j] - x[j+tau])^2, via energies and correlation
    corr = np.correlate(window, window[:half], mode="valid")  # tau = 0..half
    cum = np.concatenate(([0.0], np.cumsum(window * window)))
    energy_tail = cum[half : half + tau_max + 1] - cum[0 : tau_max + 1]
    diff = np.maximum(cum[half] + energy_tail - 2.0 * corr, 0.0)

    # cumulative-mean-normalized difference
    cmnd = np.ones_like(diff)
    running = np.cumsum(diff[1:])
    nonzero = running > 0.0
    taus = np.arange(1, tau_max + 1, dtype=np.float64)
    cmnd[1:][nonzero] = diff[1:][nonzero] * taus[nonzero] / running[nonzero]

    below = np.flatnonzero(cmnd[tau_min:tau_max] < config.yin_threshold)
    if below.size == 0:
        return 0.0
    tau = tau_min + int(below[0])
    while tau + 1 <= tau_max and cmnd[tau + 1] < cmnd[tau]:
        tau += 1
    if tau >= tau_max:
        return 0.0  # dip still falling at the edge: period out of range

    left, mid, right = cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]
    denom = left - 2.0 * mid + right
    shift = 0.5 * (left - right) / denom if denom > 0.0 else 0.0
    return config.sample_rate / (tau + shift)


def frame_window(samples: np.ndarray, frame_index: int, window_len: int, hop: int) -> np.ndarray:
    """Right-aligned window for one hop, zero-padded at stream start."""
    end = (frame_index + 1) * hop
    start = end - window_len
    if start >= 0:
        return samples[start:end]
    padded = np.zeros(window_len, dtype=np.float64)
    padded[-end:] = samples[:end]
    return padded


def analyze(audio, config: AnalysisConfig | None = None) -> list[FeatureFrame]:
    """Extract one FeatureFrame per hop from a mono buffer."""
    config = config or AnalysisConfig()
    if audio.sample_rate != config.sample_rate:
        raise UnsupportedSampleRate(
            f"expected {config.sample_rate} Hz input, got {audio.sample_rate}"
        )
    samples = np.asarray(audio.samples, dtype=np.float64)
    n_frames = len(samples) // config.hop
    frames = []
    for k in range(n_frames):
        win = frame_window(samples, k, config.yin_window, config.hop)
        if config.rms_window == config.yin_window:
            rms_win = win
        else:
            rms_win = frame_window(samples, k, config.rms_window, config.hop)
        a = rms_norm(rms_win, config.db_floor)
        f0 = yin_f0(win, config)
        frames.append(FeatureFrame(a=a, f=f_norm(f0), f0=f0))
    return frames
