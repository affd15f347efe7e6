"""Evaluation: envelope L1 on a test split and segmented audio SNR.

Notes are cut into three sample ranges from the amplitude contour alone:
the first 100 ms after note-on, the middle up to where the release ramp
starts, and the ramp itself.  Segments of every test note are
concatenated per class before one SNR is computed for each, so short
notes do not dominate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dataset import Dataset, TrainingTuple
from .errors import EmptyInput, NoNoteFound, NoRampFound, ZeroReference
from .synth import VoiceConfig, render_sequence
from .sysex import Dx7Patch
from .training import l1_loss

SNR_CAP_DB = 200.0
_ZERO_ERROR_POWER = 1e-12
ONSET_SECONDS = 0.1


@dataclass(frozen=True)
class NoteSegments:
    """Half-open sample ranges; mid may be empty for very short notes."""

    onset: tuple[int, int]
    mid: tuple[int, int]
    end: tuple[int, int]


@dataclass
class EvalRow:
    patch_name: str
    envelope_l1: float
    snr_onset_db: float
    snr_mid_db: float
    snr_end_db: float


def snr_db(ref: np.ndarray, est: np.ndarray) -> float:
    """10*log10 of reference power over error power, capped at +200 dB."""
    ref = np.asarray(ref, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if ref.size == 0 or est.size == 0:
        raise EmptyInput("signals must be nonempty")
    if ref.shape != est.shape:
        raise EmptyInput(f"signal shapes differ: {ref.shape} vs {est.shape}")
    ref_power = float(np.sum(ref * ref))
    if ref_power == 0.0:
        raise ZeroReference("reference signal is all zero")
    err_power = float(np.sum((ref - est) ** 2))
    if err_power < _ZERO_ERROR_POWER:
        return SNR_CAP_DB
    return 10.0 * math.log10(ref_power / err_power)


def segment_note(a: np.ndarray, hop: int = 64, sample_rate: int = 44100) -> NoteSegments:
    """Sample ranges for the onset/mid/end of the single note in ``a``."""
    a = np.asarray(a, dtype=np.float64)
    active = np.flatnonzero(a > 0)
    if active.size == 0:
        raise NoNoteFound("amplitude contour never rises above zero")
    on, last = int(active[0]), int(active[-1])
    drops = np.flatnonzero(np.diff(a) < 0) + 1  # frame where a strictly decreased
    drops = drops[(drops > on) & (drops <= last)]
    if drops.size == 0:
        raise NoRampFound("no decaying ramp inside the note span")
    ramp = int(drops[0])

    onset_len = int(round(ONSET_SECONDS * sample_rate))
    onset = (on * hop, min(on * hop + onset_len, ramp * hop))
    mid = (onset[1], ramp * hop)
    end = (ramp * hop, (last + 1) * hop)
    return NoteSegments(onset=onset, mid=mid, end=end)


def make_oracle_predictor() -> Callable[[TrainingTuple], np.ndarray]:
    """Stub predictor that returns the stored ground-truth envelopes."""
    return lambda tup: tup.ol


def evaluate_model(
    predict: Callable[[TrainingTuple], np.ndarray],
    test_set: Dataset,
    patch: Dx7Patch,
    hop: int = 64,
    sample_rate: int = 44100,
) -> EvalRow:
    """Envelope L1 plus onset/mid/end SNR over the whole test split.

    ``predict`` maps a tuple to a (K, 6) envelope prediction.  Both the
    ground truth and the (clamped) prediction are rendered with identical
    fundamental-frequency trajectories recovered from the stored ``f``.
    Notes with a truncated release contribute no end segment.
    """
    if not test_set.tuples:
        raise EmptyInput("test split is empty")
    config = VoiceConfig.from_patch(patch, sample_rate=sample_rate)
    l1s = []
    parts: dict[str, list[tuple[np.ndarray, np.ndarray]]] = {
        "onset": [],
        "mid": [],
        "end": [],
    }
    for tup in test_set.tuples:
        pred = np.asarray(predict(tup))
        l1s.append(l1_loss(pred, tup.ol))
        f = tup.f.astype(np.float64)
        f0 = np.where(f > 0, 440.0 * 2.0 ** ((127.0 * f - 69.0) / 12.0), 0.0)
        ref = render_sequence(config, tup.ol, f0, hop=hop)
        est = render_sequence(config, np.clip(pred, 0.0, 1.0), f0, hop=hop)
        try:
            segments = segment_note(tup.a, hop=hop, sample_rate=sample_rate)
        except NoNoteFound:
            continue
        except NoRampFound:
            active = np.flatnonzero(tup.a > 0)
            on, last = int(active[0]), int(active[-1])
            cut = min(on * hop + int(round(ONSET_SECONDS * sample_rate)), (last + 1) * hop)
            segments = NoteSegments(
                onset=(on * hop, cut), mid=(cut, (last + 1) * hop), end=(0, 0)
            )
        for name, (start, stop) in (
            ("onset", segments.onset),
            ("mid", segments.mid),
            ("end", segments.end),
        ):
            if stop > start:
                parts[name].append((ref[start:stop], est[start:stop]))

    def snr_of(name: str) -> float:
        if not parts[name]:
            return math.nan
        ref = np.concatenate([r for r, _ in parts[name]])
        est = np.concatenate([e for _, e in parts[name]])
        return snr_db(ref, est)

    return EvalRow(
        patch_name=patch.name,
        envelope_l1=float(np.mean(l1s)),
        snr_onset_db=snr_of("onset"),
        snr_mid_db=snr_of("mid"),
        snr_end_db=snr_of("end"),
    )
