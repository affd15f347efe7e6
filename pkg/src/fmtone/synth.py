"""Six-operator phase-modulation oscillator bank.

Routing comes from the classic 32-algorithm chart, stored here as
per-operator bus flags and decoded into a static graph (modulator lists,
carrier set, feedback operator).  Operator outputs are added to the
modulated operator's phase in radians; normalized [0, 1] control inputs
are denormalized to the [0, 2] level range, so a full-level modulator
contributes an index of up to 2 rad.  Carrier outputs are averaged, which
bounds every sample to [-2, 2].

Controls arrive once per frame and are interpolated linearly across each
rendered window, reaching the new values on the window's last sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ShapeMismatch, UnknownAlgorithm
from .sysex import Dx7Patch, OperatorParams, op_frequency

_OUT1, _OUT2, _ADD = 0x01, 0x02, 0x04
_IN1, _IN2 = 0x10, 0x20
_FB_IN, _FB_OUT = 0x40, 0x80

# Per-algorithm operator flags, operators listed 6 down to 1.
_ALGORITHM_FLAGS = (
    (0xC1, 0x11, 0x11, 0x14, 0x01, 0x14),  # 1
    (0x01, 0x11, 0x11, 0x14, 0xC1, 0x14),  # 2
    (0xC1, 0x11, 0x14, 0x01, 0x11, 0x14),  # 3
    (0x41, 0x11, 0x94, 0x01, 0x11, 0x14),  # 4
    (0xC1, 0x14, 0x01, 0x14, 0x01, 0x14),  # 5
    (0x41, 0x94, 0x01, 0x14, 0x01, 0x14),  # 6
    (0xC1, 0x11, 0x05, 0x14, 0x01, 0x14),  # 7
    (0x01, 0x11, 0xC5, 0x14, 0x01, 0x14),  # 8
    (0x01, 0x11, 0x05, 0x14, 0xC1, 0x14),  # 9
    (0x01, 0x05, 0x14, 0xC1, 0x11, 0x14),  # 10
    (0xC1, 0x05, 0x14, 0x01, 0x11, 0x14),  # 11
    (0x01, 0x05, 0x05, 0x14, 0xC1, 0x14),  # 12
    (0xC1, 0x05, 0x05, 0x14, 0x01, 0x14),  # 13
    (0xC1, 0x05, 0x11, 0x14, 0x01, 0x14),  # 14
    (0x01, 0x05, 0x11, 0x14, 0xC1, 0x14),  # 15
    (0xC1, 0x11, 0x02, 0x25, 0x05, 0x14),  # 16
    (0x01, 0x11, 0x02, 0x25, 0xC5, 0x14),  # 17
    (0x01, 0x11, 0x11, 0xC5, 0x05, 0x14),  # 18
    (0xC1, 0x14, 0x14, 0x01, 0x11, 0x14),  # 19
    (0x01, 0x05, 0x14, 0xC1, 0x14, 0x14),  # 20
    (0x01, 0x14, 0x14, 0xC1, 0x14, 0x14),  # 21
    (0xC1, 0x14, 0x14, 0x14, 0x01, 0x14),  # 22
    (0xC1, 0x14, 0x14, 0x01, 0x14, 0x04),  # 23
    (0xC1, 0x14, 0x14, 0x14, 0x04, 0x04),  # 24
    (0xC1, 0x14, 0x14, 0x04, 0x04, 0x04),  # 25
    (0xC1, 0x05, 0x14, 0x01, 0x14, 0x04),  # 26
    (0x01, 0x05, 0x14, 0xC1, 0x14, 0x04),  # 27
    (0x04, 0xC1, 0x11, 0x14, 0x01, 0x14),  # 28
    (0xC1, 0x14, 0x01, 0x14, 0x04, 0x04),  # 29
    (0x04, 0xC1, 0x11, 0x14, 0x04, 0x04),  # 30
    (0xC1, 0x14, 0x04, 0x04, 0x04, 0x04),  # 31
    (0xC4, 0x04, 0x04, 0x04, 0x04, 0x04),  # 32
)


@dataclass(frozen=True)
class AlgorithmSpec:
    """Static routing: modulators[i] are the operators (1-based) whose
    outputs phase-modulate operator i+1."""

    modulators: tuple[tuple[int, ...], ...]
    carriers: tuple[int, ...]
    feedback_op: int | None


@lru_cache(maxsize=None)
def algorithm_table(n: int) -> AlgorithmSpec:
    """Routing for algorithm ``n`` in 1..32."""
    if not 1 <= n <= 32:
        raise UnknownAlgorithm(f"algorithm {n} outside 1..32")
    flags = _ALGORITHM_FLAGS[n - 1]
    mods: dict[int, tuple[int, ...]] = {op: () for op in range(1, 7)}
    carriers: list[int] = []
    feedback_op = None
    bus_one: tuple[int, ...] = ()
    bus_two: tuple[int, ...] = ()
    for j, flag in enumerate(flags):
        op = 6 - j
        if flag & _IN1:
            mods[op] = bus_one
        elif flag & _IN2:
            mods[op] = bus_two
        if flag & _FB_IN:
            feedback_op = op
        if flag & _OUT1:
            bus_one = bus_one + (op,) if flag & _ADD else (op,)
        elif flag & _OUT2:
            bus_two = bus_two + (op,) if flag & _ADD else (op,)
        elif flag & _ADD:
            carriers.append(op)
    return AlgorithmSpec(
        modulators=tuple(mods[op] for op in range(1, 7)),
        carriers=tuple(sorted(carriers)),
        feedback_op=feedback_op,
    )


@dataclass(frozen=True)
class VoiceConfig:
    algorithm: AlgorithmSpec
    operators: tuple[OperatorParams, ...]
    feedback_level: int
    sample_rate: float = 44100.0

    @classmethod
    def from_patch(cls, patch: Dx7Patch, sample_rate: float = 44100.0) -> "VoiceConfig":
        return cls(
            algorithm=algorithm_table(patch.algorithm),
            operators=patch.operators,
            feedback_level=patch.feedback,
            sample_rate=sample_rate,
        )


@dataclass
class SynthState:
    """Mutable per-voice render state: phase accumulators, the feedback
    operator's last two outputs, and the previous frame's controls."""

    phase: np.ndarray
    fb_prev: float
    fb_prev2: float
    last_ol: np.ndarray
    last_f0: float

    @classmethod
    def initial(cls, ol=None, f0: float = 0.0) -> "SynthState":
        last = np.zeros(6) if ol is None else np.asarray(ol, dtype=np.float64).copy()
        return cls(
            phase=np.zeros(6),
            fb_prev=0.0,
            fb_prev2=0.0,
            last_ol=last,
            last_f0=float(f0),
        )


def render_window(
    config: VoiceConfig,
    state: SynthState,
    ol: np.ndarray,
    f0: float,
    n_samples: int,
) -> np.ndarray:
    """Render one control frame's worth of audio and update the state.

    ``ol`` holds the six normalized output levels in [0, 1]; they are
    scaled back to the [0, 2] oscillator range internally.
    """
    ol = np.asarray(ol, dtype=np.float64)
    if ol.shape != (6,):
        raise ShapeMismatch(f"expected six output levels, got shape {ol.shape}")
    if n_samples < 1:
        raise ValueError("window must contain at least one sample")

    ramp = np.arange(1, n_samples + 1) / n_samples
    levels = 2.0 * (state.last_ol + (ol - state.last_ol) * ramp[:, None])
    f0_t = state.last_f0 + (f0 - state.last_f0) * ramp

    spec = config.algorithm
    outputs: dict[int, np.ndarray] = {}
    for op in range(6, 0, -1):  # modulators first: edges always run high to low
        i = op - 1
        op_params = config.operators[i]
        if op_params.freq_mode == "fixed":
            freq = np.full(n_samples, op_frequency(op_params, 0.0))
        else:
            freq = op_frequency(op_params, 1.0) * f0_t
        inc = (2.0 * np.pi / config.sample_rate) * freq
        cum = np.cumsum(inc)
        phases = state.phase[i] + cum - inc  # phase before each sample's advance
        state.phase[i] += cum[-1]

        mod = None
        for j in spec.modulators[i]:
            mod = outputs[j] if mod is None else mod + outputs[j]

        level = levels[:, i]
        if op == spec.feedback_op and config.feedback_level > 0:
            gain = config.feedback_level / 7.0
            prev, prev2 = state.fb_prev, state.fb_prev2
            out = np.empty(n_samples)
            base = phases if mod is None else phases + mod
            for s in range(n_samples):
                value = level[s] * np.sin(base[s] + gain * 0.5 * (prev + prev2))
                out[s] = value
                prev2 = prev
                prev = value
            state.fb_prev, state.fb_prev2 = prev, prev2
        else:
            out = level * np.sin(phases if mod is None else phases + mod)
            if op == spec.feedback_op:
                prev_old = state.fb_prev
                state.fb_prev = float(out[-1])
                state.fb_prev2 = float(out[-2]) if n_samples > 1 else prev_old
        outputs[op] = out

    mix = outputs[spec.carriers[0]].copy()
    for c in spec.carriers[1:]:
        mix += outputs[c]
    mix /= len(spec.carriers)
    state.last_ol = ol.copy()
    state.last_f0 = float(f0)
    return mix


def render_sequence(
    config: VoiceConfig,
    ol_seq: np.ndarray,
    f0_seq: np.ndarray,
    hop: int = 64,
    state: SynthState | None = None,
) -> np.ndarray:
    """Fold render_window over a control sequence with persistent state."""
    ol_seq = np.asarray(ol_seq, dtype=np.float64)
    f0_seq = np.asarray(f0_seq, dtype=np.float64)
    if ol_seq.ndim != 2 or ol_seq.shape[1] != 6 or ol_seq.shape[0] != f0_seq.shape[0]:
        raise ShapeMismatch(
            f"control shapes disagree: {ol_seq.shape} vs {f0_seq.shape}"
        )
    if ol_seq.shape[0] == 0:
        return np.zeros(0)
    if state is None:
        state = SynthState.initial()
    windows = [
        render_window(config, state, ol_seq[k], float(f0_seq[k]), hop)
        for k in range(ol_seq.shape[0])
    ]
    return np.concatenate(windows)
