"""DX7-style envelope generators stepped at the control frame rate.

Each generator is a four-segment state machine (attack, two decays,
sustain, release) whose internal level ``u`` relaxes exponentially toward
the current segment target.  Targets follow the squared level curve
``(L/99)^2`` and segment speed follows ``tau(R) = TAU_MAX * 2^(-R/RATE_HALVING)``,
so rate 0 is glacial and rate 99 settles within a few frames.  The output
is a linear level in [0, 2]:

    level = 2 * u * (output_level/99)^2 * velocity_gain
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
import math

import numpy as np

from .errors import BadFrameOrdering, VelocityOutOfRange
from .sysex import OperatorParams

FRAME_RATE = 44100.0 / 64.0  # ~689.06 control frames per second

TAU_MAX_S = 8.0  # segment time constant at rate 0
RATE_HALVING = 8.0  # rate units per halving of the time constant
SEG_EPSILON = 1e-3  # |u - target| below this completes a segment
ATTACK_DONE_FRAC = 0.995  # attack completes at u >= 0.995 * target
DONE_LEVEL = 1e-3  # "envelope finished" threshold on the [0, 2] output scale


class Segment(Enum):
    ATTACK = "attack"
    DECAY1 = "decay1"
    DECAY2 = "decay2"
    SUSTAIN = "sustain"
    RELEASE = "release"
    DONE = "done"


# Which (rate, level) pair drives each segment. Sustain keeps relaxing
# toward the decay2 target, which holds the plateau.
_SEGMENT_INDEX = {
    Segment.ATTACK: 0,
    Segment.DECAY1: 1,
    Segment.DECAY2: 2,
    Segment.SUSTAIN: 2,
    Segment.RELEASE: 3,
}

_NEXT_ON_COMPLETE = {
    Segment.ATTACK: Segment.DECAY1,
    Segment.DECAY1: Segment.DECAY2,
    Segment.DECAY2: Segment.SUSTAIN,
    Segment.SUSTAIN: Segment.SUSTAIN,
    Segment.RELEASE: Segment.DONE,
}


@dataclass(frozen=True)
class EgConfig:
    rates: tuple[int, int, int, int]
    levels: tuple[int, int, int, int]
    output_level: int
    velocity_sensitivity: int = 0
    frame_rate: float = FRAME_RATE

    def __post_init__(self):
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")

    @classmethod
    def from_operator(cls, op: OperatorParams, frame_rate: float = FRAME_RATE) -> "EgConfig":
        return cls(
            rates=op.eg_rates,
            levels=op.eg_levels,
            output_level=op.output_level,
            velocity_sensitivity=op.velocity_sensitivity,
            frame_rate=frame_rate,
        )


@dataclass(frozen=True)
class EgState:
    """Value-type generator state; a fresh state is silent ('done')."""

    segment: Segment = Segment.DONE
    u: float = 0.0
    key_down: bool = False
    velocity_gain: float = 1.0


def _target(level: int) -> float:
    return (level / 99.0) ** 2


def _tau(rate: int) -> float:
    return TAU_MAX_S * 2.0 ** (-rate / RATE_HALVING)


def eg_note_on(config: EgConfig, state: EgState, velocity: int) -> EgState:
    """Retrigger the attack from the current level."""
    if not 1 <= velocity <= 127:
        raise VelocityOutOfRange(f"velocity {velocity} outside 1..127")
    gain = 1.0 - (config.velocity_sensitivity / 7.0) * (1.0 - velocity / 127.0)
    return replace(state, segment=Segment.ATTACK, key_down=True, velocity_gain=gain)


def eg_note_off(state: EgState) -> EgState:
    if state.segment is Segment.DONE:
        return state
    return replace(state, segment=Segment.RELEASE, key_down=False)


def eg_step(config: EgConfig, state: EgState) -> tuple[EgState, float]:
    """Advance one frame; returns the new state and the linear level in [0, 2]."""
    if state.segment is Segment.DONE:
        return state, 0.0
    idx = _SEGMENT_INDEX[state.segment]
    target = _target(config.levels[idx])
    keep = math.exp(-1.0 / (config.frame_rate * _tau(config.rates[idx])))
    u = target + (state.u - target) * keep

    segment = state.segment
    if segment is Segment.ATTACK:
        # pure exponential approach never reaches its target; close the
        # segment within half a percent instead
        if u >= ATTACK_DONE_FRAC * target or abs(u - target) < SEG_EPSILON:
            segment = Segment.DECAY1
    elif abs(u - target) < SEG_EPSILON:
        segment = _NEXT_ON_COMPLETE[segment]

    new_state = replace(state, segment=segment, u=u)
    if segment is Segment.DONE:
        return new_state, 0.0
    level = 2.0 * u * (config.output_level / 99.0) ** 2 * state.velocity_gain
    return new_state, level


def eg_render(
    configs: list[EgConfig],
    note_on_frame: int,
    note_off_frame: int,
    total_frames: int,
    velocity: int = 127,
) -> np.ndarray:
    """Render the six generators for one note.

    Returns a (total_frames, 6) array of linear levels in [0, 2]; rows
    before note-on and after every generator finishes are zero.
    """
    if len(configs) != 6:
        raise ValueError("expected exactly six generator configs")
    if not 0 <= note_on_frame < note_off_frame <= total_frames:
        raise BadFrameOrdering(
            f"need note_on < note_off <= total, got "
            f"{note_on_frame}, {note_off_frame}, {total_frames}"
        )
    out = np.zeros((total_frames, 6))
    states = [EgState() for _ in configs]
    for k in range(note_on_frame, total_frames):
        if k == note_on_frame:
            states = [eg_note_on(c, s, velocity) for c, s in zip(configs, states)]
        if k == note_off_frame:
            states = [eg_note_off(s) for s in states]
        for i, config in enumerate(configs):
            states[i], out[k, i] = eg_step(config, states[i])
        if k >= note_off_frame and all(s.segment is Segment.DONE for s in states):
            break
    return out
