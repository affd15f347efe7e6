"""Training-set generation: aligned (amplitude, pitch, envelope) tuples.

Each tuple models one isolated note at frame rate: ``a`` is a trapezoid
(velocity step while the key is down, then a linear ramp to zero that ends
when the last oscillator envelope dies), ``f`` is a pitch step that stays
valid until the same frame, and ``ol`` holds the six envelope levels
normalized from [0, 2] to [0, 1].  Tuples are zero-padded to a common
length with a randomized leading/trailing split so note position carries
no information.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .envelope import DONE_LEVEL, FRAME_RATE, EgConfig, eg_render
from .errors import (
    BadMagic,
    DatasetTooSmall,
    IoError,
    TupleOverflow,
    VersionMismatch,
)
from .sysex import Dx7Patch

NOTE_MIN_FRAMES = 600
NOTE_MAX_FRAMES = 732
TERMINUS_LEVEL = DONE_LEVEL / 2.0  # 5e-4 on the normalized [0, 1] scale

FORMAT_MAGIC = b"FMTD"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHdII10sQ")


@dataclass(frozen=True)
class NoteEvent:
    velocity: int  # 1..127
    note: int  # 0..127
    duration_frames: int


@dataclass
class TrainingTuple:
    a: np.ndarray  # (K,) float32 in [0, 1]
    f: np.ndarray  # (K,) float32 in [0, 1]
    ol: np.ndarray  # (K, 6) float32 in [0, 1]
    truncated: bool = False


@dataclass
class DatasetMeta:
    patch_name: str
    frame_rate: float = FRAME_RATE
    length: int = 1000
    seed: int = 0
    version: int = FORMAT_VERSION


@dataclass
class Dataset:
    tuples: list[TrainingTuple]
    meta: DatasetMeta = field(default_factory=lambda: DatasetMeta(patch_name=""))


def gen_notes(n: int, seed: int) -> list[NoteEvent]:
    """Draw ``n`` random note events, reproducibly from ``seed``."""
    if n < 1:
        raise ValueError("need at least one note")
    rng = np.random.default_rng(seed)
    velocities = rng.integers(1, 128, size=n)
    notes = rng.integers(0, 128, size=n)
    durations = rng.integers(NOTE_MIN_FRAMES, NOTE_MAX_FRAMES + 1, size=n)
    return [
        NoteEvent(int(v), int(p), int(d))
        for v, p, d in zip(velocities, notes, durations)
    ]


def render_tuple(
    patch: Dx7Patch,
    event: NoteEvent,
    length: int,
    rng: np.random.Generator | None = None,
) -> TrainingTuple:
    """Render one aligned tuple of ``length`` frames for a single note.

    ``rng`` draws the leading/trailing zero-padding split; without it the
    note is centered.  A release tail that does not fit is truncated at the
    final frame and the tuple flagged.
    """
    if event.duration_frames > length:
        raise TupleOverflow(
            f"note of {event.duration_frames} frames does not fit in {length}"
        )
    configs = [EgConfig.from_operator(op) for op in patch.operators]
    levels = eg_render(configs, 0, event.duration_frames, length, event.velocity)
    ol = levels / 2.0

    live = np.flatnonzero((ol >= TERMINUS_LEVEL).any(axis=1))
    if live.size:
        end = int(live[-1]) + 1
        truncated = end == length  # tail never fell below the threshold
    else:
        end = event.duration_frames  # degenerate patch: nothing ever sounded
        truncated = False
    end = max(end, event.duration_frames)

    amp = event.velocity / 127.0
    a_note = np.zeros(end)
    a_note[: event.duration_frames] = amp
    ramp = np.arange(event.duration_frames, end)
    if ramp.size:
        # affine ramp that would reach exactly zero one frame past the
        # last live envelope frame
        a_note[ramp] = amp * (end - ramp) / (end - event.duration_frames + 1)
    f_note = np.full(end, event.note / 127.0)

    lead = int(rng.integers(0, length - end + 1)) if rng is not None else (length - end) // 2
    a = np.zeros(length, dtype=np.float32)
    f = np.zeros(length, dtype=np.float32)
    padded_ol = np.zeros((length, 6), dtype=np.float32)
    a[lead : lead + end] = a_note
    f[lead : lead + end] = f_note
    padded_ol[lead : lead + end] = ol[:end]
    return TrainingTuple(a=a, f=f, ol=padded_ol, truncated=truncated)


def build_dataset(patch: Dx7Patch, n: int, length: int, seed: int) -> Dataset:
    if n < 10:
        raise DatasetTooSmall(f"need at least 10 notes, got {n}")
    events = gen_notes(n, seed)
    pad_rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, 0x70AD])
    tuples = [render_tuple(patch, event, length, pad_rng) for event in events]
    meta = DatasetMeta(patch_name=patch.name, length=length, seed=seed)
    return Dataset(tuples=tuples, meta=meta)


def split_dataset(ds: Dataset, seed: int) -> tuple[Dataset, Dataset, Dataset]:
    """Disjoint 0.8 / 0.1 / remainder partition by shuffled indices."""
    m = len(ds.tuples)
    if m < 10:
        raise DatasetTooSmall(f"need at least 10 tuples to split, got {m}")
    perm = np.random.default_rng(seed).permutation(m)
    n_train = int(0.8 * m)
    n_valid = int(0.1 * m)
    parts = (
        perm[:n_train],
        perm[n_train : n_train + n_valid],
        perm[n_train + n_valid :],
    )
    return tuple(
        Dataset(tuples=[ds.tuples[i] for i in idx], meta=ds.meta) for idx in parts
    )


def save_dataset(ds: Dataset, path) -> None:
    name = ds.meta.patch_name.encode("latin-1", "replace")[:10].ljust(10)
    header = _HEADER.pack(
        FORMAT_MAGIC,
        ds.meta.version,
        ds.meta.frame_rate,
        ds.meta.length,
        len(ds.tuples),
        name,
        ds.meta.seed & 0xFFFFFFFFFFFFFFFF,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for tup in ds.tuples:
            fh.write(np.ascontiguousarray(tup.a, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(tup.f, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(tup.ol, dtype="<f4").tobytes())


def load_dataset(path) -> Dataset:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if len(blob) < _HEADER.size or blob[:4] != FORMAT_MAGIC:
        raise BadMagic(f"{path} is not a dataset file")
    magic, version, frame_rate, length, m, name, seed = _HEADER.unpack_from(blob)
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"dataset version {version}, expected {FORMAT_VERSION}")
    record = 4 * length + 4 * length + 4 * length * 6
    expected = _HEADER.size + m * record
    if len(blob) != expected:
        raise IoError(f"{path}: expected {expected} bytes, found {len(blob)}")
    tuples = []
    offset = _HEADER.size
    for _ in range(m):
        a = np.frombuffer(blob, dtype="<f4", count=length, offset=offset).copy()
        offset += 4 * length
        f = np.frombuffer(blob, dtype="<f4", count=length, offset=offset).copy()
        offset += 4 * length
        ol = (
            np.frombuffer(blob, dtype="<f4", count=length * 6, offset=offset)
            .reshape(length, 6)
            .copy()
        )
        offset += 4 * length * 6
        tuples.append(TrainingTuple(a=a, f=f, ol=ol))
    meta = DatasetMeta(
        patch_name=name.decode("latin-1"),
        frame_rate=frame_rate,
        length=length,
        seed=seed,
        version=version,
    )
    return Dataset(tuples=tuples, meta=meta)
