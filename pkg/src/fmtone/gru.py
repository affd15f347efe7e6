"""A single gated recurrent unit plus affine output head, on bare numpy.

The cell maps a two-component feature frame (amplitude, pitch) and the
previous hidden state to six raw envelope controls:

    z  = sigmoid(W_z x + U_z h + b_z)
    r  = sigmoid(W_r x + U_r h + b_r)
    n  = tanh(W_n x + b_n + r * (U_n h + c_n))
    h' = (1 - z) * n + z * h
    y  = W_o h' + b_o

All functions accept a single frame (shapes ``(2,)``/``(H,)``) or a batch
(``(B, 2)``/``(B, H)``).  Outputs are raw; clamping to [0, 1] is the
caller's business.

Internally the three gate projections run as one stacked matmul per
frame.  forward_sequence drives the exact same per-frame kernel as
forward_frame, so folding one is bit-identical to iterating the other.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, fields

import numpy as np

from .errors import BadMagic, IoError, ShapeMismatch, VersionMismatch

MODEL_MAGIC = b"FMTM"
MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sHIII")


@dataclass
class ModelConfig:
    hidden_dim: int = 128
    input_dim: int = 2
    output_dim: int = 6

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")


@dataclass
class GruParams:
    """Parameter tensors; field order is also the serialization order."""

    w_z: np.ndarray
    w_r: np.ndarray
    w_n: np.ndarray
    u_z: np.ndarray
    u_r: np.ndarray
    u_n: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_n: np.ndarray
    c_n: np.ndarray
    w_o: np.ndarray
    b_o: np.ndarray

    def tensors(self) -> list[np.ndarray]:
        return [getattr(self, f.name) for f in fields(self)]

    def astype(self, dtype) -> "GruParams":
        return GruParams(*[t.astype(dtype) for t in self.tensors()])

    def copy(self) -> "GruParams":
        return GruParams(*[t.copy() for t in self.tensors()])

    @property
    def hidden_dim(self) -> int:
        return self.w_z.shape[0]

    @property
    def config(self) -> ModelConfig:
        return ModelConfig(
            hidden_dim=self.hidden_dim,
            input_dim=self.w_z.shape[1],
            output_dim=self.w_o.shape[0],
        )


def _shapes(config: ModelConfig) -> list[tuple[int, ...]]:
    h, i, o = config.hidden_dim, config.input_dim, config.output_dim
    return [
        (h, i), (h, i), (h, i),
        (h, h), (h, h), (h, h),
        (h,), (h,), (h,), (h,),
        (o, h), (o,),
    ]


def init_params(config: ModelConfig, seed: int) -> GruParams:
    """Uniform(-1/sqrt(H), 1/sqrt(H)) initialization for every tensor."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(config.hidden_dim)
    tensors = [
        rng.uniform(-bound, bound, size=shape).astype(np.float32)
        for shape in _shapes(config)
    ]
    return GruParams(*tensors)


def reset_state(hidden_dim: int, batch: int | None = None, dtype=np.float32) -> np.ndarray:
    """All-zero hidden state (optionally batched)."""
    shape = (hidden_dim,) if batch is None else (batch, hidden_dim)
    return np.zeros(shape, dtype=dtype)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


class _FusedWeights:
    """Gate weights stacked [z; r; n] so one matmul covers all three."""

    __slots__ = ("w_in", "u_rec", "b_in", "hidden")

    def __init__(self, p: GruParams):
        self.w_in = np.concatenate([p.w_z, p.w_r, p.w_n], axis=0)  # (3H, in)
        self.u_rec = np.concatenate([p.u_z, p.u_r, p.u_n], axis=0)  # (3H, H)
        self.b_in = np.concatenate([p.b_z, p.b_r, p.b_n])  # (3H,)
        self.hidden = p.hidden_dim


def _step(p: GruParams, fused: _FusedWeights, h: np.ndarray, x: np.ndarray):
    hid = fused.hidden
    gx = x @ fused.w_in.T + fused.b_in
    gh = h @ fused.u_rec.T
    z = _sigmoid(gx[..., :hid] + gh[..., :hid])
    r = _sigmoid(gx[..., hid : 2 * hid] + gh[..., hid : 2 * hid])
    rn = gh[..., 2 * hid :] + p.c_n
    n = np.tanh(gx[..., 2 * hid :] + r * rn)
    h2 = (1.0 - z) * n + z * h
    y = h2 @ p.w_o.T + p.b_o
    return y, h2, z, r, n, rn


def forward_frame(
    params: GruParams, h: np.ndarray, x
) -> tuple[np.ndarray, np.ndarray]:
    """One frame: returns (raw controls, next hidden state)."""
    x = np.asarray(x, dtype=params.w_z.dtype)
    y, h2, *_ = _step(params, _FusedWeights(params), h, x)
    return y, h2


@dataclass
class SequenceCache:
    """Per-frame activations retained for backpropagation through time."""

    xs: np.ndarray  # (K, ..., 2)
    hs: np.ndarray  # (K + 1, ..., H); hs[0] is the initial state
    z: np.ndarray
    r: np.ndarray
    n: np.ndarray
    rn: np.ndarray  # U_n h_prev + c_n
    ys: np.ndarray  # (K, ..., 6)


def forward_sequence(
    params: GruParams, h0: np.ndarray, xs: np.ndarray
) -> tuple[np.ndarray, SequenceCache]:
    """Fold the cell over a sequence; equivalent to iterating forward_frame."""
    xs = np.asarray(xs, dtype=params.w_z.dtype)
    steps = xs.shape[0]
    hidden = params.hidden_dim
    out_dim = params.w_o.shape[0]
    lead = xs.shape[1:-1]
    dtype = params.w_z.dtype
    fused = _FusedWeights(params)

    hs = np.empty((steps + 1, *lead, hidden), dtype=dtype)
    z = np.empty((steps, *lead, hidden), dtype=dtype)
    r = np.empty_like(z)
    n = np.empty_like(z)
    rn = np.empty_like(z)
    ys = np.empty((steps, *lead, out_dim), dtype=dtype)

    h = np.asarray(h0, dtype=dtype)
    hs[0] = h
    for k in range(steps):
        ys[k], h, z[k], r[k], n[k], rn[k] = _step(params, fused, h, xs[k])
        hs[k + 1] = h
    cache = SequenceCache(xs=xs, hs=hs, z=z, r=r, n=n, rn=rn, ys=ys)
    return ys, cache


def save_model(params: GruParams, config: ModelConfig, path) -> None:
    header = _MODEL_HEADER.pack(
        MODEL_MAGIC,
        MODEL_VERSION,
        config.input_dim,
        config.hidden_dim,
        config.output_dim,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for tensor in params.tensors():
            fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def load_model(path) -> tuple[GruParams, ModelConfig]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if len(blob) < _MODEL_HEADER.size or blob[:4] != MODEL_MAGIC:
        raise BadMagic(f"{path} is not a model file")
    _, version, input_dim, hidden_dim, output_dim = _MODEL_HEADER.unpack_from(blob)
    if version != MODEL_VERSION:
        raise VersionMismatch(f"model version {version}, expected {MODEL_VERSION}")
    config = ModelConfig(
        hidden_dim=hidden_dim, input_dim=input_dim, output_dim=output_dim
    )
    shapes = _shapes(config)
    expected = _MODEL_HEADER.size + 4 * sum(int(np.prod(s)) for s in shapes)
    if len(blob) != expected:
        raise ShapeMismatch(
            f"{path}: header dims imply {expected} bytes, found {len(blob)}"
        )
    tensors = []
    offset = _MODEL_HEADER.size
    for shape in shapes:
        count = int(np.prod(shape))
        arr = (
            np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
            .reshape(shape)
            .copy()
        )
        tensors.append(arr)
        offset += 4 * count
    return GruParams(*tensors), config
