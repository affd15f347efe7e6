"""Envelope learning: L1 minimization over full sequences with Adam.

Backpropagation through time is exact (no truncation): sequences are
short enough that full credit assignment is affordable.  The L1
subgradient at zero is taken as zero so perfectly matched frames (such as
zero padding) contribute no gradient noise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .dataset import Dataset
from .errors import EmptyDataset, ShapeMismatch
from .gru import GruParams, ModelConfig, SequenceCache, forward_sequence, init_params, reset_state


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    lr_decay: float = 0.98
    lr_decay_every: int = 10000
    batch_size: int = 32
    total_steps: int = 120000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    report_every: int = 500

    def __post_init__(self):
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must be in (0, 1]")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.total_steps < 0:
            raise ValueError("bad training configuration")


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: GruParams, config: TrainConfig) -> "AdamState":
        return cls(
            m=[np.zeros_like(t) for t in params.tensors()],
            v=[np.zeros_like(t) for t in params.tensors()],
            beta1=config.adam_beta1,
            beta2=config.adam_beta2,
            eps=config.adam_eps,
        )


@dataclass
class LossReport:
    step: int
    train_l1: float
    valid_l1: float
    lr: float


def l1_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean absolute difference over every frame, channel and batch element."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"loss shapes differ: {pred.shape} vs {target.shape}")
    return float(np.abs(pred - target).mean())


def backward(params: GruParams, cache: SequenceCache, target: np.ndarray) -> GruParams:
    """Exact gradients of the mean L1 loss for every parameter tensor."""
    target = np.asarray(target, dtype=cache.ys.dtype)
    if cache.ys.shape != target.shape:
        raise ShapeMismatch(f"target shape {target.shape} != {cache.ys.shape}")
    xs, hs, z, r, n, rn = cache.xs, cache.hs, cache.z, cache.r, cache.n, cache.rn
    steps = xs.shape[0]
    hidden = params.hidden_dim
    lead_axes = tuple(range(cache.ys.ndim - 1))

    dy = np.sign(cache.ys - target) / cache.ys.size
    h_after = hs[1:]
    dyf = dy.reshape(-1, dy.shape[-1])
    dw_o = dyf.T @ h_after.reshape(-1, hidden)
    db_o = dy.sum(axis=lead_axes)
    dh_from_y = (dyf @ params.w_o).reshape(z.shape)

    # frame-independent derivative factors, computed in bulk
    zd = z * (1.0 - z)
    rd = r * (1.0 - r)
    nd = 1.0 - n * n
    one_minus_z = 1.0 - z
    u_rec = np.concatenate([params.u_z, params.u_r, params.u_n], axis=0)  # (3H, H)

    # gate pre-activation gradients, stacked [daz, dar, danr] per frame
    dgates = np.empty((*z.shape[:-1], 3 * hidden), dtype=z.dtype)
    dan = np.empty_like(z)
    dh = np.zeros_like(hs[0])
    for k in range(steps - 1, -1, -1):
        dh = dh + dh_from_y[k]
        dank = dh * one_minus_z[k] * nd[k]
        slab = dgates[k]
        slab[..., :hidden] = dh * (hs[k] - n[k]) * zd[k]
        slab[..., hidden : 2 * hidden] = dank * rn[k] * rd[k]
        slab[..., 2 * hidden :] = dank * r[k]
        dan[k] = dank
        dh = dh * z[k] + slab @ u_rec

    x_flat = xs.reshape(-1, xs.shape[-1])
    h_prev_flat = hs[:-1].reshape(-1, hidden)
    dgates_flat = dgates.reshape(-1, 3 * hidden)
    d_in = dgates_flat.T @ x_flat  # (3H, in): rows are dW_z, dW_r, dW_(n via danr)
    d_rec = dgates_flat.T @ h_prev_flat  # (3H, H)
    d_bias = dgates_flat.sum(axis=0)
    dan_flat = dan.reshape(-1, hidden)
    return GruParams(
        w_z=d_in[:hidden],
        w_r=d_in[hidden : 2 * hidden],
        w_n=dan_flat.T @ x_flat,
        u_z=d_rec[:hidden],
        u_r=d_rec[hidden : 2 * hidden],
        u_n=d_rec[2 * hidden :],
        b_z=d_bias[:hidden],
        b_r=d_bias[hidden : 2 * hidden],
        b_n=dan_flat.sum(axis=0),
        c_n=d_bias[2 * hidden :],
        w_o=dw_o,
        b_o=db_o,
    )


def adam_step(
    params: GruParams, grads: GruParams, state: AdamState, lr: float
) -> tuple[GruParams, AdamState]:
    """Bias-corrected Adam update, in place."""
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params.tensors(), grads.tensors(), state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def lr_at(config: TrainConfig, step: int) -> float:
    """Learning rate at a (1-indexed) step under the staircase decay."""
    return config.learning_rate * config.lr_decay ** (step // config.lr_decay_every)


def _stack_inputs(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    xs = np.stack(
        [np.stack([t.a, t.f], axis=-1) for t in ds.tuples], axis=1
    )  # (K, M, 2)
    targets = np.stack([t.ol for t in ds.tuples], axis=1)  # (K, M, 6)
    return np.ascontiguousarray(xs), np.ascontiguousarray(targets)


def train(
    train_set: Dataset,
    valid_set: Dataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
) -> tuple[GruParams, list[LossReport]]:
    """Run the full training loop; returns final parameters and loss reports.

    Batches are sampled with replacement.  A report row is recorded at the
    first step, every ``report_every`` steps, and at the last step.
    """
    if not train_set.tuples or not valid_set.tuples:
        raise EmptyDataset("train and validation splits must be nonempty")
    params = init_params(model_config, train_config.seed)
    state = AdamState.for_params(params, train_config)
    rng = np.random.default_rng(train_config.seed)

    xs_all, target_all = _stack_inputs(train_set)
    valid_xs, valid_target = _stack_inputs(valid_set)
    m = xs_all.shape[1]

    reports: list[LossReport] = []
    # the frame loop is a chain of tiny matmuls; BLAS threading only thrashes
    with threadpool_limits(limits=1):
        for step in range(1, train_config.total_steps + 1):
            lr = lr_at(train_config, step)
            idx = rng.integers(0, m, size=train_config.batch_size)
            xs = np.ascontiguousarray(xs_all[:, idx])
            target = np.ascontiguousarray(target_all[:, idx])
            h0 = reset_state(model_config.hidden_dim, batch=train_config.batch_size)
            ys, cache = forward_sequence(params, h0, xs)
            train_l1 = l1_loss(ys, target)
            grads = backward(params, cache, target)
            params, state = adam_step(params, grads, state, lr)
            if (
                step == 1
                or step % train_config.report_every == 0
                or step == train_config.total_steps
            ):
                h0v = reset_state(model_config.hidden_dim, batch=valid_xs.shape[1])
                valid_ys, _ = forward_sequence(params, h0v, valid_xs)
                reports.append(
                    LossReport(
                        step=step,
                        train_l1=train_l1,
                        valid_l1=l1_loss(valid_ys, valid_target),
                        lr=lr,
                    )
                )
    return params, reports


def write_loss_csv(reports: list[LossReport], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "train_l1", "valid_l1", "lr"])
        for rep in reports:
            writer.writerow([rep.step, f"{rep.train_l1:.8g}", f"{rep.valid_l1:.8g}", f"{rep.lr:.8g}"])
