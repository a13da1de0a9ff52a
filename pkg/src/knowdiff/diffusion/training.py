"""Denoiser training: x0-reconstruction loss and Adam-driven minibatch descent.

Each step draws a timestep t ~ U(eps_t, 1) and fresh Gaussian noise per
example, forms the exact forward-marginal sample, prepends the current-state
frame, and regresses the network output onto the clean trajectory with mean
squared error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import NumericError, ShapeError
from ..trajectory import EgoState
from .network import DenoiserModel
from .schedule import NoiseSchedule, forward_noise


@dataclass
class TrainingSet:
    """Stacked training arrays: clean pose trajectories, state frames, contexts."""

    x0: np.ndarray   # (N, T, 4)
    s: np.ndarray    # (N, 4)
    ctx: np.ndarray  # (N, context_dim)

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=np.float64)
        self.s = np.asarray(self.s, dtype=np.float64)
        self.ctx = np.asarray(self.ctx, dtype=np.float64)
        n = len(self.x0)
        if len(self.s) != n or len(self.ctx) != n:
            raise ShapeError("x0, s, ctx must have equal first dimensions")

    def __len__(self) -> int:
        return len(self.x0)


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1:
            raise ValueError("steps and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def _state_vector(s) -> np.ndarray:
    if isinstance(s, EgoState):
        return s.frame_vector()
    return np.asarray(s, dtype=np.float64)


def _batched_loss(model: DenoiserModel, sched: NoiseSchedule,
                  x0: np.ndarray, s: np.ndarray, t: np.ndarray,
                  noise: np.ndarray, ctx: np.ndarray, with_grads: bool):
    batch = x0.shape[0]
    mean_c = sched.mean_coeff(t)[:, None, None]
    sig = sched.sigma(t)[:, None, None]
    x_t = mean_c * x0 + sig * noise
    x_input = np.concatenate([s[:, None, :], x_t], axis=1)
    if not with_grads:
        out = model.forward(x_input, t, ctx)
        return float(np.mean((out - x0) ** 2)), None
    out, cache = model.forward(x_input, t, ctx, with_cache=True)
    diff = out - x0
    loss = float(np.mean(diff ** 2))
    grad_out = 2.0 * diff / diff.size
    grads = model.backward(cache, grad_out)
    return loss, grads


def training_loss(model: DenoiserModel, sched: NoiseSchedule, x0, s,
                  t: float, noise, ctx) -> float:
    """Reconstruction loss for one example at a fixed timestep and noise draw."""
    x0 = np.asarray(getattr(x0, "frames", x0), dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    x_t = forward_noise(sched, x0, t, noise)
    x_input = np.concatenate([_state_vector(s)[None, :], x_t], axis=0)
    out = model.forward(x_input[None], t, np.asarray(ctx, dtype=np.float64)[None])
    return float(np.mean((out[0] - x0) ** 2))


def loss_and_grads(model: DenoiserModel, sched: NoiseSchedule, x0, s,
                   t: float, noise, ctx):
    """(loss, parameter gradients) for one example — the analytic side of the
    finite-difference check."""
    x0 = np.asarray(getattr(x0, "frames", x0), dtype=np.float64)
    return _batched_loss(
        model, sched,
        x0[None], _state_vector(s)[None], np.atleast_1d(np.float64(t)),
        np.asarray(noise, dtype=np.float64)[None],
        np.asarray(ctx, dtype=np.float64)[None],
        with_grads=True,
    )


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_update(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
                state: AdamState, cfg: TrainConfig) -> None:
    state.step += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    bias1 = 1.0 - b1 ** state.step
    bias2 = 1.0 - b2 ** state.step
    for name, grad in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(grad)
            state.v[name] = np.zeros_like(grad)
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * grad
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * grad * grad
        m_hat = state.m[name] / bias1
        v_hat = state.v[name] / bias2
        params[name] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def train(model: DenoiserModel, sched: NoiseSchedule, dataset: TrainingSet,
          cfg: TrainConfig) -> list[float]:
    """Minibatch Adam on the reconstruction loss; returns the per-step losses.

    Fully determined by (model parameters, dataset, cfg.seed): timesteps and
    noise are drawn per example per step from one seeded generator.
    """
    if len(dataset) == 0:
        raise ValueError("training dataset is empty")
    rng = np.random.default_rng(cfg.seed)
    adam = AdamState()
    horizon = model.arch.horizon
    losses: list[float] = []
    for step in range(cfg.steps):
        idx = rng.integers(0, len(dataset), size=cfg.batch_size)
        t = rng.uniform(sched.eps_t, 1.0, size=cfg.batch_size)
        noise = rng.standard_normal((cfg.batch_size, horizon, 4))
        loss, grads = _batched_loss(
            model, sched, dataset.x0[idx], dataset.s[idx], t, noise,
            dataset.ctx[idx], with_grads=True)
        if not np.isfinite(loss):
            raise NumericError(f"non-finite training loss at step {step}: {loss}")
        adam_update(model.params, grads, adam, cfg)
        losses.append(loss)
    return losses
