"""Time-conditioned residual MLP denoiser with explicit forward/backward.

The model maps a flattened (T+1)x4 state+trajectory block, a sinusoidal time
embedding, and a context vector to a TxF4 clean-trajectory estimate. A skip
connection adds the noisy-trajectory slice of the input to the output, so a
zero-initialized final layer yields the identity map — the starting point the
truncated inference scheme relies on. Gradients are computed analytically
in float64, which keeps them checkable against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ..exceptions import NumericError, ShapeError
from ..trajectory import PoseTrajectory

TIME_EMBED_DIM = 32
CONTEXT_DIM = 32

_HEAD_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class Architecture:
    horizon: int = 16
    dt: float = 0.5
    hidden_width: int = 256
    hidden_layers: int = 3
    time_embed_dim: int = TIME_EMBED_DIM
    context_dim: int = CONTEXT_DIM
    position_scale: float = 50.0
    speed_scale: float = 10.0
    version: int = 1

    @property
    def input_dim(self) -> int:
        return (self.horizon + 1) * 4 + self.time_embed_dim + self.context_dim

    @property
    def output_dim(self) -> int:
        return self.horizon * 4

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Architecture":
        return cls(**json.loads(text))


def time_embedding(t, dim: int = TIME_EMBED_DIM) -> np.ndarray:
    """Sinusoidal embedding of a continuous timestep in (0, 1].

    Frequencies are log-spaced over [1, 1000] so both coarse and fine time
    scales are resolved.
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = 10.0 ** np.linspace(0.0, 3.0, half)
    angles = t[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(angles), np.cos(angles)], axis=1)
    return emb if emb.shape[0] > 1 else emb


def _input_scale(arch: Architecture) -> np.ndarray:
    """Per-component normalization of the raw input vector.

    Positions are divided by position_scale so tanh units do not saturate at
    initialization; heading channels, time embedding, and one-hot context
    entries are already O(1).
    """
    scale = np.ones(arch.input_dim)
    frame = np.array([1.0 / arch.position_scale, 1.0 / arch.position_scale, 1.0, 1.0])
    n_frame = (arch.horizon + 1) * 4
    scale[:n_frame] = np.tile(frame, arch.horizon + 1)
    ctx_start = n_frame + arch.time_embed_dim
    if arch.context_dim >= 5:
        scale[ctx_start:ctx_start + 2] = 1.0 / arch.position_scale  # goal offset
        scale[ctx_start + 4] = 1.0 / arch.speed_scale               # current speed
    return scale


class DenoiserModel:
    """Named-parameter container plus the forward/backward passes."""

    def __init__(self, arch: Architecture, params: dict[str, np.ndarray]):
        self.arch = arch
        self.params = params
        self.n_forward_calls = 0
        self._scale = _input_scale(arch)

    @classmethod
    def initialize(cls, arch: Architecture, rng: np.random.Generator,
                   zero_final: bool = True) -> "DenoiserModel":
        """Gaussian fan-in init; zero_final gives the identity-at-init model."""
        dims = [arch.input_dim] + [arch.hidden_width] * arch.hidden_layers
        params: dict[str, np.ndarray] = {}
        for i in range(arch.hidden_layers):
            params[f"w{i}"] = rng.normal(0.0, 1.0 / np.sqrt(dims[i]), (dims[i], dims[i + 1]))
            params[f"b{i}"] = np.zeros(dims[i + 1])
        if zero_final:
            params["w_out"] = np.zeros((dims[-1], arch.output_dim))
            params["b_out"] = np.zeros(arch.output_dim)
        else:
            params["w_out"] = rng.normal(0.0, 1.0 / np.sqrt(dims[-1]),
                                         (dims[-1], arch.output_dim))
            params["b_out"] = np.zeros(arch.output_dim)
        return cls(arch, params)

    def n_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def assemble(self, x_input: np.ndarray, t, ctx: np.ndarray):
        """Build (scaled input matrix, raw skip block) for a batch.

        x_input: (B, T+1, 4) state-plus-noisy-trajectory blocks
        t:       scalar or (B,) timesteps
        ctx:     (B, context_dim)
        """
        arch = self.arch
        x_input = np.asarray(x_input, dtype=np.float64)
        ctx = np.asarray(ctx, dtype=np.float64)
        if x_input.ndim != 3 or x_input.shape[1:] != (arch.horizon + 1, 4):
            raise ShapeError(
                f"x_input must be (B, {arch.horizon + 1}, 4), got {x_input.shape}")
        batch = x_input.shape[0]
        if ctx.shape != (batch, arch.context_dim):
            raise ShapeError(f"ctx must be ({batch}, {arch.context_dim}), got {ctx.shape}")
        t_arr = np.broadcast_to(np.atleast_1d(np.asarray(t, dtype=np.float64)), (batch,))
        flat = x_input.reshape(batch, -1)
        emb = time_embedding(t_arr, arch.time_embed_dim)
        features = np.concatenate([flat, emb, ctx], axis=1) * self._scale
        skip = x_input[:, 1:, :].reshape(batch, -1)
        return features, skip

    def forward(self, x_input: np.ndarray, t, ctx: np.ndarray,
                with_cache: bool = False):
        """Batched forward pass; returns (B, T, 4) with unit heading channels."""
        features, skip = self.assemble(x_input, t, ctx)
        batch = features.shape[0]
        h = features
        hidden = [h]
        for i in range(self.arch.hidden_layers):
            z = h @ self.params[f"w{i}"] + self.params[f"b{i}"]
            h = np.tanh(z)
            if not np.all(np.isfinite(h)):
                raise NumericError(f"non-finite activation after hidden layer {i}")
            hidden.append(h)
        raw = h @ self.params["w_out"] + self.params["b_out"] + skip
        if not np.all(np.isfinite(raw)):
            raise NumericError("non-finite activation in output layer")
        out = raw.reshape(batch, self.arch.horizon, 4).copy()
        heads = out[:, :, 2:4]
        norms = np.maximum(np.linalg.norm(heads, axis=2, keepdims=True), _HEAD_NORM_FLOOR)
        out[:, :, 2:4] = heads / norms
        self.n_forward_calls += batch
        if with_cache:
            cache = {"hidden": hidden, "raw": raw, "norms": norms, "out": out}
            return out, cache
        return out

    def backward(self, cache, grad_out: np.ndarray) -> dict[str, np.ndarray]:
        """Parameter gradients given dLoss/dOutput for the cached forward."""
        batch = grad_out.shape[0]
        raw = cache["raw"].reshape(batch, self.arch.horizon, 4)
        norms = cache["norms"]
        unit = cache["out"][:, :, 2:4]
        d_raw = np.empty_like(raw)
        d_raw[:, :, :2] = grad_out[:, :, :2]
        g_head = grad_out[:, :, 2:4]
        inner = np.sum(unit * g_head, axis=2, keepdims=True)
        d_raw[:, :, 2:4] = (g_head - unit * inner) / norms
        d_flat = d_raw.reshape(batch, -1)

        grads: dict[str, np.ndarray] = {}
        hidden = cache["hidden"]
        grads["w_out"] = hidden[-1].T @ d_flat
        grads["b_out"] = d_flat.sum(axis=0)
        dh = d_flat @ self.params["w_out"].T
        for i in range(self.arch.hidden_layers - 1, -1, -1):
            dz = dh * (1.0 - hidden[i + 1] ** 2)
            grads[f"w{i}"] = hidden[i].T @ dz
            grads[f"b{i}"] = dz.sum(axis=0)
            if i > 0:
                dh = dz @ self.params[f"w{i}"].T
        return grads


def denoise(model: DenoiserModel, x_input: np.ndarray, t: float,
            ctx: np.ndarray) -> PoseTrajectory:
    """Single-sample denoising pass returning a pose trajectory.

    x_input is the (T+1, 4) concatenation of the current-state frame and the
    noisy trajectory; the output drops nothing — the network emits exactly T
    frames with heading channels renormalized to unit length.
    """
    if not (0.0 < t <= 1.0):
        raise ValueError(f"denoise requires t in (0, 1], got {t}")
    x_input = np.asarray(x_input, dtype=np.float64)
    ctx = np.asarray(ctx, dtype=np.float64)
    out = model.forward(x_input[None], t, ctx[None])
    return PoseTrajectory(out[0], model.arch.dt)
