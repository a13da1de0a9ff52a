"""Trajectory generation: truncated two-step inference and the reference
full ancestral sampler.

The production path perturbs the prior with two additive Gaussian injections
at noise levels sigma(t1) < sigma(t2) and performs a single denoising pass
conditioned on t2 — no mean shrinkage is applied to the anchor, which keeps
the prior recognizable while still exercising the denoiser. The full sampler
exists only as an evaluation baseline for the truncation comparison.
"""

from __future__ import annotations

import numpy as np

from ..trajectory import EgoState, Trajectory, extend_heading
from .network import DenoiserModel, denoise
from .schedule import NoiseSchedule


def _state_vector(s) -> np.ndarray:
    if isinstance(s, EgoState):
        return s.frame_vector()
    return np.asarray(s, dtype=np.float64)


def two_step_injection(sched: NoiseSchedule, base: np.ndarray, t1: float, t2: float,
                       rng: np.random.Generator) -> np.ndarray:
    """Additive two-step noising: base + sigma(t1)*eps1 + sigma(t2)*eps2.

    The result minus the base is zero-mean with variance
    sigma^2(t1) + sigma^2(t2) per element.
    """
    eps1 = rng.standard_normal(base.shape)
    eps2 = rng.standard_normal(base.shape)
    x_t1 = base + sched.sigma(t1) * eps1
    return x_t1 + sched.sigma(t2) * eps2


def truncated_infer(model: DenoiserModel, sched: NoiseSchedule, prior: Trajectory,
                    s, ctx, t1: float, t2: float, rng: np.random.Generator,
                    exact_marginal: bool = False, two_pass: bool = False) -> Trajectory:
    """Generate a trajectory by lightly noising the prior and denoising once.

    exact_marginal replaces the additive injections with a single exact
    forward-marginal draw at t2 (mean-shrunk anchor); two_pass re-noises the
    first estimate at t1 and denoises a second time. Both are ablation paths;
    the default is the single-call additive scheme.
    """
    if not (0.0 < t1 < t2 <= 1.0):
        raise ValueError(f"need 0 < t1 < t2 <= 1, got t1={t1}, t2={t2}")
    base = extend_heading(prior).frames
    if exact_marginal:
        noisy = sched.mean_coeff(t2) * base + sched.sigma(t2) * rng.standard_normal(base.shape)
    else:
        noisy = two_step_injection(sched, base, t1, t2, rng)
    state = _state_vector(s)
    x_full = np.concatenate([state[None, :], noisy], axis=0)
    estimate = denoise(model, x_full, t2, np.asarray(ctx, dtype=np.float64))
    if two_pass:
        renoised = estimate.frames + sched.sigma(t1) * rng.standard_normal(base.shape)
        x_full = np.concatenate([state[None, :], renoised], axis=0)
        estimate = denoise(model, x_full, t1, np.asarray(ctx, dtype=np.float64))
    return Trajectory(estimate.frames[:, :2], prior.dt)


def full_sample(model: DenoiserModel, sched: NoiseSchedule, s, ctx,
                rng: np.random.Generator, n_steps: int = 50) -> Trajectory:
    """Reference ancestral sampler from pure noise (evaluation baseline only).

    Walks a uniform time grid from 1 down to eps_t; each step predicts the
    clean trajectory and samples the discrete posterior for the next level.
    Costs exactly `n_steps` denoiser evaluations.
    """
    if n_steps < 2:
        raise ValueError(f"n_steps must be >= 2, got {n_steps}")
    arch = model.arch
    state = _state_vector(s)
    ctx = np.asarray(ctx, dtype=np.float64)
    grid = np.linspace(1.0, sched.eps_t, n_steps + 1)
    x = rng.standard_normal((arch.horizon, 4))
    estimate = None
    for i in range(n_steps):
        t_cur, t_next = float(grid[i]), float(grid[i + 1])
        x_full = np.concatenate([state[None, :], x], axis=0)
        estimate = denoise(model, x_full, t_cur, ctx)
        if i == n_steps - 1:
            break
        a_cur = float(sched.alpha_bar(t_cur))
        a_next = float(sched.alpha_bar(t_next))
        alpha_step = a_cur / a_next
        beta_step = 1.0 - alpha_step
        mean = (np.sqrt(a_next) * beta_step / (1.0 - a_cur)) * estimate.frames \
            + (np.sqrt(alpha_step) * (1.0 - a_next) / (1.0 - a_cur)) * x
        var = beta_step * (1.0 - a_next) / (1.0 - a_cur)
        x = mean + np.sqrt(max(var, 0.0)) * rng.standard_normal(x.shape)
    return Trajectory(estimate.frames[:, :2], arch.dt)
