"""Variance-preserving SDE noise schedule with a linear beta(t).

With B(t) = beta_min*t + (beta_max - beta_min)*t^2/2 (the integral of beta),
the closed-form forward marginal is

    x_t = exp(-B(t)/2) * x0 + sigma(t) * eps,   sigma(t) = sqrt(1 - exp(-B(t)))

so alpha_bar(t) = exp(-B(t)) and samples at any timestep need no sequential
simulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ShapeError


@dataclass(frozen=True)
class NoiseSchedule:
    beta_min: float = 0.1
    beta_max: float = 20.0
    eps_t: float = 1e-3

    def __post_init__(self):
        if not (0.0 < self.beta_min < self.beta_max):
            raise ValueError(
                f"need 0 < beta_min < beta_max, got {self.beta_min}, {self.beta_max}")
        if not (0.0 < self.eps_t < 1.0):
            raise ValueError(f"eps_t must lie in (0, 1), got {self.eps_t}")

    def integrated_beta(self, t):
        """B(t) = integral of beta from 0 to t."""
        t = np.asarray(t, dtype=np.float64)
        return self.beta_min * t + 0.5 * (self.beta_max - self.beta_min) * t * t

    def alpha_bar(self, t):
        return np.exp(-self.integrated_beta(t))

    def mean_coeff(self, t):
        """Coefficient of x0 in the forward marginal: exp(-B(t)/2)."""
        return np.exp(-0.5 * self.integrated_beta(t))

    def sigma(self, t):
        """Marginal standard deviation at timestep t in (0, 1]."""
        arr = np.asarray(t, dtype=np.float64)
        if np.any(arr <= 0.0) or np.any(arr > 1.0):
            raise ValueError(f"sigma requires t in (0, 1], got {t}")
        value = np.sqrt(1.0 - np.exp(-self.integrated_beta(arr)))
        return float(value) if arr.ndim == 0 else value


def forward_noise(sched: NoiseSchedule, x0, t: float, noise) -> np.ndarray:
    """Exact forward marginal sample: exp(-B(t)/2)*x0 + sigma(t)*noise."""
    x0 = np.asarray(getattr(x0, "frames", x0), dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if x0.shape != noise.shape:
        raise ShapeError(f"x0 shape {x0.shape} != noise shape {noise.shape}")
    if not (sched.eps_t <= t <= 1.0):
        raise ValueError(f"forward_noise requires t in [{sched.eps_t}, 1], got {t}")
    return sched.mean_coeff(t) * x0 + sched.sigma(t) * noise
