"""Estimator facade over the diffusion generator so it composes with
sklearn-style tooling (get_params / set_params, fitted attributes)."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ..trajectory import Trajectory
from .inference import truncated_infer
from .network import Architecture, DenoiserModel
from .schedule import NoiseSchedule
from .training import TrainConfig, TrainingSet, train


class DiffusionTrajectoryGenerator(BaseEstimator):
    """fit(TrainingSet) trains the denoiser; predict maps (prior, state,
    context) triples to generated trajectories via truncated inference."""

    def __init__(self, hidden_width=256, hidden_layers=3, horizon=16, dt=0.5,
                 beta_min=0.1, beta_max=20.0, eps_t=1e-3,
                 steps=2000, batch_size=64, learning_rate=1e-3, seed=0,
                 t1=0.05, t2=0.10):
        self.hidden_width = hidden_width
        self.hidden_layers = hidden_layers
        self.horizon = horizon
        self.dt = dt
        self.beta_min = beta_min
        self.beta_max = beta_max
        self.eps_t = eps_t
        self.steps = steps
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed
        self.t1 = t1
        self.t2 = t2

    def fit(self, X: TrainingSet, y=None):
        arch = Architecture(horizon=self.horizon, dt=self.dt,
                            hidden_width=self.hidden_width,
                            hidden_layers=self.hidden_layers)
        self.schedule_ = NoiseSchedule(self.beta_min, self.beta_max, self.eps_t)
        rng = np.random.default_rng(self.seed)
        self.model_ = DenoiserModel.initialize(arch, rng, zero_final=True)
        cfg = TrainConfig(steps=self.steps, batch_size=self.batch_size,
                          learning_rate=self.learning_rate, seed=self.seed)
        self.loss_curve_ = train(self.model_, self.schedule_, X, cfg)
        return self

    def predict(self, X, seed: int = 0) -> list[Trajectory]:
        if not hasattr(self, "model_"):
            raise NotFittedError("DiffusionTrajectoryGenerator is not fitted yet")
        rng = np.random.default_rng(seed)
        return [
            truncated_infer(self.model_, self.schedule_, prior, state, ctx,
                            self.t1, self.t2, rng)
            for prior, state, ctx in X
        ]
