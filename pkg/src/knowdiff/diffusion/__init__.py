"""Diffusion trajectory generator: schedule, denoiser, training, inference."""

from .schedule import NoiseSchedule, forward_noise
from .network import Architecture, DenoiserModel, denoise, time_embedding
from .training import TrainConfig, train, training_loss, loss_and_grads
from .inference import truncated_infer, full_sample, two_step_injection
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "NoiseSchedule", "forward_noise",
    "Architecture", "DenoiserModel", "denoise", "time_embedding",
    "TrainConfig", "train", "training_loss", "loss_and_grads",
    "truncated_infer", "full_sample", "two_step_injection",
    "save_checkpoint", "load_checkpoint",
]
