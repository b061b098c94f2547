"""Residual denoising CNN for correlation-amplitude images, plus baselines."""
import numpy as np

from .io import (decode_dataset, decode_weights, encode_dataset, encode_weights,
                 load_dataset, load_weights, save_dataset, save_weights)
from .network import (DnCNNWeights, backward, batchnorm_forward, forward, init_weights,
                      loss, residual, zero_weights)
from .training import Adam, TrainConfig, input_scale, train, validation_loss


def baseline_denoiser(kind, image, lam=0.0):
    """``identity`` returns ``image``; ``soft_threshold`` returns ``max(image - lam, 0)``."""
    image = np.asarray(image)
    if kind == "identity":
        return image.copy()
    if kind == "soft_threshold":
        return np.maximum(image - lam, 0.0)
    raise ValueError(f"unknown baseline denoiser {kind!r}")


class Identity:
    def __call__(self, images):
        return baseline_denoiser("identity", images)


class SoftThreshold:
    def __init__(self, lam):
        self.lam = lam

    def __call__(self, images):
        return baseline_denoiser("soft_threshold", images, self.lam)


__all__ = [
    "Adam", "DnCNNWeights", "Identity", "SoftThreshold", "TrainConfig", "backward",
    "baseline_denoiser", "batchnorm_forward", "decode_dataset", "decode_weights",
    "encode_dataset", "encode_weights", "forward", "init_weights", "input_scale",
    "load_dataset", "load_weights", "loss", "residual", "save_dataset", "save_weights",
    "train", "validation_loss", "zero_weights",
]
