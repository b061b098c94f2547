"""Adam training loop with validation-based early stopping."""
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError
from .network import backward, init_weights, loss


@dataclass
class TrainConfig:
    lr: float = 0.01
    epochs: int = 10
    batch_size: int = 256
    val_fraction: float = 0.3
    patience: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    percentile: float = 99.0


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            step = self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            params[k] -= step.astype(params[k].dtype)


def input_scale(inputs, percentile=99.0):
    """Normalization divisor: a high percentile of the input amplitudes."""
    s = float(np.percentile(np.asarray(inputs, dtype=np.float64), percentile))
    return s if s > 0 and np.isfinite(s) else 1.0


def split_indices(n, val_fraction, rng):
    """Shuffled train/validation index split (validation gets the remainder)."""
    perm = rng.permutation(n)
    n_train = int(round(n * (1 - val_fraction)))
    n_train = min(max(n_train, 1), n)
    return perm[:n_train], perm[n_train:]


def validation_loss(weights, inputs, labels, batch_size=256):
    """Inference-mode loss over a whole set, accumulated in batches."""
    n = len(inputs)
    if n == 0:
        return float("nan")
    total = 0.0
    for start in range(0, n, batch_size):
        s = slice(start, start + batch_size)
        total += loss(weights, inputs[s], labels[s], mode="inference") * len(inputs[s])
    return total / n


def train(inputs, labels, rng, config=None, weights=None, dtype=np.float32, progress=None):
    """Fit the denoiser to ``(input, label)`` image pairs.

    The epoch-0 evaluation of the initial weights counts as the first
    validation point, so the returned (best-validation) weights never have a
    higher validation loss than the starting point. Training stops once
    ``patience`` consecutive epochs fail to improve the validation loss.
    """
    cfg = config or TrainConfig()
    inputs = np.asarray(inputs)
    labels = np.asarray(labels)
    if inputs.ndim != 3 or len(inputs) == 0:
        raise DimensionError("training needs a nonempty (N, H, W) dataset")
    if inputs.shape != labels.shape:
        raise DimensionError("inputs and labels differ in shape")
    tr, va = split_indices(len(inputs), cfg.val_fraction, rng)
    if weights is None:
        weights = init_weights(rng, dtype=dtype, scale=input_scale(inputs, cfg.percentile),
                               image_shape=list(inputs.shape[1:]))
    else:
        weights = weights.copy()
    x_tr, g_tr = inputs[tr], labels[tr]
    x_va, g_va = inputs[va], labels[va]
    has_val = len(va) > 0

    opt = Adam(weights.params, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
    mom = weights.meta["momentum"]
    log = []

    def evaluate():
        if has_val:
            return validation_loss(weights, x_va, g_va, cfg.batch_size)
        return validation_loss(weights, x_tr, g_tr, cfg.batch_size)

    best = evaluate()
    best_weights = weights.copy()
    log.append({"epoch": 0, "train_loss": float("nan"), "val_loss": best})
    wait = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(tr))
        running, seen = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            value, grads, (mean, var) = backward(weights, x_tr[idx], g_tr[idx])
            opt.step(weights.params, grads)
            count = len(idx) * np.prod(inputs.shape[1:])
            unbiased = var * (count / max(count - 1, 1))
            bufs = weights.buffers
            bufs["bn_mean"] = ((1 - mom) * bufs["bn_mean"] + mom * mean).astype(bufs["bn_mean"].dtype)
            bufs["bn_var"] = ((1 - mom) * bufs["bn_var"] + mom * unbiased).astype(bufs["bn_var"].dtype)
            running += value * len(idx)
            seen += len(idx)
        val = evaluate()
        log.append({"epoch": epoch, "train_loss": running / seen, "val_loss": val})
        if progress is not None:
            progress(log[-1])
        if val < best:
            best, best_weights, wait = val, weights.copy(), 0
        else:
            wait += 1
            if wait >= cfg.patience:
                break
    best_weights.meta["log"] = log
    best_weights.meta["best_val_loss"] = best
    return best_weights
