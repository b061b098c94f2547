"""Three-layer residual denoising CNN: forward pass, loss and exact gradients.

Images are handled as ``(B, H, W)`` batches; internally activations are NHWC.
Every convolution is 3x3, stride 1, zero padded ("same" size) and lowered
to a matrix product through :mod:`mmwce.kernels`. Work is split into image
chunks so that the patch matrices stay small; batch-norm statistics are
still taken over the whole batch.
"""
import copy
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..errors import DimensionError

FEATURES = 64
PARAM_SHAPES = {
    "conv1_w": (3, 3, 1, FEATURES),
    "conv1_b": (FEATURES,),
    "conv2_w": (3, 3, FEATURES, FEATURES),
    "conv2_b": (FEATURES,),
    "bn_gamma": (FEATURES,),
    "bn_beta": (FEATURES,),
    "conv3_w": (3, 3, FEATURES, 1),
    "conv3_b": (1,),
}
BUFFER_SHAPES = {"bn_mean": (FEATURES,), "bn_var": (FEATURES,)}

# rows of the largest patch matrix built at once
_CHUNK_ROWS = 32768


@dataclass
class DnCNNWeights:
    """Learnable parameters, batch-norm running statistics and metadata.

    ``meta`` holds ``scale`` (input normalization divisor), ``bn_eps``,
    ``momentum``, ``image_shape`` (or None) and the training ``log``.
    """

    params: dict
    buffers: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, shape in PARAM_SHAPES.items():
            if name not in self.params:
                raise DimensionError(f"missing parameter {name}")
            if tuple(self.params[name].shape) != shape:
                raise DimensionError(f"{name} has shape {self.params[name].shape}, expected {shape}")
        for name, shape in BUFFER_SHAPES.items():
            if tuple(self.buffers[name].shape) != shape:
                raise DimensionError(f"{name} has shape {self.buffers[name].shape}, expected {shape}")
        if np.any(self.buffers["bn_var"] <= 0):
            raise DimensionError("running variances must be positive")
        self.meta.setdefault("scale", 1.0)
        self.meta.setdefault("bn_eps", 1e-5)
        self.meta.setdefault("momentum", 0.1)
        self.meta.setdefault("image_shape", None)
        self.meta.setdefault("log", [])

    @property
    def dtype(self):
        return self.params["conv1_w"].dtype

    def copy(self):
        return DnCNNWeights({k: v.copy() for k, v in self.params.items()},
                            {k: v.copy() for k, v in self.buffers.items()},
                            copy.deepcopy(self.meta))

    def astype(self, dtype):
        out = self.copy()
        out.params = {k: v.astype(dtype) for k, v in out.params.items()}
        out.buffers = {k: v.astype(dtype) for k, v in out.buffers.items()}
        return out

    def __call__(self, images):
        return forward(self, images)


def _buffers(dtype):
    return {"bn_mean": np.zeros(FEATURES, dtype), "bn_var": np.ones(FEATURES, dtype)}


def init_weights(rng, dtype=np.float32, scale=1.0, image_shape=None):
    """He-normal kernels (variance ``2/fan_in``), zero biases, unit BN scale."""
    params = {}
    for name, shape in PARAM_SHAPES.items():
        if name.endswith("_w"):
            fan_in = shape[0] * shape[1] * shape[2]
            params[name] = (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)
        elif name == "bn_gamma":
            params[name] = np.ones(shape, dtype)
        else:
            params[name] = np.zeros(shape, dtype)
    meta = {"scale": float(scale), "image_shape": image_shape}
    return DnCNNWeights(params, _buffers(dtype), meta)


def zero_weights(dtype=np.float32, scale=1.0, image_shape=None):
    """All-zero network, i.e. the identity denoiser."""
    params = {name: np.zeros(shape, dtype) for name, shape in PARAM_SHAPES.items()}
    meta = {"scale": float(scale), "image_shape": image_shape}
    return DnCNNWeights(params, _buffers(dtype), meta)


def _check_images(weights, images):
    x = np.asarray(images)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise DimensionError(f"expected (B, H, W) images, got shape {np.shape(images)}")
    expected = weights.meta.get("image_shape")
    if expected is not None and tuple(x.shape[1:]) != tuple(expected):
        raise DimensionError(f"image shape {x.shape[1:]} does not match trained shape {tuple(expected)}")
    return x


def _chunks(n_images, pixels):
    step = max(1, _CHUNK_ROWS // max(pixels, 1))
    for start in range(0, n_images, step):
        yield slice(start, min(start + step, n_images))


def conv3x3(x, w, b):
    """Same-size 3x3 convolution of NHWC ``x`` with ``w`` of shape (3, 3, Cin, Cout)."""
    B, H, W, C = x.shape
    cols = kernels.im2col3x3(np.ascontiguousarray(x))
    out = cols @ w.reshape(9 * C, -1) + b
    return out.reshape(B, H, W, -1)


def _bn_normalize(z, mean, var, eps):
    return (z - mean) / np.sqrt(var + eps)


def batchnorm_forward(z, gamma, beta, eps=1e-5):
    """Train-mode batch norm over all but the channel axis. Returns ``(out, mean, var)``."""
    axes = tuple(range(z.ndim - 1))
    mean = z.mean(axis=axes)
    var = ((z - mean) ** 2).mean(axis=axes)
    return gamma * _bn_normalize(z, mean, var, eps) + beta, mean, var


def _trunk(p, x4):
    """Layers 1-2 up to (but excluding) batch norm. Returns ``(z1, z2)``."""
    z1 = conv3x3(x4, p["conv1_w"], p["conv1_b"])
    z2 = conv3x3(np.maximum(z1, 0), p["conv2_w"], p["conv2_b"])
    return z1, z2


def residual(weights, images, mode="inference"):
    """Predicted residual on the normalized scale, ``(B, H, W)``.

    In ``train`` mode batch norm uses the statistics of ``images``; in
    ``inference`` mode it uses the running statistics.
    """
    p = weights.params
    x = _check_images(weights, images).astype(weights.dtype) / weights.dtype.type(weights.meta["scale"])
    B, H, W = x.shape
    eps = weights.meta["bn_eps"]
    if mode == "train":
        z2 = np.empty((B, H, W, FEATURES), weights.dtype)
        for s in _chunks(B, H * W):
            z2[s] = _trunk(p, x[s, :, :, None])[1]
        bn, _, _ = batchnorm_forward(z2, p["bn_gamma"], p["bn_beta"], eps)
        return conv3x3(np.maximum(bn, 0), p["conv3_w"], p["conv3_b"])[..., 0]
    if mode != "inference":
        raise ValueError(f"unknown mode {mode!r}")
    mean, var = weights.buffers["bn_mean"], weights.buffers["bn_var"]
    out = np.empty((B, H, W), weights.dtype)
    for s in _chunks(B, H * W):
        z2 = _trunk(p, x[s, :, :, None])[1]
        a2 = np.maximum(p["bn_gamma"] * _bn_normalize(z2, mean, var, eps) + p["bn_beta"], 0)
        out[s] = conv3x3(a2, p["conv3_w"], p["conv3_b"])[..., 0]
    return out


def forward(weights, images, mode="inference"):
    """Denoised images ``input - residual(input)`` on the caller's scale."""
    x = _check_images(weights, images)
    r = residual(weights, x, mode)
    out = x - r.astype(np.result_type(x.dtype, r.dtype)) * weights.meta["scale"]
    return out if np.ndim(images) == 3 else out[0]


def loss(weights, inputs, labels, mode="train"):
    """Mean half squared error between predicted and true residual (normalized scale)."""
    x = _check_images(weights, inputs)
    g = _check_images(weights, labels)
    if x.shape != g.shape:
        raise DimensionError("inputs and labels differ in shape")
    if x.shape[0] == 0:
        raise DimensionError("empty batch")
    s = weights.meta["scale"]
    target = (x - g) / s
    r = residual(weights, x, mode)
    return float(np.sum((r.astype(np.float64) - target) ** 2) / (2 * x.shape[0]))


def backward(weights, inputs, labels):
    """Train-mode loss and its gradient with respect to every parameter.

    Returns ``(loss, grads, (batch_mean, batch_var))``; the batch statistics
    are what the trainer folds into the running averages.
    """
    p = weights.params
    dt = weights.dtype
    x = _check_images(weights, inputs)
    g = _check_images(weights, labels)
    if x.shape != g.shape:
        raise DimensionError("inputs and labels differ in shape")
    n = x.shape[0]
    if n == 0:
        raise DimensionError("empty batch")
    scale = dt.type(weights.meta["scale"])
    xn = x.astype(dt) / scale
    target = xn - g.astype(dt) / scale
    B, H, W = xn.shape
    eps = weights.meta["bn_eps"]
    grads = {k: np.zeros_like(v) for k, v in p.items()}

    z1 = np.empty((B, H, W, FEATURES), dt)
    z2 = np.empty((B, H, W, FEATURES), dt)
    for s in _chunks(B, H * W):
        z1[s], z2[s] = _trunk(p, xn[s, :, :, None])
    mean = z2.mean(axis=(0, 1, 2))
    var = ((z2 - mean) ** 2).mean(axis=(0, 1, 2))
    inv_std = 1.0 / np.sqrt(var + eps)

    total = 0.0
    dbn = np.empty_like(z2)
    sum_d = np.zeros(FEATURES, np.float64)
    sum_dx = np.zeros(FEATURES, np.float64)
    w3 = p["conv3_w"].reshape(9 * FEATURES, 1)
    for s in _chunks(B, H * W):
        xhat = (z2[s] - mean) * inv_std
        bn = p["bn_gamma"] * xhat + p["bn_beta"]
        a2 = np.maximum(bn, 0)
        b = a2.shape[0]
        cols = kernels.im2col3x3(a2)
        r = (cols @ w3)[:, 0] + p["conv3_b"][0]
        err = r - target[s].reshape(-1)
        total += float(np.dot(err.astype(np.float64), err))
        dr = (err / n)[:, None]
        grads["conv3_w"] += (cols.T @ dr).reshape(p["conv3_w"].shape)
        grads["conv3_b"] += dr.sum()
        da2 = kernels.col2im3x3(np.ascontiguousarray(dr @ w3.T), b, H, W, FEATURES)
        d = da2 * (bn > 0)
        dbn[s] = d
        sum_d += d.sum(axis=(0, 1, 2))
        sum_dx += (d * xhat).sum(axis=(0, 1, 2))
    grads["bn_gamma"] += sum_dx.astype(dt)
    grads["bn_beta"] += sum_d.astype(dt)
    count = B * H * W
    mean_d = (sum_d / count).astype(dt)
    mean_dx = (sum_dx / count).astype(dt)

    w2 = p["conv2_w"].reshape(9 * FEATURES, FEATURES)
    w1 = p["conv1_w"].reshape(9, FEATURES)
    for s in _chunks(B, H * W):
        xhat = (z2[s] - mean) * inv_std
        dz2 = (p["bn_gamma"] * inv_std) * (dbn[s] - mean_d - xhat * mean_dx)
        b = dz2.shape[0]
        dz2 = dz2.reshape(-1, FEATURES)
        cols = kernels.im2col3x3(np.ascontiguousarray(np.maximum(z1[s], 0)))
        grads["conv2_w"] += (cols.T @ dz2).reshape(p["conv2_w"].shape)
        grads["conv2_b"] += dz2.sum(axis=0)
        da1 = kernels.col2im3x3(np.ascontiguousarray(dz2 @ w2.T), b, H, W, FEATURES)
        dz1 = (da1 * (z1[s] > 0)).reshape(-1, FEATURES)
        cols = kernels.im2col3x3(np.ascontiguousarray(xn[s, :, :, None]))
        grads["conv1_w"] += (cols.T @ dz1).reshape(p["conv1_w"].shape)
        grads["conv1_b"] += dz1.sum(axis=0)
    return total / (2 * n), grads, (mean, var)
