"""Pure numpy versions of the compiled patch kernels."""
import numpy as np


def im2col3x3(x):
    """Zero-padded 3x3 patches, rows ordered (b, h, w), columns (dy, dx, c)."""
    B, H, W, C = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    cols = np.empty((B, H, W, 3, 3, C), dtype=x.dtype)
    for dy in range(3):
        for dx in range(3):
            cols[:, :, :, dy, dx, :] = xp[:, dy:dy + H, dx:dx + W, :]
    return cols.reshape(B * H * W, 9 * C)


def col2im3x3(cols, B, H, W, C):
    """Adjoint of :func:`im2col3x3`: scatter-add patch columns back to images."""
    if cols.shape != (B * H * W, 9 * C):
        raise ValueError("cols shape does not match (B*H*W, 9*C)")
    c = cols.reshape(B, H, W, 3, 3, C)
    xp = np.zeros((B, H + 2, W + 2, C), dtype=cols.dtype)
    for dy in range(3):
        for dx in range(3):
            xp[:, dy:dy + H, dx:dx + W, :] += c[:, :, :, dy, dx, :]
    return xp[:, 1:-1, 1:-1, :]
