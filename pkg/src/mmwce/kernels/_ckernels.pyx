# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled 3x3 patch extraction / accumulation for NHWC image batches."""
import numpy as np

ctypedef fused real_t:
    float
    double


def im2col3x3(real_t[:, :, :, ::1] x):
    """Zero-padded 3x3 patches, rows ordered (b, h, w), columns (dy, dx, c)."""
    cdef Py_ssize_t B = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3]
    dtype = np.float32 if real_t is float else np.float64
    out = np.zeros((B * H * W, 9 * C), dtype=dtype)
    cdef real_t[:, ::1] o = out
    cdef Py_ssize_t b, h, w, dy, dx, c, hh, ww, row, base
    with nogil:
        for b in range(B):
            for h in range(H):
                for w in range(W):
                    row = (b * H + h) * W + w
                    for dy in range(3):
                        hh = h + dy - 1
                        if hh < 0 or hh >= H:
                            continue
                        for dx in range(3):
                            ww = w + dx - 1
                            if ww < 0 or ww >= W:
                                continue
                            base = (dy * 3 + dx) * C
                            for c in range(C):
                                o[row, base + c] = x[b, hh, ww, c]
    return out


def col2im3x3(real_t[:, ::1] cols, Py_ssize_t B, Py_ssize_t H, Py_ssize_t W, Py_ssize_t C):
    """Adjoint of :func:`im2col3x3`: scatter-add patch columns back to images."""
    if cols.shape[0] != B * H * W or cols.shape[1] != 9 * C:
        raise ValueError("cols shape does not match (B*H*W, 9*C)")
    dtype = np.float32 if real_t is float else np.float64
    out = np.zeros((B, H, W, C), dtype=dtype)
    cdef real_t[:, :, :, ::1] o = out
    cdef Py_ssize_t b, h, w, dy, dx, c, hh, ww, row, base
    with nogil:
        for b in range(B):
            for h in range(H):
                for w in range(W):
                    row = (b * H + h) * W + w
                    for dy in range(3):
                        hh = h + dy - 1
                        if hh < 0 or hh >= H:
                            continue
                        for dx in range(3):
                            ww = w + dx - 1
                            if ww < 0 or ww >= W:
                                continue
                            base = (dy * 3 + dx) * C
                            for c in range(C):
                                o[b, hh, ww, c] += cols[row, base + c]
    return out
