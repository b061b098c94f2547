"""Binary weight and dataset files.

Weight file (little endian)::

    b"DNCW" | u16 version | u16 tensor count
    per tensor: u8 name length | name | u8 ndim | u32 dims[ndim] | u32 element count
    u32 metadata length | UTF-8 JSON metadata
    float32 payload, tensors in table order
    u32 CRC-32 of everything above

Dataset file::

    b"DNCD" | u16 version | u32 G_r | u32 G_t | u32 K_p | u32 pair count
    float32 payload: pair-interleaved (input image, label image), each G_r x G_t row-major
    u32 CRC-32 of everything above
"""
import json
import struct
import zlib

import numpy as np

from ..errors import FormatError, ShapeError
from .network import BUFFER_SHAPES, PARAM_SHAPES, DnCNNWeights

WEIGHT_MAGIC = b"DNCW"
DATASET_MAGIC = b"DNCD"
VERSION = 1

_ORDER = list(PARAM_SHAPES) + list(BUFFER_SHAPES)


def _with_crc(body):
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def _check_crc(blob, what):
    if len(blob) < 4:
        raise FormatError(f"{what}: file too short")
    body, crc = blob[:-4], struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise FormatError(f"{what}: checksum mismatch (truncated or corrupted file)")
    return body


class _Reader:
    def __init__(self, data, what):
        self.data, self.pos, self.what = data, 0, what

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise FormatError(f"{self.what}: unexpected end of header")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def raw(self, n):
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.what}: unexpected end of header")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out


def encode_weights(weights):
    tensors = {**weights.params, **weights.buffers}
    head = [WEIGHT_MAGIC, struct.pack("<HH", VERSION, len(_ORDER))]
    payload = []
    for name in _ORDER:
        arr = np.asarray(tensors[name])
        enc = name.encode()
        head.append(struct.pack("<B", len(enc)) + enc)
        head.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        head.append(struct.pack("<I", arr.size))
        payload.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    meta = json.dumps(weights.meta, sort_keys=True, default=float).encode()
    head.append(struct.pack("<I", len(meta)) + meta)
    return _with_crc(b"".join(head + payload))


def decode_weights(blob):
    what = "weight file"
    if blob[:4] != WEIGHT_MAGIC:
        raise FormatError(f"{what}: bad magic {blob[:4]!r}")
    body = _check_crc(blob, what)
    rd = _Reader(body, what)
    rd.raw(4)
    version, count = rd.take("<HH")
    if version != VERSION:
        raise FormatError(f"{what}: unsupported version {version}")
    table = []
    for _ in range(count):
        (nlen,) = rd.take("<B")
        name = rd.raw(nlen).decode()
        (ndim,) = rd.take("<B")
        dims = rd.take(f"<{ndim}I")
        (n,) = rd.take("<I")
        if int(np.prod(dims)) != n:
            raise ShapeError(f"{what}: tensor {name} declares shape {dims} but {n} elements")
        table.append((name, tuple(dims), n))
    (mlen,) = rd.take("<I")
    try:
        meta = json.loads(rd.raw(mlen).decode())
    except ValueError as exc:
        raise FormatError(f"{what}: bad metadata ({exc})") from None
    need = 4 * sum(n for _, _, n in table)
    if len(body) - rd.pos != need:
        raise ShapeError(f"{what}: payload has {len(body) - rd.pos} bytes, table declares {need}")
    tensors = {}
    for name, dims, n in table:
        tensors[name] = np.frombuffer(rd.raw(4 * n), dtype="<f4").astype(np.float32).reshape(dims)
    params, buffers = {}, {}
    for name, shape in PARAM_SHAPES.items():
        if name not in tensors:
            raise FormatError(f"{what}: missing tensor {name}")
        if tensors[name].shape != shape:
            raise ShapeError(f"{what}: {name} has shape {tensors[name].shape}, expected {shape}")
        params[name] = tensors[name]
    for name, shape in BUFFER_SHAPES.items():
        if name not in tensors or tensors[name].shape != shape:
            raise ShapeError(f"{what}: bad or missing buffer {name}")
        buffers[name] = tensors[name]
    if np.any(buffers["bn_var"] <= 0):
        raise FormatError(f"{what}: nonpositive running variance")
    return DnCNNWeights(params, buffers, meta)


def save_weights(weights, path):
    with open(path, "wb") as fh:
        fh.write(encode_weights(weights))


def load_weights(path):
    with open(path, "rb") as fh:
        return decode_weights(fh.read())


def encode_dataset(inputs, labels, k_p):
    inputs = np.asarray(inputs)
    labels = np.asarray(labels)
    if inputs.shape != labels.shape or inputs.ndim != 3:
        raise ShapeError("inputs and labels must both be (N, G_r, G_t)")
    n, g_r, g_t = inputs.shape
    head = DATASET_MAGIC + struct.pack("<HIIII", VERSION, g_r, g_t, k_p, n)
    pairs = np.stack([inputs, labels], axis=1).astype("<f4")
    return _with_crc(head + pairs.tobytes())


def decode_dataset(blob):
    """Returns ``(inputs, labels, k_p)``."""
    what = "dataset file"
    if blob[:4] != DATASET_MAGIC:
        raise FormatError(f"{what}: bad magic {blob[:4]!r}")
    body = _check_crc(blob, what)
    rd = _Reader(body, what)
    rd.raw(4)
    version, g_r, g_t, k_p, n = rd.take("<HIIII")
    if version != VERSION:
        raise FormatError(f"{what}: unsupported version {version}")
    need = 4 * 2 * n * g_r * g_t
    if len(body) - rd.pos != need:
        raise ShapeError(f"{what}: payload has {len(body) - rd.pos} bytes, header declares {need}")
    pairs = np.frombuffer(body, dtype="<f4", offset=rd.pos).astype(np.float32)
    pairs = pairs.reshape(n, 2, g_r, g_t)
    return pairs[:, 0], pairs[:, 1], k_p


def save_dataset(path, inputs, labels, k_p):
    with open(path, "wb") as fh:
        fh.write(encode_dataset(inputs, labels, k_p))


def load_dataset(path):
    with open(path, "rb") as fh:
        return decode_dataset(fh.read())
