"""Versioned binary checkpoints.

Layout (all integers unsigned little-endian, reals float64 little-endian)::

    magic      8 bytes  b"LAPEPINT"
    version    u32
    P, alpha_s, alpha_a, n_features, n_shrink, n_mapping   u32 each
    n_kernel   u32, then n_kernel u32 level kernel sizes
    n_arrays   u32
    per array, in layer declaration order:
        name_len u16, name (utf-8, "layer/key")
        ndim u8, dims u32 * ndim
        data float64 * prod(dims)
    crc32      u32 over everything before it

A ``.txt`` sidecar lists every array's shape and the parameter count.
"""

import struct
import zlib
from pathlib import Path

import numpy as np

from ._io import atomic_open
from .errors import CheckpointError
from .net.model import NetworkParams
from .pyramid import PyramidConfig

MAGIC = b"LAPEPINT"
VERSION = 1


def _encode(params):
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    cfg = params.pyramid
    out += struct.pack("<6I", cfg.P, cfg.alpha_s, params.alpha_a, params.n_features, params.n_shrink,
                       params.n_mapping)
    out += struct.pack("<I", len(cfg.level_kernel_sizes))
    out += struct.pack(f"<{len(cfg.level_kernel_sizes)}I", *cfg.level_kernel_sizes)
    arrays = list(params.arrays())
    out += struct.pack("<I", len(arrays))
    for layer, key, arr in arrays:
        name = f"{layer}/{key}".encode()
        out += struct.pack("<H", len(name)) + name
        out += struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    out += struct.pack("<I", zlib.crc32(out))
    return bytes(out)


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CheckpointError("truncated checkpoint")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _decode(buf):
    if len(buf) < len(MAGIC) + 8:
        raise CheckpointError("truncated checkpoint")
    if buf[:len(MAGIC)] != MAGIC:
        raise CheckpointError("not a LapEPI-net checkpoint (bad magic)")
    body, (crc,) = buf[:-4], struct.unpack("<I", buf[-4:])
    r = _Reader(body)
    r.take(len(MAGIC))
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    if zlib.crc32(body) != crc:
        raise CheckpointError("checkpoint is corrupt or truncated (checksum mismatch)")
    P, alpha_s, alpha_a, nf, ns, nm = r.unpack("<6I")
    (nk,) = r.unpack("<I")
    kernels = r.unpack(f"<{nk}I")
    pyramid = PyramidConfig(P, alpha_s, tuple(kernels))
    (n_arrays,) = r.unpack("<I")
    layers = {}
    for _ in range(n_arrays):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode()
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        count = int(np.prod(shape))
        arr = np.frombuffer(r.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
        layer, key = name.split("/")
        layers.setdefault(layer, {})[key] = arr
    if r.pos != len(body):
        raise CheckpointError("trailing bytes in checkpoint")
    params = NetworkParams(layers, pyramid, alpha_a, nf, ns, nm)
    try:
        params.validate()
    except (ValueError, KeyError) as exc:
        raise CheckpointError(f"checkpoint does not match the layer table: {exc}") from None
    return params


def sidecar_text(params):
    lines = [f"LapEPI-net checkpoint v{VERSION}",
             f"P={params.P} alpha_s={params.alpha_s} alpha_a={params.alpha_a} "
             f"level_kernels={list(params.pyramid.level_kernel_sizes)}"]
    for layer, key, arr in params.arrays():
        lines.append(f"{layer}/{key} {'x'.join(map(str, arr.shape))}")
    lines.append(f"total_params={params.n_params()}")
    return "\n".join(lines) + "\n"


def save_checkpoint(params, path):
    path = Path(path)
    params.validate()
    with atomic_open(path, "wb") as fh:
        fh.write(_encode(params))
    with atomic_open(path.with_name(path.name + ".txt"), "w") as fh:
        fh.write(sidecar_text(params))
    return path


def load_checkpoint(path, alpha_a=None):
    """Read a checkpoint; ``alpha_a`` overrides the stored angular stride."""
    try:
        buf = Path(path).read_bytes()
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    params = _decode(buf)
    if alpha_a is not None:
        params.alpha_a = int(alpha_a)
    return params
