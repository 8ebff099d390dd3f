"""Binary checkpoint format.

Layout (all little-endian): magic "NGPU", format version u32, the seven
model-config fields as u32 (layers, width, channels, kernel_w, kernel_h,
vocab_size, relax_sets), then every parameter array as float32 in a fixed
order: embedding, output, then per relaxed set, per layer: U, U', U'', B,
B', B''.  Save/load/save round-trips byte-identically.
"""

import struct

import numpy as np

from neural_gpu.model import ModelConfig, from_arrays

MAGIC = b"NGPU"
VERSION = 1


class CheckpointError(ValueError):
    """Missing, foreign, or truncated checkpoint data."""


def _param_shapes(config):
    m, i = config.channels, config.vocab_size
    kshape = (config.kernel_w, config.kernel_h, m, m)
    shapes = [(i, m), (m, i)]
    for _ in range(config.relax_sets * config.layers):
        shapes += [kshape, kshape, kshape, (m,), (m,), (m,)]
    return shapes


def save(path, config, params):
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    blob += struct.pack("<7I", config.layers, config.width, config.channels,
                        config.kernel_w, config.kernel_h, config.vocab_size,
                        config.relax_sets)
    for arr in params.arrays():
        blob += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(blob)


def load(path):
    """Read (config, params); params arrays are float32."""
    with open(path, "rb") as fh:
        blob = fh.read()

    def take(count, what):
        offset = take.offset
        if offset + count > len(blob):
            raise CheckpointError(
                f"{path}: truncated reading {what}: need {count} bytes at "
                f"offset {offset}, file has {len(blob)}")
        take.offset += count
        return blob[offset : offset + count]

    take.offset = 0
    magic = take(4, "magic")
    if magic != MAGIC:
        raise CheckpointError(
            f"{path}: bad magic at byte 0: {magic!r} (expected {MAGIC!r})")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != VERSION:
        raise CheckpointError(
            f"{path}: unsupported format version {version} at byte 4")
    fields = struct.unpack("<7I", take(28, "model config"))
    config = ModelConfig(*[int(f) for f in fields])
    arrays = []
    for shape in _param_shapes(config):
        count = int(np.prod(shape))
        raw = take(4 * count, f"parameter array {shape}")
        arrays.append(np.frombuffer(raw, dtype="<f4").reshape(shape).copy())
    if take.offset != len(blob):
        raise CheckpointError(
            f"{path}: {len(blob) - take.offset} trailing bytes at offset "
            f"{take.offset}")
    return config, from_arrays(arrays, config.relax_sets, config.layers)
