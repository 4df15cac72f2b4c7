"""
Binary checkpoint files.

Layout (little-endian): magic "FCTC", version u32, architecture block, then
every parameter in declaration order as rank u8, dims u32 x rank, f64 data.

Architecture block: image_size u16, stage count u8, channel widths u16 x stages,
representation_dim u16, projector_hidden u16, projector_dim u16,
class_count u16, flags u8 (bit0: residual).
"""

import os
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Union

import numpy as np

from ..binary import ByteReader
from ..config import logger
from ..errors import CheckpointFormatError
from .params import ArchitectureConfig, ModelParams

MAGIC = b"FCTC"
VERSION = 1


def _encode_arch(arch: ArchitectureConfig) -> bytes:
    parts = [struct.pack("<HB", arch.image_size, len(arch.channels))]
    parts.append(struct.pack(f"<{len(arch.channels)}H", *arch.channels))
    parts.append(struct.pack(
        "<HHHHB",
        arch.representation_dim,
        arch.projector_hidden,
        arch.projector_dim,
        arch.class_count,
        1 if arch.residual else 0,
    ))
    return b"".join(parts)


def checkpoint_bytes(params: ModelParams) -> bytes:
    chunks = [MAGIC, struct.pack("<I", VERSION), _encode_arch(params.arch)]
    for _, array in params.items():
        chunks.append(struct.pack("<B", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(np.ascontiguousarray(array, dtype="<f8").tobytes())
    return b"".join(chunks)


def save_checkpoint(params: ModelParams, path: Union[str, Path]) -> Path:
    """Write params atomically (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(checkpoint_bytes(params))
    os.replace(tmp, path)
    logger.info(f"Saved checkpoint to {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> ModelParams:
    """
    Read a checkpoint written by save_checkpoint.

    Raises:
        CheckpointFormatError: bad magic, unsupported version, truncated file,
            trailing bytes, or tensors that do not match the stored architecture
    """
    path = Path(path)
    reader = ByteReader(path.read_bytes(), CheckpointFormatError)
    if reader.raw(4) != MAGIC:
        raise CheckpointFormatError("bad magic")
    (version,) = reader.take("<I")
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported version {version}")

    image_size, stages = reader.take("<HB")
    channels = reader.take(f"<{stages}H")
    rep_dim, hidden, proj_dim, classes, flags = reader.take("<HHHHB")
    try:
        arch = ArchitectureConfig(
            image_size=image_size,
            channels=tuple(channels),
            representation_dim=rep_dim,
            projector_hidden=hidden,
            projector_dim=proj_dim,
            class_count=classes,
            residual=bool(flags & 1),
        )
    except ValueError as e:
        raise CheckpointFormatError(f"invalid architecture block: {e}")

    arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for name, shape in arch.parameter_shapes().items():
        (rank,) = reader.take("<B")
        dims = reader.take(f"<{rank}I")
        if tuple(dims) != shape:
            raise CheckpointFormatError(f"{name}: stored shape {tuple(dims)} does not match architecture {shape}")
        count = int(np.prod(dims))
        arrays[name] = np.frombuffer(reader.raw(8 * count), dtype="<f8").astype(np.float64).reshape(dims)
    reader.finish("last tensor")

    logger.info(f"Loaded checkpoint from {path}")
    return ModelParams(arch, arrays)
