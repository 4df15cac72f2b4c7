"""
Binary dataset files.

Layout (little-endian): magic "FCTD", version u32, count u32, height u16,
width u16, class_count u16, flags u16, then the image records.

Flags: bit0 masks present, bit1 triple file, bit2 test split.

Image record: label u16, H*W f32 pixels, ceil(H*W/8) packed mask bits when
bit0 is set. A triple file holds three blocks of `count` records (clean,
z_obj, z_img), each opened by its view tag u8.
"""

import os
import struct
from pathlib import Path
from typing import List, Union

import numpy as np

from ..binary import ByteReader
from ..config import logger
from ..errors import DatasetFormatError
from .images import VIEW_TAGS, Dataset, LabeledImage, TripleSet

MAGIC = b"FCTD"
VERSION = 1
HEADER = "<4sIIHHHH"
MAX_RECORDS = 10_000_000

FLAG_MASKS = 1
FLAG_TRIPLES = 2
FLAG_TEST = 4

BLOCK_ORDER = ("clean", "z_obj", "z_img")

Stored = Union[Dataset, TripleSet]


def _blocks(data: Stored) -> List[Dataset]:
    if isinstance(data, TripleSet):
        return [data.clean, data.z_obj, data.z_img]
    return [data]


def dataset_bytes(data: Stored) -> bytes:
    """Serialize a Dataset or TripleSet."""
    blocks = _blocks(data)
    first = blocks[0]
    count = len(first)
    if count > MAX_RECORDS:
        raise DatasetFormatError("count overflow", {"count": count})
    if count == 0:
        raise DatasetFormatError("cannot store an empty dataset")
    first.validate()
    height, width = first.image_shape
    flags = FLAG_MASKS
    if isinstance(data, TripleSet):
        flags |= FLAG_TRIPLES
    if first.split == "test":
        flags |= FLAG_TEST

    chunks = [struct.pack(HEADER, MAGIC, VERSION, count, height, width, first.class_count, flags)]
    for name, block in zip(BLOCK_ORDER, blocks):
        if isinstance(data, TripleSet):
            chunks.append(struct.pack("<B", VIEW_TAGS[name]))
        for image in block.images:
            if image.shape != (height, width):
                raise DatasetFormatError(f"image shape {image.shape} differs from {(height, width)}")
            chunks.append(struct.pack("<H", image.label))
            chunks.append(np.ascontiguousarray(image.pixels, dtype="<f4").tobytes())
            chunks.append(np.packbits(image.mask.ravel()).tobytes())
    return b"".join(chunks)


def save_dataset(data: Stored, path: Union[str, Path]) -> Path:
    """Write a dataset or triple set atomically (temp file + rename)."""
    path = Path(path)
    payload = dataset_bytes(data)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)
    logger.info(f"Saved {len(_blocks(data)[0])} records to {path}")
    return path


def _read_block(reader: ByteReader, count: int, height: int, width: int, classes: int, masks: bool) -> List[LabeledImage]:
    pixels_size = 4 * height * width
    mask_size = (height * width + 7) // 8
    images = []
    for _ in range(count):
        (label,) = reader.take("<H")
        if label >= classes:
            raise DatasetFormatError("label out of range", {"label": label, "class_count": classes})
        pixels = np.frombuffer(reader.raw(pixels_size), dtype="<f4").astype(np.float32).reshape(height, width)
        if not np.isfinite(pixels).all() or pixels.min() < 0 or pixels.max() > 1:
            raise DatasetFormatError("pixel values must be finite and within [0, 1]")
        if masks:
            bits = np.frombuffer(reader.raw(mask_size), dtype=np.uint8)
            mask = np.unpackbits(bits)[:height * width].astype(bool).reshape(height, width)
        else:
            mask = np.ones((height, width), dtype=bool)
        images.append(LabeledImage(pixels, label, mask))
    return images


def load_dataset(path: Union[str, Path]) -> Stored:
    """
    Read a file written by save_dataset.

    Returns:
        Dataset, or TripleSet when the triple flag is set

    Raises:
        DatasetFormatError: bad magic, unsupported version, truncated file,
            count overflow, label out of range or trailing bytes
    """
    path = Path(path)
    reader = ByteReader(path.read_bytes(), DatasetFormatError)
    magic, version, count, height, width, classes, flags = reader.take(HEADER)
    if magic != MAGIC:
        raise DatasetFormatError("bad magic")
    if version != VERSION:
        raise DatasetFormatError(f"unsupported version {version}")
    if count > MAX_RECORDS:
        raise DatasetFormatError("count overflow", {"count": count})
    if classes < 1 or height < 1 or width < 1:
        raise DatasetFormatError(f"invalid header: {height}x{width} images, {classes} classes")

    masks = bool(flags & FLAG_MASKS)
    split = "test" if flags & FLAG_TEST else "train"
    if flags & FLAG_TRIPLES:
        columns = {}
        for expected in BLOCK_ORDER:
            (tag,) = reader.take("<B")
            if tag != VIEW_TAGS[expected]:
                raise DatasetFormatError(f"expected view tag {VIEW_TAGS[expected]} ({expected}), found {tag}")
            columns[expected] = Dataset(_read_block(reader, count, height, width, classes, masks), classes, split)
        result: Stored = TripleSet(**columns)
    else:
        result = Dataset(_read_block(reader, count, height, width, classes, masks), classes, split)
    reader.finish("last record")

    logger.info(f"Loaded {count} records from {path}")
    return result
