"""
Bounds-checked little-endian reader shared by the dataset and checkpoint formats.
"""

import struct
from typing import Type

from .errors import FactualError


class ByteReader:
    """Sequential struct reader that raises error_class("truncated file") past the end."""

    def __init__(self, blob: bytes, error_class: Type[FactualError]):
        self.blob = blob
        self.offset = 0
        self.error_class = error_class

    @property
    def remaining(self) -> int:
        return len(self.blob) - self.offset

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if size > self.remaining:
            raise self.error_class("truncated file")
        values = struct.unpack_from(fmt, self.blob, self.offset)
        self.offset += size
        return values

    def raw(self, size: int) -> bytes:
        if size > self.remaining:
            raise self.error_class("truncated file")
        chunk = self.blob[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def finish(self, what: str):
        if self.remaining:
            raise self.error_class(f"trailing bytes after {what}")
