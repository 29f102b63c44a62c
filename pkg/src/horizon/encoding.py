"""Canonical byte layout shared by every wire type.

Integers are unsigned big-endian with a fixed width.  Variable-length byte
strings, text and lists carry a 4-byte big-endian length prefix.  Optional
values are a presence byte (0x00 absent, 0x01 present) followed by the value.
Decoding is strict: unknown flag values, short reads and trailing bytes all
raise :class:`DecodeError`, so every byte of an encoding is significant.
"""

from __future__ import annotations

import struct

DIGEST_SIZE = 32


class DecodeError(ValueError):
    """Raised when bytes are not a canonical encoding."""


class Writer:
    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def u8(self, value: int) -> "Writer":
        self._parts.append(value.to_bytes(1, "big"))
        return self

    def u32(self, value: int) -> "Writer":
        self._parts.append(value.to_bytes(4, "big"))
        return self

    def u64(self, value: int) -> "Writer":
        self._parts.append(value.to_bytes(8, "big"))
        return self

    def flag(self, value: bool) -> "Writer":
        return self.u8(1 if value else 0)

    def raw(self, data: bytes) -> "Writer":
        self._parts.append(bytes(data))
        return self

    def digest(self, data: bytes) -> "Writer":
        if len(data) != DIGEST_SIZE:
            raise ValueError(f"digest must be {DIGEST_SIZE} bytes, got {len(data)}")
        return self.raw(data)

    def blob(self, data: bytes) -> "Writer":
        self.u32(len(data))
        return self.raw(data)

    def text(self, value: str) -> "Writer":
        return self.blob(value.encode("utf-8"))

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    def __init__(self, data: bytes) -> None:
        self._data = bytes(data)
        self._pos = 0

    def _take(self, n: int) -> bytes:
        if n < 0 or self._pos + n > len(self._data):
            raise DecodeError(f"short read: wanted {n} bytes at offset {self._pos}")
        chunk = self._data[self._pos : self._pos + n]
        self._pos += n
        return chunk

    def u8(self) -> int:
        return self._take(1)[0]

    def u32(self) -> int:
        return struct.unpack(">I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self._take(8))[0]

    def flag(self) -> bool:
        b = self.u8()
        if b not in (0, 1):
            raise DecodeError(f"invalid flag byte {b:#04x}")
        return b == 1

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def digest(self) -> bytes:
        return self._take(DIGEST_SIZE)

    def blob(self) -> bytes:
        return self._take(self.u32())

    def text(self) -> str:
        try:
            return self.blob().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(str(exc)) from None

    def count(self, item_size: int = 1) -> int:
        """Read a list length and sanity-check it against the bytes left."""
        n = self.u32()
        if n * item_size > len(self._data) - self._pos:
            raise DecodeError(f"list of {n} items overruns input")
        return n

    def done(self) -> None:
        if self._pos != len(self._data):
            raise DecodeError(f"{len(self._data) - self._pos} trailing bytes")
