"""Append-only record files.

One shared on-disk format backs actor snapshots, the warm/cold context store
and the graph mutation log: a flat sequence of frames

    [u32 length][u32 checksum][payload bytes]

little-endian, where the checksum is CRC-32 of the payload. Records are never
rewritten; readers either scan forward from the start or fetch one frame at a
known byte offset. Latest-record-wins semantics are left to the caller.
"""

from __future__ import annotations

import io
import struct
import zlib
from typing import Iterator

from .errors import CorruptSnapshot, PersistenceFailure

_HEADER = struct.Struct("<II")


class RecordLog:
    """An append-only store of checksummed byte records.

    Backed by a file when ``path`` is given, otherwise by an in-memory
    buffer (handy for tests and throwaway worlds; the framing is identical).
    """

    def __init__(self, path: str | None = None):
        self.path = path
        if path is None:
            self._f: io.BufferedRandom | io.BytesIO = io.BytesIO()
        else:
            # Truncate: every run owns its store file from scratch.
            self._f = open(path, "w+b")
        self._end = 0

    @classmethod
    def open_existing(cls, path: str) -> "RecordLog":
        """Reopen a store file for reads and further appends."""
        log = cls.__new__(cls)
        log.path = path
        log._f = open(path, "r+b")
        log._f.seek(0, io.SEEK_END)
        log._end = log._f.tell()
        return log

    def append(self, payload: bytes) -> int:
        """Append one record, returning its byte offset."""
        offset = self._end
        frame = _HEADER.pack(len(payload), zlib.crc32(payload)) + payload
        try:
            self._f.seek(offset)
            self._f.write(frame)
            self._f.flush()
        except OSError as exc:  # pragma: no cover - exercised via injection
            raise PersistenceFailure(str(exc)) from exc
        self._end = offset + len(frame)
        return offset

    def read_at(self, offset: int) -> bytes:
        """Read and verify the record starting at ``offset``."""
        self._f.seek(offset)
        header = self._f.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise CorruptSnapshot(f"truncated header at offset {offset}")
        length, checksum = _HEADER.unpack(header)
        payload = self._f.read(length)
        if len(payload) < length:
            raise CorruptSnapshot(f"truncated payload at offset {offset}")
        if zlib.crc32(payload) != checksum:
            raise CorruptSnapshot(f"checksum mismatch at offset {offset}")
        return payload

    def replay(self) -> Iterator[tuple[int, bytes]]:
        """Yield (offset, payload) for every record, verifying checksums."""
        offset = 0
        while offset < self._end:
            payload = self.read_at(offset)
            yield offset, payload
            offset += _HEADER.size + len(payload)

    def __len__(self) -> int:
        return self._end

    def close(self) -> None:
        self._f.close()
