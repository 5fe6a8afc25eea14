"""Container format for coded streams.

Layout (little endian)::

    magic     4 bytes  b"ZDRD"
    version   u8
    p         u16      source dimension
    seed      u64      shared seed (dither is derived from it)
    D         f64      design distortion
    model     8 bytes  model fingerprint
    n         u64      number of steps
    n chunks: LEB128 varint bit count, then ceil(bits / 8) bytes of payload,
              most significant bit first, zero padded at the end
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

from .exceptions import BitstreamCorrupt

MAGIC = b"ZDRD"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBHQd8sQ")


@dataclass(frozen=True)
class StreamHeader:
    p: int
    seed: int
    D: float
    fingerprint: bytes
    n: int
    version: int = FORMAT_VERSION


def _write_varint(buf, value):
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            buf.write(bytes([byte | 0x80]))
        else:
            buf.write(bytes([byte]))
            return


def _read_varint(buf):
    shift = value = 0
    while True:
        b = buf.read(1)
        if not b:
            raise BitstreamCorrupt("truncated chunk length")
        value |= (b[0] & 0x7F) << shift
        if not b[0] & 0x80:
            return value
        shift += 7
        if shift > 63:
            raise BitstreamCorrupt("chunk length varint too long")


def pack_chunk(value, nbits):
    nbytes = (nbits + 7) // 8
    return (value << (8 * nbytes - nbits)).to_bytes(nbytes, "big") if nbytes else b""


def unpack_chunk(data, nbits):
    nbytes = len(data)
    return int.from_bytes(data, "big") >> (8 * nbytes - nbits) if nbytes else 0


def dumps(header: StreamHeader, payloads, nbits) -> bytes:
    buf = io.BytesIO()
    buf.write(_HEADER.pack(MAGIC, header.version, header.p, header.seed & (2**64 - 1),
                           header.D, header.fingerprint, header.n))
    for value, nb in zip(payloads, nbits):
        nb = int(nb)
        _write_varint(buf, nb)
        buf.write(pack_chunk(value, nb))
    return buf.getvalue()


def loads(data: bytes):
    """Parse a container; returns ``(header, payloads, nbits)``."""
    buf = io.BytesIO(data)
    raw = buf.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise BitstreamCorrupt("truncated header")
    magic, version, p, seed, D, fp, n = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise BitstreamCorrupt("bad magic")
    if version != FORMAT_VERSION:
        raise BitstreamCorrupt(f"unsupported format version {version}")
    payloads, nbits = [], []
    for _ in range(n):
        nb = _read_varint(buf)
        nbytes = (nb + 7) // 8
        chunk = buf.read(nbytes)
        if len(chunk) != nbytes:
            raise BitstreamCorrupt("truncated chunk")
        payloads.append(unpack_chunk(chunk, nb))
        nbits.append(nb)
    if buf.read(1):
        raise BitstreamCorrupt("trailing bytes after the last chunk")
    return StreamHeader(p=p, seed=seed, D=D, fingerprint=fp, n=n, version=version), payloads, nbits
