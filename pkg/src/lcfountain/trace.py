"""Binary batch-trace files.

Layout, all integers little-endian::

    magic    4s   b"LCFT"
    version  u16
    L        u8
    q        u8
    m        u8
    T        u32
    N        u32
    K_s      u32 x L
    then N batch records:
      B           u8            columns of H (0 = nothing decoded)
      H           u8 x (L * B)  row-major
      per user:   degree u32, neighbor ids u32 x degree
      payload     B * T symbols (u8, or u16 when q^m > 256)
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .channel import Trace, matrix_key
from .errors import ConfigurationError, ParseError
from .field import FieldSpec

MAGIC = b"LCFT"
VERSION = 1
_HEAD = struct.Struct("<4sHBBBII")


class TraceVersionError(ParseError):
    pass


def dumps(trace: Trace) -> bytes:
    field = trace.field
    if trace.L > 255 or any(H.shape[1] > 255 for H in trace.matrices):
        raise ConfigurationError("trace format holds at most 255 users")
    sym = np.dtype(field.dtype).newbyteorder("<")
    parts = [_HEAD.pack(MAGIC, VERSION, trace.L, field.q, field.m, trace.T, trace.N),
             np.asarray(trace.K, dtype="<u4").tobytes()]
    mats = [np.ascontiguousarray(H, dtype=np.uint8) for H in trace.matrices]
    for i in range(trace.N):
        t = trace.types[i]
        if t < 0:
            parts.append(b"\x00")
        else:
            parts.append(bytes([mats[t].shape[1]]))
            parts.append(mats[t].tobytes())
        for s in range(trace.L):
            nb = trace.neighbors(s, i)
            parts.append(struct.pack("<I", len(nb)))
            parts.append(np.asarray(nb, dtype="<u4").tobytes())
        if trace.T:
            parts.append(trace.outputs[trace.out_ptr[i]:trace.out_ptr[i + 1]].astype(sym).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise ParseError(f"truncated trace while reading {what}", self.pos)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def array(self, dtype, count, what):
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count, what), dtype=dt)


def loads(data: bytes) -> Trace:
    """Parse a trace; any malformation raises ParseError with the byte offset."""
    r = _Reader(data)
    magic, version, L, q, m, T, N = _HEAD.unpack(r.take(_HEAD.size, "header"))
    if magic != MAGIC:
        raise ParseError(f"not a trace file (magic {bytes(magic)!r})", 0)
    if version != VERSION:
        raise TraceVersionError(f"trace version {version} unsupported (this build reads {VERSION})", 4)
    try:
        field = FieldSpec(q, m)
    except ConfigurationError as exc:
        raise ParseError(f"bad field in header: {exc}", 7) from None
    if L < 1:
        raise ParseError("trace with zero users", 6)
    K = [int(k) for k in r.array("<u4", L, "K")]
    sym = np.dtype(field.dtype).newbyteorder("<")

    keys, mats, types = {}, [], np.empty(N, dtype=np.int64)
    nbrs = [[] for _ in range(L)]
    degs = [np.empty(N, dtype=np.int64) for _ in range(L)]
    outs = []
    for i in range(N):
        at = r.pos
        B = r.take(1, f"batch {i} width")[0]
        if B > L:
            raise ParseError(f"batch {i} has {B} columns for {L} users", at)
        if B == 0:
            types[i] = -1
        else:
            H = r.array(np.uint8, L * B, f"batch {i} matrix").reshape(L, B).astype(np.int64)
            if H.max() >= q:
                raise ParseError(f"batch {i} matrix entry outside GF({q})", at + 1)
            key = matrix_key(H)
            if key not in keys:
                keys[key] = len(mats)
                mats.append(H)
            types[i] = keys[key]
        for s in range(L):
            at = r.pos
            (d,) = struct.unpack("<I", r.take(4, f"batch {i} degree"))
            nb = r.array("<u4", d, f"batch {i} neighbors")
            if d == 0 or int(nb.max()) >= K[s] or len(np.unique(nb)) != d:
                raise ParseError(f"batch {i} user {s}: invalid neighbor list", at)
            degs[s][i] = d
            nbrs[s].append(nb)
        if T and B:
            outs.append(r.array(sym, B * T, f"batch {i} payload").reshape(B, T).astype(field.dtype))
    if r.pos != len(r.data):
        raise ParseError(f"{len(r.data) - r.pos} trailing bytes after the last batch", r.pos)

    ptr = [np.concatenate([[0], np.cumsum(d)]).astype(np.int64) for d in degs]
    idx = [np.concatenate(nb).astype(np.int64) if nb else np.zeros(0, np.int64) for nb in nbrs]
    trace = Trace(field, L, T, K, mats, types, ptr, idx)
    if T and outs:
        trace.outputs = np.vstack(outs)
    return trace


def write_trace(path, trace: Trace):
    Path(path).write_bytes(dumps(trace))


def read_trace(path) -> Trace:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read trace {path}: {exc}") from None
    return loads(data)
