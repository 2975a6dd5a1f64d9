"""Wire format, in-process channel, and communication accounting.

Every cross-party value travels as a length-prefixed, schema-tagged binary
message (little-endian, float64 payloads). The channel serializes, meters
bytes into CommStats, appends one audit record per transmission, and hands
the receiver a decoded copy. The message-kind enum is the closed schema the
privacy audit is defined over.
"""

from __future__ import annotations

import struct
from enum import Enum

import numpy as np

from .sharing import AuditLog


class MessageKind(str, Enum):
    NODE_INDEX = "NodeIndex"            # holder -> server: hashed node list (init)
    LOCAL_EMBEDDING = "LocalEmbedding"  # holder -> server: per-layer local rows
    GLOBAL_EMBEDDING = "GlobalEmbedding"  # server -> holder: pooled+updated rows
    PRED_GRAD = "PredGrad"              # holder -> server: loss grad wrt final rows
    LOCAL_EMB_GRAD = "LocalEmbGrad"     # server -> holder: grad wrt local rows
    INPUT_GRAD = "InputGrad"            # holder -> server: grad wrt layer input
    GRAD_SHARE = "GradShare"            # holder -> holder: additive share vector
    PARTIAL_SUM = "PartialSum"          # holder -> holder: summed shares
    POOL_INPUT = "PoolInput"            # holder -> sealed pool (secure mode)
    POOL_RESULT = "PoolResult"          # sealed pool -> server (secure mode)


KIND_IDS = {kind: i for i, kind in enumerate(MessageKind)}
IDS_KIND = {i: kind for kind, i in KIND_IDS.items()}

_DTYPE_CODES = {"<f8": b"f", "<u8": b"u", "<i8": b"i", "|u1": b"b", "|i1": b"c"}
_CODES_DTYPE = {v: k for k, v in _DTYPE_CODES.items()}


def _norm_dtype(arr: np.ndarray) -> np.ndarray:
    kind = arr.dtype.kind
    if kind == "f":
        return np.ascontiguousarray(arr, dtype="<f8")
    if kind == "u" and arr.dtype.itemsize == 8:
        return np.ascontiguousarray(arr, dtype="<u8")
    if kind == "u":
        return np.ascontiguousarray(arr, dtype="|u1")
    if kind == "i" and arr.dtype.itemsize == 1:
        return np.ascontiguousarray(arr, dtype="|i1")
    return np.ascontiguousarray(arr, dtype="<i8")


def encode_message(kind: MessageKind, layer: int, epoch: int, sender_id: int,
                   fields: dict[str, np.ndarray]) -> bytes:
    """Serialize one message; the leading u32 is the body length."""
    parts = [struct.pack("<2sBhiB", b"SG", KIND_IDS[kind], layer, epoch, len(fields))]
    for name, arr in fields.items():
        if isinstance(arr, (bytes, bytearray)):
            arr = np.frombuffer(bytes(arr), dtype=np.uint8)
        arr = _norm_dtype(np.asarray(arr))
        code = _DTYPE_CODES[arr.dtype.str]
        raw = arr.tobytes()
        name_b = name.encode("utf-8")
        parts.append(struct.pack("<B", len(name_b)) + name_b)
        parts.append(struct.pack("<cB", code, arr.ndim))
        parts.append(b"".join(struct.pack("<i", s) for s in arr.shape))
        parts.append(struct.pack("<q", len(raw)))
        parts.append(raw)
    parts.append(struct.pack("<h", sender_id))
    body = b"".join(parts)
    return struct.pack("<I", len(body)) + body


def decode_message(buf: bytes):
    """Inverse of encode_message: (kind, layer, epoch, sender_id, fields)."""
    (length,) = struct.unpack_from("<I", buf, 0)
    body = buf[4:4 + length]
    magic, kind_id, layer, epoch, n_fields = struct.unpack_from("<2sBhiB", body, 0)
    if magic != b"SG":
        raise ValueError("bad message magic")
    off = struct.calcsize("<2sBhiB")
    fields = {}
    for _ in range(n_fields):
        (name_len,) = struct.unpack_from("<B", body, off)
        off += 1
        name = body[off:off + name_len].decode("utf-8")
        off += name_len
        code, ndim = struct.unpack_from("<cB", body, off)
        off += struct.calcsize("<cB")
        shape = struct.unpack_from(f"<{ndim}i", body, off) if ndim else ()
        off += 4 * ndim
        (raw_len,) = struct.unpack_from("<q", body, off)
        off += 8
        arr = np.frombuffer(body[off:off + raw_len], dtype=_CODES_DTYPE[code]).reshape(shape)
        off += raw_len
        fields[name] = arr.copy()
    (sender_id,) = struct.unpack_from("<h", body, off)
    return IDS_KIND[kind_id], layer, epoch, sender_id, fields


class CommStats:
    """Monotone byte counters keyed by (kind, direction, layer, epoch)."""

    def __init__(self):
        self.counts: dict[tuple, int] = {}

    def add(self, kind: MessageKind, direction: str, layer: int, epoch: int, n_bytes: int):
        key = (kind.value, direction, layer, epoch)
        self.counts[key] = self.counts.get(key, 0) + n_bytes

    def total(self) -> int:
        return sum(self.counts.values())

    def bytes_for(self, kinds=None, epoch=None) -> int:
        wanted = None if kinds is None else {k.value if isinstance(k, MessageKind) else k
                                             for k in kinds}
        out = 0
        for (kind, _direction, _layer, ep), n in self.counts.items():
            if wanted is not None and kind not in wanted:
                continue
            if epoch is not None and ep != epoch:
                continue
            out += n
        return out

    def rows(self):
        """(epoch, kind, direction, bytes) rows, deterministically ordered."""
        agg: dict[tuple, int] = {}
        for (kind, direction, _layer, epoch), n in self.counts.items():
            key = (epoch, kind, direction)
            agg[key] = agg.get(key, 0) + n
        return [(*key, agg[key]) for key in sorted(agg)]


class Channel:
    """In-process transport: serialize, meter, audit, deliver.

    The decoded copy returned to the caller is what the receiver sees; the
    original arrays never cross the party boundary. Tests may call send()
    directly with an arbitrary kind to inject rogue traffic for the audit.
    """

    def __init__(self, comm: CommStats, audit: AuditLog):
        self.comm = comm
        self.audit = audit

    def send(self, sender: str, receiver: str, kind: MessageKind, layer: int,
             epoch: int, fields: dict[str, np.ndarray], sender_id: int = -1) -> dict:
        buf = encode_message(kind, layer, epoch, sender_id, fields)
        self.comm.add(kind, f"{sender}->{receiver}", layer, epoch, len(buf))
        self.audit.append(sender, receiver, kind.value,
                          schema=",".join(fields.keys()))
        _kind, _layer, _epoch, _sid, decoded = decode_message(buf)
        return decoded
