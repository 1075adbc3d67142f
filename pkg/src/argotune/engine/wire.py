"""Little-endian framing for gradient exchange over a byte stream.

Frame layout::

    u8   version (= 1)
    u32  worker id
    u32  tensor count
    per tensor:
        u64  element count
        f64  payload[element count]
"""
from __future__ import annotations

import socket
import struct
from typing import Sequence

import numpy as np

VERSION = 1
_HEAD = struct.Struct("<BII")
_LEN = struct.Struct("<Q")


class WireError(RuntimeError):
    pass


def encode(worker_id: int, tensors: Sequence[np.ndarray]) -> bytes:
    parts = [_HEAD.pack(VERSION, worker_id, len(tensors))]
    for t in tensors:
        flat = np.ascontiguousarray(t, dtype="<f8").ravel()
        parts.append(_LEN.pack(flat.size))
        parts.append(flat.tobytes())
    return b"".join(parts)


def decode(data: bytes) -> tuple[int, list[np.ndarray]]:
    view = memoryview(data)
    worker_id, tensors, offset = _decode_from(view)
    if offset != len(data):
        raise WireError(f"{len(data) - offset} trailing bytes after frame")
    return worker_id, tensors


def _decode_from(view: memoryview):
    if len(view) < _HEAD.size:
        raise WireError("truncated frame header")
    version, worker_id, count = _HEAD.unpack_from(view, 0)
    if version != VERSION:
        raise WireError(f"unsupported frame version {version}")
    offset = _HEAD.size
    tensors = []
    for _ in range(count):
        if len(view) < offset + _LEN.size:
            raise WireError("truncated tensor length")
        (n,) = _LEN.unpack_from(view, offset)
        offset += _LEN.size
        end = offset + 8 * n
        if len(view) < end:
            raise WireError("truncated tensor payload")
        tensors.append(np.frombuffer(view[offset:end], dtype="<f8").astype(np.float64))
        offset = end
    return worker_id, tensors, offset


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise WireError("peer closed the channel")
        buf.extend(chunk)
    return bytes(buf)


def send_frame(sock: socket.socket, worker_id: int, tensors: Sequence[np.ndarray]) -> None:
    sock.sendall(encode(worker_id, tensors))


def recv_frame(sock: socket.socket) -> tuple[int, list[np.ndarray]]:
    head = _recv_exact(sock, _HEAD.size)
    version, worker_id, count = _HEAD.unpack(head)
    if version != VERSION:
        raise WireError(f"unsupported frame version {version}")
    tensors = []
    for _ in range(count):
        (n,) = _LEN.unpack(_recv_exact(sock, _LEN.size))
        tensors.append(np.frombuffer(_recv_exact(sock, 8 * n), dtype="<f8").astype(np.float64))
    return worker_id, tensors
