"""Typed messages, their binary framing, and the in-process transport.

Every message is framed to bytes when sent and parsed again by the
recipient, so roles only ever learn what is on the wire.  The trace keeps
(sender, recipient, type, byte length, logical time) and nothing else.
"""
from __future__ import annotations

import json
import struct
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

MSG_MAGIC = b"HEMS"
MSG_VERSION = 1

SP = "SP"
KC = "KC"
GAME = "game"

# Types that carry a plaintext rating and therefore may never reach the service provider.
PRIVATE_TYPES = frozenset({"announcement", "attest_request"})


class RoutingError(RuntimeError):
    pass


def user_role(user_id: str) -> str:
    return f"user:{user_id}"


def encode_fields(kind: str, fields: dict[str, bytes]) -> bytes:
    out = [MSG_MAGIC, bytes([MSG_VERSION]), struct.pack("<H", len(kind)), kind.encode(), struct.pack("<H", len(fields))]
    for name, value in fields.items():
        nb = name.encode()
        out += [struct.pack("<H", len(nb)), nb, struct.pack("<I", len(value)), bytes(value)]
    return b"".join(out)


def decode_fields(data: bytes) -> tuple[str, dict[str, bytes]]:
    if data[:4] != MSG_MAGIC or data[4] != MSG_VERSION:
        raise ValueError("bad message framing")
    pos = 5
    (n,) = struct.unpack_from("<H", data, pos)
    kind = data[pos + 2:pos + 2 + n].decode()
    pos += 2 + n
    (count,) = struct.unpack_from("<H", data, pos)
    pos += 2
    fields = {}
    for _ in range(count):
        (n,) = struct.unpack_from("<H", data, pos)
        name = data[pos + 2:pos + 2 + n].decode()
        pos += 2 + n
        (m,) = struct.unpack_from("<I", data, pos)
        fields[name] = data[pos + 4:pos + 4 + m]
        pos += 4 + m
    if pos != len(data):
        raise ValueError("trailing bytes in message")
    return kind, fields


def f64(x: float) -> bytes:
    return struct.pack("<d", float(x))


def un_f64(b: bytes) -> float:
    return struct.unpack("<d", b)[0]


def text(s: str) -> bytes:
    return s.encode()


@dataclass(frozen=True)
class Message:
    seq: int
    sender: str
    recipient: str
    kind: str
    wire: bytes

    def fields(self) -> dict[str, bytes]:
        kind, fields = decode_fields(self.wire)
        if kind != self.kind:
            raise ValueError("message type does not match its framing")
        return fields


@dataclass
class Network:
    """Reliable in-order delivery between named roles, with an audit trace."""

    trace: list[dict] = field(default_factory=list)
    inboxes: dict[str, deque] = field(default_factory=dict)
    observers: list[Callable[[Message], None]] = field(default_factory=list)
    clock: int = 0

    def send(self, sender: str, recipient: str, kind: str, fields: dict[str, bytes]) -> Message:
        if recipient == SP and kind in PRIVATE_TYPES:
            raise RoutingError(f"{kind} may not be delivered to the service provider")
        self.clock += 1
        msg = Message(self.clock, sender, recipient, kind, encode_fields(kind, fields))
        self.inboxes.setdefault(recipient, deque()).append(msg)
        self.trace.append({"seq": msg.seq, "t": self.clock, "role": sender, "to": recipient,
                           "type": kind, "bytes": len(msg.wire)})
        for obs in self.observers:
            obs(msg)
        return msg

    def receive(self, role: str, kind: str | None = None) -> Message:
        box = self.inboxes.get(role)
        if not box:
            raise RoutingError(f"no message waiting for {role}")
        msg = box.popleft()
        if kind is not None and msg.kind != kind:
            raise RoutingError(f"{role} expected {kind}, got {msg.kind}")
        return msg

    def pending(self, role: str) -> int:
        return len(self.inboxes.get(role, ()))

    def sp_view(self) -> Iterable[dict]:
        return (e for e in self.trace if SP in (e["role"], e["to"]))

    def trace_json(self) -> str:
        return json.dumps(self.trace, indent=None, separators=(",", ":"))
