"""Framed RF telemetry between the UAV and the ground robot.

Wire format (byte-exact, little-endian numerics):

    offset  size  field
    0       1     magic, 0xFD
    1       1     payload_len
    2       1     seq (wrapping counter)
    3       1     sys_id (1 = UAV, 2 = hexapod)
    4       1     msg_id
    5       n     payload (n = payload_len)
    5+n     2     crc, CRC-16/X25 over bytes 1..4+n (payload_len through
                  payload inclusive), little-endian

CRC-16/X25: polynomial 0x1021 bit-reflected, init 0xFFFF, output XORed
with 0xFFFF.  Check value: crc16_x25(b"123456789") == 0x906E.

Message payloads:

    msg_id 0  Heartbeat       stage: u8
    msg_id 1  StateReport     pose: 6 x f32, grasp_state: u8, load: f32, tilt: f32
    msg_id 2  TargetLocation  p_rel: 3 x f32, track_id: u32
    msg_id 3  Command         opcode: u8 (1 Deploy, 2 Approach, 3 Grasp, 4 Abort, 5 Hold)
    msg_id 4  Ack             seq_acked: u8, ok: u8

The channel model drops each frame independently with a seeded draw and
delivers survivors a fixed number of ticks later, in send order; there is
no reordering and no duplication.
"""

from __future__ import annotations

import math
import struct
from collections import deque
from dataclasses import dataclass
from enum import Enum

from .rng import Xoshiro256StarStar

MAGIC = 0xFD
HEADER_LEN = 5
OVERHEAD = 7  # header + crc

SYS_UAV = 1
SYS_HEXAPOD = 2

MSG_HEARTBEAT = 0
MSG_STATE_REPORT = 1
MSG_TARGET_LOCATION = 2
MSG_COMMAND = 3
MSG_ACK = 4

OP_DEPLOY = 1
OP_APPROACH = 2
OP_GRASP = 3
OP_ABORT = 4
OP_HOLD = 5


class PayloadTooLarge(ValueError):
    pass


class DecodeError(Exception):
    """Base of all defined decode failures."""


class BadMagic(DecodeError):
    pass


class BadCrc(DecodeError):
    pass


class UnknownMsgId(DecodeError):
    pass


class TruncatedFrame(DecodeError):
    pass


class MalformedPayload(DecodeError):
    """Known msg_id but wrong payload length or non-finite float field."""


def crc16_x25(data: bytes) -> int:
    """CRC-16/X25 (reflected 0x1021, init 0xFFFF, xorout 0xFFFF)."""
    crc = 0xFFFF
    for b in data:
        crc ^= b
        for _ in range(8):
            if crc & 1:
                crc = (crc >> 1) ^ 0x8408
            else:
                crc >>= 1
    return crc ^ 0xFFFF


@dataclass(frozen=True)
class Heartbeat:
    stage: int  # u8


@dataclass(frozen=True)
class StateReport:
    pose: tuple[float, float, float, float, float, float]  # x y z roll pitch yaw
    grasp_state: int  # u8
    load: float
    tilt: float


@dataclass(frozen=True)
class TargetLocation:
    p_rel: tuple[float, float, float]
    track_id: int  # u32


@dataclass(frozen=True)
class Command:
    opcode: int  # u8


@dataclass(frozen=True)
class Ack:
    seq_acked: int  # u8
    ok: int  # u8


Message = Heartbeat | StateReport | TargetLocation | Command | Ack

_STATE_REPORT_FMT = "<6fBff"
_TARGET_FMT = "<3fI"


def _check_finite(values) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"non-finite field value {v}")


def _encode_payload(msg: Message) -> tuple[int, bytes]:
    if isinstance(msg, Heartbeat):
        return MSG_HEARTBEAT, struct.pack("<B", msg.stage & 0xFF)
    if isinstance(msg, StateReport):
        _check_finite(msg.pose)
        _check_finite((msg.load, msg.tilt))
        return MSG_STATE_REPORT, struct.pack(
            _STATE_REPORT_FMT, *msg.pose, msg.grasp_state & 0xFF, msg.load, msg.tilt
        )
    if isinstance(msg, TargetLocation):
        _check_finite(msg.p_rel)
        return MSG_TARGET_LOCATION, struct.pack(_TARGET_FMT, *msg.p_rel, msg.track_id & 0xFFFFFFFF)
    if isinstance(msg, Command):
        return MSG_COMMAND, struct.pack("<B", msg.opcode & 0xFF)
    if isinstance(msg, Ack):
        return MSG_ACK, struct.pack("<BB", msg.seq_acked & 0xFF, msg.ok & 0xFF)
    raise TypeError(f"not a protocol message: {msg!r}")


def _decode_payload(msg_id: int, payload: bytes) -> Message:
    try:
        if msg_id == MSG_HEARTBEAT:
            (stage,) = struct.unpack("<B", payload)
            return Heartbeat(stage=stage)
        if msg_id == MSG_STATE_REPORT:
            vals = struct.unpack(_STATE_REPORT_FMT, payload)
            _check_finite(vals[:6] + vals[7:])
            return StateReport(pose=vals[:6], grasp_state=vals[6], load=vals[7], tilt=vals[8])
        if msg_id == MSG_TARGET_LOCATION:
            vals = struct.unpack(_TARGET_FMT, payload)
            _check_finite(vals[:3])
            return TargetLocation(p_rel=vals[:3], track_id=vals[3])
        if msg_id == MSG_COMMAND:
            (opcode,) = struct.unpack("<B", payload)
            return Command(opcode=opcode)
        if msg_id == MSG_ACK:
            seq_acked, ok = struct.unpack("<BB", payload)
            return Ack(seq_acked=seq_acked, ok=ok)
    except (struct.error, ValueError) as exc:
        raise MalformedPayload(f"msg_id {msg_id}: {exc}") from None
    raise UnknownMsgId(f"msg_id {msg_id}")


def encode(msg: Message, seq: int, sys_id: int) -> bytes:
    """Serialize one message into a complete frame."""
    msg_id, payload = _encode_payload(msg)
    if len(payload) > 255:
        raise PayloadTooLarge(f"{len(payload)} bytes")
    body = bytes([len(payload), seq & 0xFF, sys_id & 0xFF, msg_id]) + payload
    crc = crc16_x25(body)
    return bytes([MAGIC]) + body + struct.pack("<H", crc)


def decode(data: bytes) -> tuple[Message, int, int]:
    """Parse one frame from the start of ``data``.

    Returns (message, seq, sys_id).  Bytes past the frame are ignored;
    stream parsing with resynchronization is ``decode_stream``.
    """
    if len(data) < 1:
        raise TruncatedFrame("empty buffer")
    if data[0] != MAGIC:
        raise BadMagic(f"0x{data[0]:02X}")
    if len(data) < OVERHEAD:
        raise TruncatedFrame(f"{len(data)} bytes, need at least {OVERHEAD}")
    payload_len = data[1]
    end = OVERHEAD + payload_len
    if len(data) < end:
        raise TruncatedFrame(f"{len(data)} bytes, frame needs {end}")
    body = data[1 : HEADER_LEN + payload_len]
    (crc_recv,) = struct.unpack_from("<H", data, HEADER_LEN + payload_len)
    if crc16_x25(body) != crc_recv:
        raise BadCrc(f"received 0x{crc_recv:04X}")
    seq, sys_id, msg_id = data[2], data[3], data[4]
    msg = _decode_payload(msg_id, data[HEADER_LEN : HEADER_LEN + payload_len])
    return msg, seq, sys_id


def decode_stream(data: bytes) -> tuple[list[tuple[Message, int, int]], list[DecodeError]]:
    """Parse every frame in a byte stream.

    After any error the parser scans forward to the next 0xFD and tries
    again, so one corrupt frame cannot take down the rest of the stream.
    """
    messages: list[tuple[Message, int, int]] = []
    errors: list[DecodeError] = []
    pos = 0
    n = len(data)
    while pos < n:
        if data[pos] != MAGIC:
            pos = _next_magic(data, pos + 1)
            continue
        try:
            msg, seq, sys_id = decode(data[pos:])
            messages.append((msg, seq, sys_id))
            pos += OVERHEAD + data[pos + 1]
        except DecodeError as exc:
            errors.append(exc)
            pos = _next_magic(data, pos + 1)
    return messages, errors


def _next_magic(data: bytes, start: int) -> int:
    idx = data.find(MAGIC, start)
    return idx if idx >= 0 else len(data)


# ---------------------------------------------------------------------------
# Channel model and link supervision


@dataclass(frozen=True)
class ChannelModel:
    drop_prob: float = 0.0
    latency: int = 0  # whole ticks
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.drop_prob <= 1.0):
            raise ValueError("drop_prob must lie in [0, 1]")
        if self.latency < 0:
            raise ValueError("latency must be >= 0")


class Channel:
    """One direction of the RF link.  Deterministic given the model seed."""

    def __init__(self, model: ChannelModel):
        self.model = model
        self._rng = Xoshiro256StarStar(model.seed)
        self._in_flight: deque[tuple[int, bytes]] = deque()
        self.sent = 0
        self.dropped = 0
        self.delivered = 0

    def step(self, new_frames: list[bytes], tick: int) -> list[bytes]:
        """Offer new frames at ``tick``; collect the ones due for delivery."""
        for frame in new_frames:
            self.sent += 1
            if self._rng.uniform() < self.model.drop_prob:
                self.dropped += 1
                continue
            self._in_flight.append((tick + self.model.latency, frame))
        out = []
        while self._in_flight and self._in_flight[0][0] <= tick:
            out.append(self._in_flight.popleft()[1])
        self.delivered += len(out)
        return out


def channel_step(channel: Channel, new_frames: list[bytes], tick: int) -> list[bytes]:
    return channel.step(new_frames, tick)


class LinkStatus(Enum):
    Healthy = "Healthy"
    Lost = "Lost"


def link_supervisor(last_heartbeat_age: int, timeout: int) -> LinkStatus:
    """Lost once the age of the last heartbeat exceeds the timeout."""
    return LinkStatus.Lost if last_heartbeat_age > timeout else LinkStatus.Healthy
