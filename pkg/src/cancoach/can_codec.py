"""CAN log parsing and signal encode/decode against a message catalog.

Log lines follow the candump text convention::

    <seconds> <bus> <ID>#<HEXBYTES>
    1617500000.050 0 0B4#00000B54

Identifiers are standard 11-bit ids written in hex. Payloads are 0 to 8
bytes, two hex digits per byte.

Bit addressing
--------------
Signals are located by ``start_bit`` and ``bit_length`` inside the payload.
Two byte orders are supported and they number bits differently:

* ``big``: bits count from the most significant bit of byte 0. A signal's
  raw value is read most significant bit first. ``start_bit=16,
  bit_length=16`` covers payload bytes 2..3, so ``00 00 0B 54`` yields raw
  ``0x0B54``.
* ``little``: bits count from the least significant bit of byte 0 and the
  raw value is assembled least significant bit first.

Physical value = raw * scale + offset, with two's-complement raw for signed
signals. Encoding rounds to the nearest raw integer, so decode(encode(x))
returns x quantised to the signal's scale.
"""

from __future__ import annotations

import importlib.resources
import logging
import math
from dataclasses import dataclass, field

import yaml

from .errors import (
    CatalogError,
    LogParseError,
    SignalRangeError,
    TruncatedPayloadError,
    UnknownMessageError,
)

logger = logging.getLogger(__name__)

MAX_STANDARD_ID = 0x7FF
MAX_PAYLOAD_BYTES = 8
BYTE_ORDERS = ("big", "little")


@dataclass(frozen=True)
class CanFrame:
    """One timestamped frame as it appears on the bus."""

    timestamp: float
    bus: int
    can_id: int
    payload: bytes

    def to_log_line(self) -> str:
        return f"{self.timestamp:.3f} {self.bus} {self.can_id:03X}#{self.payload.hex().upper()}"


@dataclass(frozen=True)
class SignalSpec:
    """Placement and scaling of one signal within a message payload."""

    name: str
    start_bit: int
    bit_length: int
    byte_order: str = "big"
    signed: bool = False
    scale: float = 1.0
    offset: float = 0.0
    unit: str = ""

    def raw_bounds(self) -> tuple[int, int]:
        """Inclusive (lo, hi) raw integer range for this signal."""
        if self.signed:
            half = 1 << (self.bit_length - 1)
            return -half, half - 1
        return 0, (1 << self.bit_length) - 1

    def required_bytes(self) -> int:
        """Payload bytes needed before this signal can be read."""
        return (self.start_bit + self.bit_length + 7) // 8

    def physical_bits(self) -> frozenset[int]:
        """Bit positions occupied, in a byte-order-independent numbering.

        Position = byte_index * 8 + bit_within_byte counted from the MSB,
        which lets overlap checks compare big and little signals directly.
        """
        bits = []
        for b in range(self.start_bit, self.start_bit + self.bit_length):
            if self.byte_order == "big":
                bits.append(b)
            else:
                bits.append((b // 8) * 8 + (7 - b % 8))
        return frozenset(bits)


@dataclass(frozen=True)
class MessageSpec:
    """One catalog entry: id, nominal rate, and its signals."""

    name: str
    can_id: int
    hz: float
    signals: tuple[SignalSpec, ...]

    def payload_length(self) -> int:
        return max(sig.required_bytes() for sig in self.signals)

    def signal(self, name: str) -> SignalSpec:
        for sig in self.signals:
            if sig.name == name:
                return sig
        raise ValueError(f"message {self.name!r} has no signal {name!r}")


@dataclass(frozen=True)
class DecodedMessage:
    """Physical signal values decoded from one frame."""

    name: str
    timestamp: float
    signals: dict[str, float] = field(default_factory=dict)


class Catalog:
    """Message definitions indexed by name and by frame id."""

    def __init__(self, messages: list[MessageSpec]):
        self.by_name: dict[str, MessageSpec] = {m.name: m for m in messages}
        self.by_id: dict[int, MessageSpec] = {m.can_id: m for m in messages}

    def __len__(self) -> int:
        return len(self.by_name)

    def __iter__(self):
        return iter(self.by_name.values())

    def message(self, key: str | int) -> MessageSpec:
        table = self.by_name if isinstance(key, str) else self.by_id
        try:
            return table[key]
        except KeyError:
            label = key if isinstance(key, str) else f"0x{key:X}"
            raise UnknownMessageError(f"no catalog entry for {label}") from None


def parse_log_line(line: str) -> CanFrame:
    """Parse one candump-style log line.

    Args:
        line: text of the form ``<seconds> <bus> <ID>#<HEXBYTES>``.

    Returns:
        The parsed CanFrame.

    Raises:
        LogParseError: malformed line; the message names the bad field.
    """
    parts = line.split()
    if len(parts) != 3:
        raise LogParseError(f"expected 3 whitespace-separated fields, got {len(parts)}: {line!r}")

    try:
        timestamp = float(parts[0])
    except ValueError:
        raise LogParseError(f"timestamp is not a number: {parts[0]!r}") from None
    if not math.isfinite(timestamp):
        raise LogParseError(f"timestamp is not finite: {parts[0]!r}")

    try:
        bus = int(parts[1])
    except ValueError:
        raise LogParseError(f"bus is not an integer: {parts[1]!r}") from None
    if bus < 0:
        raise LogParseError(f"bus is negative: {parts[1]!r}")

    body = parts[2]
    if "#" not in body:
        raise LogParseError(f"frame body has no '#' separator: {body!r}")
    id_text, _, payload_text = body.partition("#")

    try:
        can_id = int(id_text, 16)
    except ValueError:
        raise LogParseError(f"can_id is not hex: {id_text!r}") from None
    if not 0 <= can_id <= MAX_STANDARD_ID:
        raise LogParseError(f"can_id out of 11-bit range: 0x{can_id:X}")

    if len(payload_text) % 2 != 0:
        raise LogParseError(f"payload has odd hex digit count: {payload_text!r}")
    try:
        payload = bytes.fromhex(payload_text)
    except ValueError:
        raise LogParseError(f"payload is not hex: {payload_text!r}") from None
    if len(payload) > MAX_PAYLOAD_BYTES:
        raise LogParseError(f"payload longer than {MAX_PAYLOAD_BYTES} bytes: {payload_text!r}")

    return CanFrame(timestamp=timestamp, bus=bus, can_id=can_id, payload=payload)


def _extract_raw(payload: bytes, sig: SignalSpec) -> int:
    if sig.required_bytes() > len(payload):
        raise TruncatedPayloadError(
            f"signal {sig.name!r} needs {sig.required_bytes()} bytes, payload has {len(payload)}"
        )
    mask = (1 << sig.bit_length) - 1
    if sig.byte_order == "big":
        value = int.from_bytes(payload, "big")
        shift = len(payload) * 8 - (sig.start_bit + sig.bit_length)
        raw = (value >> shift) & mask
    else:
        raw = (int.from_bytes(payload, "little") >> sig.start_bit) & mask
    if sig.signed and raw >= 1 << (sig.bit_length - 1):
        raw -= 1 << sig.bit_length
    return raw


def _insert_raw(buffer: bytearray, sig: SignalSpec, raw: int) -> None:
    mask = (1 << sig.bit_length) - 1
    unsigned = raw & mask
    if sig.byte_order == "big":
        value = int.from_bytes(buffer, "big")
        shift = len(buffer) * 8 - (sig.start_bit + sig.bit_length)
        value |= unsigned << shift
        buffer[:] = value.to_bytes(len(buffer), "big")
    else:
        value = int.from_bytes(buffer, "little")
        value |= unsigned << sig.start_bit
        buffer[:] = value.to_bytes(len(buffer), "little")


def decode(frame: CanFrame, catalog: Catalog) -> DecodedMessage:
    """Decode every signal of the frame's message.

    Raises:
        UnknownMessageError: the frame id has no catalog entry.
        TruncatedPayloadError: payload shorter than a signal's extent.
    """
    spec = catalog.message(frame.can_id)
    values = {}
    for sig in spec.signals:
        raw = _extract_raw(frame.payload, sig)
        values[sig.name] = raw * sig.scale + sig.offset
    return DecodedMessage(name=spec.name, timestamp=frame.timestamp, signals=values)


def encode(
    name: str,
    signals: dict[str, float],
    catalog: Catalog,
    *,
    timestamp: float = 0.0,
    bus: int = 0,
) -> CanFrame:
    """Build a frame carrying the given physical signal values.

    Every signal of the message must be supplied; each value is rounded to
    the nearest raw step before packing.

    Raises:
        UnknownMessageError: no catalog entry for ``name``.
        SignalRangeError: a value does not fit its raw range.
        ValueError: a signal of the message is missing from ``signals``.
    """
    spec = catalog.message(name)
    missing = [s.name for s in spec.signals if s.name not in signals]
    if missing:
        raise ValueError(f"message {name!r} missing values for signals: {missing}")

    buffer = bytearray(spec.payload_length())
    for sig in spec.signals:
        raw = round((signals[sig.name] - sig.offset) / sig.scale)
        lo, hi = sig.raw_bounds()
        if not lo <= raw <= hi:
            raise SignalRangeError(
                f"{name}.{sig.name}: value {signals[sig.name]!r} maps to raw {raw}, "
                f"outside [{lo}, {hi}]"
            )
        _insert_raw(buffer, sig, raw)
    return CanFrame(timestamp=timestamp, bus=bus, can_id=spec.can_id, payload=bytes(buffer))


def quantize(value: float, sig: SignalSpec) -> float:
    """Physical value after one encode/decode round trip."""
    return round((value - sig.offset) / sig.scale) * sig.scale + sig.offset


def _build_signal(msg_name: str, sig_name: str, node: dict, problems: list[str]) -> SignalSpec | None:
    where = f"{msg_name}.{sig_name}"
    if not isinstance(node, dict):
        problems.append(f"{where}: signal definition must be a mapping")
        return None
    try:
        start_bit = int(node["start_bit"])
        bit_length = int(node["length"])
    except (KeyError, TypeError, ValueError):
        problems.append(f"{where}: start_bit and length are required integers")
        return None
    order = str(node.get("order", "big"))
    scale = float(node.get("scale", 1.0))
    sig = SignalSpec(
        name=sig_name,
        start_bit=start_bit,
        bit_length=bit_length,
        byte_order=order,
        signed=bool(node.get("signed", False)),
        scale=scale,
        offset=float(node.get("offset", 0.0)),
        unit=str(node.get("unit", "")),
    )
    # scale problems do not invalidate placement, so the signal still takes
    # part in overlap checks; placement problems make the bit set meaningless
    placement_ok = True
    if order not in BYTE_ORDERS:
        problems.append(f"{where}: order must be one of {BYTE_ORDERS}, got {order!r}")
        placement_ok = False
    if bit_length < 1:
        problems.append(f"{where}: length must be >= 1")
        placement_ok = False
    if start_bit < 0 or start_bit + bit_length > MAX_PAYLOAD_BYTES * 8:
        problems.append(f"{where}: bits {start_bit}..{start_bit + bit_length - 1} exceed 64-bit frame")
        placement_ok = False
    if scale == 0:
        problems.append(f"{where}: scale must be nonzero")
    return sig if placement_ok else None


def load_catalog(text: str) -> Catalog:
    """Parse a YAML catalog document.

    An empty document yields an empty catalog. All violations found are
    collected into one CatalogError rather than stopping at the first.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise CatalogError([f"not valid YAML: {exc}"]) from None
    if doc is None:
        return Catalog([])
    if not isinstance(doc, dict) or not isinstance(doc.get("messages", {}), dict):
        raise CatalogError(["top level must be a mapping with a 'messages' mapping"])

    problems: list[str] = []
    messages: list[MessageSpec] = []
    seen_ids: dict[int, str] = {}
    for msg_name, node in doc.get("messages", {}).items():
        if not isinstance(node, dict):
            problems.append(f"{msg_name}: message definition must be a mapping")
            continue
        try:
            can_id = int(node["id"], 16) if isinstance(node.get("id"), str) else int(node["id"])
        except (KeyError, TypeError, ValueError):
            problems.append(f"{msg_name}: id is required and must be an integer")
            continue
        if not 0 <= can_id <= MAX_STANDARD_ID:
            problems.append(f"{msg_name}: id 0x{can_id:X} outside 11-bit range")
        if can_id in seen_ids:
            problems.append(f"{msg_name}: id 0x{can_id:X} already used by {seen_ids[can_id]}")
        else:
            seen_ids[can_id] = msg_name

        signals = []
        for sig_name, sig_node in (node.get("signals") or {}).items():
            sig = _build_signal(msg_name, str(sig_name), sig_node, problems)
            if sig is not None:
                signals.append(sig)
        if not signals:
            problems.append(f"{msg_name}: message defines no valid signals")
            continue

        for i, a in enumerate(signals):
            for b in signals[i + 1 :]:
                if a.physical_bits() & b.physical_bits():
                    problems.append(f"{msg_name}: signals {a.name!r} and {b.name!r} overlap")

        messages.append(
            MessageSpec(
                name=str(msg_name),
                can_id=can_id,
                hz=float(node.get("hz", 0.0)),
                signals=tuple(signals),
            )
        )

    if problems:
        raise CatalogError(problems)
    return Catalog(messages)


def builtin_catalog() -> Catalog:
    """The catalog shipped with the package (ego speed, 16 radar tracks, lead info)."""
    text = importlib.resources.files("cancoach.data").joinpath("catalog.yaml").read_text()
    return load_catalog(text)


def decode_log_lines(lines, catalog: Catalog) -> tuple[list[DecodedMessage], int]:
    """Decode an iterable of log lines.

    Blank lines and ``#`` comments are ignored. Lines that fail to parse or
    decode are skipped with a warning; the skip count is returned so callers
    can surface it.

    Returns:
        (decoded messages in input order, number of skipped lines)
    """
    out: list[DecodedMessage] = []
    skipped = 0
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            frame = parse_log_line(line)
            out.append(decode(frame, catalog))
        except (LogParseError, UnknownMessageError, TruncatedPayloadError) as exc:
            skipped += 1
            logger.warning("skipping line %d: %s", lineno, exc)
    return out, skipped
