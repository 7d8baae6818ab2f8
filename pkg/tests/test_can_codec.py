"""Codec tests: log parsing, bit packing, catalog validation.

The bit-packing oracle here is deliberately independent of the
implementation: it lays signals into an explicit bit array following the
documented addressing rules and compares raw integers from both routes.
"""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cancoach.can_codec import (
    Catalog,
    CanFrame,
    MessageSpec,
    SignalSpec,
    builtin_catalog,
    decode,
    decode_log_lines,
    encode,
    load_catalog,
    parse_log_line,
    quantize,
)
from cancoach.errors import (
    CatalogError,
    LogParseError,
    SignalRangeError,
    TruncatedPayloadError,
    UnknownMessageError,
)


@pytest.fixture(scope="module")
def catalog():
    return builtin_catalog()


# ---------------------------------------------------------------- parsing


def test_parse_well_formed_line():
    frame = parse_log_line("1617500000.050 0 0B4#00000B54")
    assert frame.timestamp == pytest.approx(1617500000.050)
    assert frame.bus == 0
    assert frame.can_id == 0x0B4
    assert frame.payload == bytes([0x00, 0x00, 0x0B, 0x54])


def test_parse_empty_payload_allowed():
    frame = parse_log_line("0.5 1 123#")
    assert frame.payload == b""


@pytest.mark.parametrize(
    "line,field",
    [
        ("abc 0 0B4#00", "timestamp"),
        ("nan 0 0B4#00", "timestamp"),
        ("1.0 x 0B4#00", "bus"),
        ("1.0 -1 0B4#00", "bus"),
        ("1.0 0 ZZZ#00", "can_id"),
        ("1.0 0 800#00", "can_id"),
        ("1.0 0 0B4#0", "payload"),
        ("1.0 0 0B4#0G", "payload"),
        ("1.0 0 0B4#000000000000000000", "payload"),
        ("1.0 0 0B400", "#"),
        ("1.0 0B4#00", "fields"),
    ],
)
def test_parse_errors_name_offending_field(line, field):
    with pytest.raises(LogParseError) as err:
        parse_log_line(line)
    assert field.rstrip("s") in str(err.value) or field in str(err.value)


@given(st.text(max_size=80))
def test_parser_totality(text):
    """Arbitrary text either parses or raises LogParseError, nothing else."""
    try:
        frame = parse_log_line(text)
        assert isinstance(frame, CanFrame)
    except LogParseError:
        pass


def test_log_line_round_trip():
    frame = CanFrame(timestamp=12.345, bus=1, can_id=0x2E6, payload=bytes([0x28, 0xA0]))
    assert parse_log_line(frame.to_log_line()) == frame


# ---------------------------------------------------------------- decoding


def test_decode_ego_speed_worked_example(catalog):
    # raw 0x0B54 = 2900, scale 0.01 -> 29.00 m/s
    frame = parse_log_line("1617500000.050 0 0B4#00000B54")
    msg = decode(frame, catalog)
    assert msg.name == "EGO_SPEED"
    assert msg.timestamp == pytest.approx(1617500000.050)
    assert msg.signals["speed"] == pytest.approx(29.00)


def test_decode_lead_info_worked_example(catalog):
    # raw 0x28A0 = 10400 -> 104.00 m
    msg = decode(parse_log_line("0.000 0 2E6#28A0"), catalog)
    assert msg.signals["lead_dist"] == pytest.approx(104.00)


def test_decode_zero_payload_gives_zero_signals(catalog):
    msg = decode(parse_log_line("1.0 0 210#0000000000"), catalog)
    assert msg.signals == {"rel_dist": 0.0, "rel_vel": 0.0, "valid": 0.0}


def test_decode_unknown_id(catalog):
    with pytest.raises(UnknownMessageError):
        decode(parse_log_line("1.0 0 7FF#00"), catalog)


def test_decode_truncated_payload(catalog):
    with pytest.raises(TruncatedPayloadError):
        decode(parse_log_line("1.0 0 0B4#0B54"), catalog)


def test_decode_signed_negative(catalog):
    # rel_vel raw 0xFF38 = -200 two's complement -> -2.00 m/s
    msg = decode(parse_log_line("1.0 0 210#0000FF3800"), catalog)
    assert msg.signals["rel_vel"] == pytest.approx(-2.00)


# ---------------------------------------------------------------- encoding


def test_encode_round_trip(catalog):
    frame = encode("EGO_SPEED", {"speed": 29.00}, catalog, timestamp=2.0)
    assert frame.can_id == 0x0B4
    assert decode(frame, catalog).signals["speed"] == pytest.approx(29.00)


def test_encode_quantizes_to_scale(catalog):
    frame = encode("EGO_SPEED", {"speed": 0.004}, catalog)
    assert decode(frame, catalog).signals["speed"] == 0.0


def test_encode_range_error(catalog):
    # 16-bit unsigned at scale 0.01 tops out at 655.35 m
    with pytest.raises(SignalRangeError):
        encode("TRACK_00", {"rel_dist": 656.0, "rel_vel": 0.0, "valid": 1}, catalog)


def test_encode_missing_signal(catalog):
    with pytest.raises(ValueError):
        encode("TRACK_00", {"rel_dist": 10.0}, catalog)


def test_encode_signed_bounds(catalog):
    sig = catalog.message("TRACK_00").signal("rel_vel")
    lo, hi = sig.raw_bounds()
    assert (lo * sig.scale, hi * sig.scale) == (pytest.approx(-327.68), pytest.approx(327.67))
    frame = encode("TRACK_00", {"rel_dist": 0.0, "rel_vel": -327.68, "valid": 0}, catalog)
    assert decode(frame, catalog).signals["rel_vel"] == pytest.approx(-327.68)
    with pytest.raises(SignalRangeError):
        encode("TRACK_00", {"rel_dist": 0.0, "rel_vel": -327.69, "valid": 0}, catalog)


def _signal_value_strategy(sig):
    lo, hi = sig.raw_bounds()
    return st.floats(
        min_value=lo * sig.scale + sig.offset,
        max_value=hi * sig.scale + sig.offset,
        allow_nan=False,
        width=64,
    )


@settings(max_examples=60)
@given(data=st.data())
def test_round_trip_identity_shipped_catalog(data):
    """decode(encode(x)) equals x quantised to the signal scale, exactly."""
    catalog = builtin_catalog()
    spec = data.draw(st.sampled_from(sorted(catalog.by_name)))
    msg = catalog.message(spec)
    values = {sig.name: data.draw(_signal_value_strategy(sig), label=sig.name) for sig in msg.signals}
    decoded = decode(encode(spec, values, catalog), catalog).signals
    for sig in msg.signals:
        assert decoded[sig.name] == quantize(values[sig.name], sig)


# ------------------------------------------------------- bit-level oracle


def _oracle_pack(sig, raw, n_bytes):
    """Reference packing: explicit bit array per the documented addressing."""
    unsigned = raw & ((1 << sig.bit_length) - 1)
    raw_bits = [(unsigned >> (sig.bit_length - 1 - i)) & 1 for i in range(sig.bit_length)]
    frame_bits = [0] * (n_bytes * 8)  # index = byte*8 + bit-from-MSB
    for i, bit in enumerate(raw_bits):
        b = sig.start_bit + i
        if sig.byte_order == "big":
            frame_bits[b] = bit
        else:
            # little: raw LSB sits at start_bit, counting LSB-first per byte
            b = sig.start_bit + (sig.bit_length - 1 - i)
            frame_bits[(b // 8) * 8 + (7 - b % 8)] = bit
    out = bytearray(n_bytes)
    for i, bit in enumerate(frame_bits):
        out[i // 8] |= bit << (7 - i % 8)
    return bytes(out)


@settings(max_examples=200)
@given(data=st.data())
def test_bit_packing_matches_oracle(data):
    start = data.draw(st.integers(min_value=0, max_value=56), label="start_bit")
    length = data.draw(st.integers(min_value=1, max_value=64 - start), label="bit_length")
    order = data.draw(st.sampled_from(["big", "little"]), label="order")
    signed = data.draw(st.booleans(), label="signed")
    sig = SignalSpec("x", start, length, order, signed, scale=1.0)
    lo, hi = sig.raw_bounds()
    raw = data.draw(st.integers(min_value=lo, max_value=hi), label="raw")

    n_bytes = sig.required_bytes()
    catalog = Catalog([MessageSpec("M", 0x100, 0.0, (sig,))])
    encoded = encode("M", {"x": float(raw)}, catalog)
    assert encoded.payload == _oracle_pack(sig, raw, n_bytes)
    assert decode(encoded, catalog).signals["x"] == float(raw)


# ---------------------------------------------------------------- catalog


def test_builtin_catalog_census(catalog):
    assert len(catalog) == 18
    assert catalog.message("EGO_SPEED").can_id == 0x0B4
    assert catalog.message("LEAD_INFO").can_id == 0x2E6
    for i in range(16):
        msg = catalog.message(f"TRACK_{i:02d}")
        assert msg.can_id == 0x210 + i
        assert {s.name for s in msg.signals} == {"rel_dist", "rel_vel", "valid"}
        assert msg.signal("rel_vel").signed
    assert catalog.message("EGO_SPEED").hz == 20
    assert catalog.message("LEAD_INFO").hz == 1


def test_load_catalog_empty_text():
    assert len(load_catalog("")) == 0


def test_load_catalog_collects_all_violations():
    text = """
messages:
  A:
    id: 0x100
    hz: 10
    signals:
      s1: {start_bit: 0, length: 8, scale: 0.0}
      s2: {start_bit: 4, length: 8}
  B:
    id: 0x100
    hz: 10
    signals:
      s3: {start_bit: 0, length: 8}
"""
    with pytest.raises(CatalogError) as err:
        load_catalog(text)
    joined = str(err.value)
    assert "scale" in joined
    assert "overlap" in joined
    assert "already used" in joined


def test_load_catalog_rejects_out_of_frame_signal():
    text = """
messages:
  A:
    id: 0x101
    hz: 1
    signals:
      s: {start_bit: 60, length: 8}
"""
    with pytest.raises(CatalogError) as err:
        load_catalog(text)
    assert "64-bit" in str(err.value)


def test_overlap_detection_across_byte_orders():
    # big bits 8..15 and little bits 8..15 are the same physical byte
    text = """
messages:
  A:
    id: 0x102
    hz: 1
    signals:
      hi: {start_bit: 8, length: 8, order: big}
      lo: {start_bit: 8, length: 8, order: little}
"""
    with pytest.raises(CatalogError) as err:
        load_catalog(text)
    assert "overlap" in str(err.value)


def test_little_endian_round_trip():
    text = """
messages:
  L:
    id: 0x103
    hz: 1
    signals:
      a: {start_bit: 0, length: 12, order: little, scale: 0.5, offset: -10}
      b: {start_bit: 12, length: 4, order: little}
"""
    cat = load_catalog(text)
    frame = encode("L", {"a": 100.0, "b": 7.0}, cat)
    assert decode(frame, cat).signals == {"a": 100.0, "b": 7.0}


# ---------------------------------------------------------------- log files


def test_decode_log_lines_counts_skips(catalog):
    lines = [
        "# comment",
        "",
        "0.000 0 0B4#00000B54",
        "bogus line here",
        "0.050 0 7AA#00",
        "0.050 0 0B4#00000B72",
    ]
    decoded, skipped = decode_log_lines(lines, catalog)
    assert [m.signals["speed"] for m in decoded] == [pytest.approx(29.0), pytest.approx(29.3)]
    assert skipped == 2
