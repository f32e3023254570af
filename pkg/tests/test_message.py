from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tidbus.message import (
    BadNumber,
    BadVersionFormat,
    MalformedXml,
    MicroDuration,
    MicroTime,
    MissingMandatory,
    PROTOCOL_VERSION,
    ProtocolVersion,
    TidMessage,
    parse_message,
    parse_microtime,
    serialize_message,
    versions_compatible,
)

GOLDEN = (
    '<tid version="0.3.0.0" description="beep" block="1732" family="biosig" '
    'event="785" absolute="1330691458,821096" relative="34687,761248" '
    'source="P300 detector" value="3,14159"/>'
)

GOLDEN_MULTILINE = """<tid version="0.3.0.0"
description="beep"
block="1732"
family="biosig"
event="785"
absolute="1330691458,821096"
relative="34687,761248"
source="P300 detector"
value="3,14159"/>"""


def test_golden_message_fields():
    msg = parse_message(GOLDEN)
    assert msg.version == ProtocolVersion(0, 3, 0, 0)
    assert msg.description == "beep"
    assert msg.block == 1732
    assert msg.family == "biosig"
    assert msg.event == 785
    assert msg.absolute == MicroTime(1330691458, 821096)
    assert msg.relative == MicroDuration(34687, 761248)
    assert msg.source == "P300 detector"
    assert msg.value == 3.14159


def test_golden_round_trip_is_byte_identical():
    assert serialize_message(parse_message(GOLDEN)) == GOLDEN


def test_multiline_attribute_layout_parses_identically():
    assert parse_message(GOLDEN_MULTILINE) == parse_message(GOLDEN)


def test_minimal_message_defaults():
    msg = parse_message(
        '<tid version="0.3.0.0" description="x" family="custom" event="1" '
        'absolute="0,000000" relative="0,000000"/>'
    )
    assert msg.block == -1
    assert msg.source is None
    assert msg.value is None
    assert msg.absolute == MicroTime(0, 0)
    assert msg.relative == MicroDuration(0, 0)


def test_unset_timestamps_decode_to_none_and_round_trip():
    msg = parse_message('<tid version="0.3.0.0" description="x" family="custom" event="1"/>')
    assert msg.absolute is None
    assert msg.relative is None
    line = serialize_message(msg)
    assert "absolute" not in line and "relative" not in line
    assert parse_message(line) == msg


@pytest.mark.parametrize("missing", ["version", "description", "family", "event"])
def test_missing_mandatory_attribute(missing):
    attrs = {
        "version": "0.3.0.0",
        "description": "x",
        "family": "custom",
        "event": "1",
    }
    del attrs[missing]
    raw = "<tid " + " ".join(f'{k}="{v}"' for k, v in attrs.items()) + "/>"
    with pytest.raises(MissingMandatory) as info:
        parse_message(raw)
    assert info.value.name == missing


def test_empty_mandatory_attribute_counts_as_missing():
    with pytest.raises(MissingMandatory):
        parse_message('<tid version="0.3.0.0" description="" family="custom" event="1"/>')


@pytest.mark.parametrize(
    "raw",
    [
        "",
        "not xml",
        "<tid",
        '<other description="x"/>',
        '<TID version="0.3.0.0" description="x" family="custom" event="1"/>',
        '<tid version="0.3.0.0" description="x" family="custom" event="1">text</tid>',
        '<tid version="0.3.0.0" description="x" family="custom" event="1"><sub/></tid>',
        '<tid description="a" description="b"/>',
        "<tid/><tid/>",
        '<?xml version="1.0"?><tid version="0.3.0.0" description="x" family="custom" event="1"/>',
    ],
)
def test_malformed_xml_rejected(raw):
    with pytest.raises(MalformedXml):
        parse_message(raw)


def test_tag_and_attribute_names_are_case_sensitive():
    # An upper-cased attribute is just an unknown attribute, so the
    # lower-case mandatory one is missing.
    with pytest.raises(MissingMandatory) as info:
        parse_message('<tid VERSION="0.3.0.0" description="x" family="custom" event="1"/>')
    assert info.value.name == "version"


@pytest.mark.parametrize(
    "attr,raw_value",
    [
        ("event", "notanumber"),
        ("event", "1.5"),
        ("block", "12,5"),
        ("block", "-5"),
        ("absolute", "12:34"),
        ("absolute", "1330691458"),
        ("absolute", "1,8210961"),
        ("relative", "-1,000000"),
        ("value", "1,2,3"),
        ("value", "abc"),
        ("value", "1e5"),
    ],
)
def test_bad_numbers(attr, raw_value):
    raw = (
        f'<tid version="0.3.0.0" description="x" family="custom" event="1" '
        f'{attr}="{raw_value}"/>'
    )
    if attr == "event":
        raw = (
            f'<tid version="0.3.0.0" description="x" family="custom" '
            f'event="{raw_value}"/>'
        )
    with pytest.raises(BadNumber) as info:
        parse_message(raw)
    assert info.value.name == attr


@pytest.mark.parametrize("bad", ["0.3.0", "0.3.0.0.1", "a.b.c.d", "0.3.0.-1", "0_3_0_0", ""])
def test_bad_version_format(bad):
    raw = f'<tid version="{bad}" description="x" family="custom" event="1"/>'
    with pytest.raises((BadVersionFormat, MissingMandatory)):
        parse_message(raw)


def test_unknown_attributes_are_ignored():
    msg = parse_message(
        '<tid version="0.3.0.0" description="x" family="custom" event="1" '
        'color="blue" priority="9"/>'
    )
    assert "color" not in serialize_message(msg)


# -- versions ------------------------------------------------------------


@pytest.mark.parametrize(
    "a,b,expected",
    [
        ((0, 3, 0, 0), (0, 3, 1, 2), True),
        ((0, 3, 0, 0), (1, 0, 0, 0), False),
        ((2, 5, 3, 1), (2, 0, 0, 0), True),
    ],
)
def test_versions_compatible(a, b, expected):
    assert versions_compatible(ProtocolVersion(*a), ProtocolVersion(*b)) is expected


@given(
    st.tuples(*[st.integers(0, 40)] * 4),
    st.tuples(*[st.integers(0, 40)] * 4),
)
def test_version_compatibility_reflexive_and_symmetric(a, b):
    va, vb = ProtocolVersion(*a), ProtocolVersion(*b)
    assert versions_compatible(va, va)
    assert versions_compatible(va, vb) == versions_compatible(vb, va)


def test_version_parse_round_trip():
    v = ProtocolVersion.parse("10.2.30.4")
    assert v == ProtocolVersion(10, 2, 30, 4)
    assert ProtocolVersion.parse(str(v)) == v


def test_version_rejects_negative_parts():
    with pytest.raises(ValueError):
        ProtocolVersion(0, -1, 0, 0)


# -- timestamps ------------------------------------------------------------


def test_parse_microtime_paper_value():
    assert parse_microtime("1330691458,821096") == MicroTime(1330691458, 821096)


def test_parse_microtime_zero():
    assert parse_microtime("0,000000") == MicroTime(0, 0)


def test_parse_microtime_short_fraction_reads_as_decimal():
    # Independent oracle: decimal string to integer microseconds.
    expected = int(Decimal("5.5") * 10**6)
    assert parse_microtime("5,5").total_micros() == expected
    assert parse_microtime("5.5") == parse_microtime("5,5")


def test_parse_microtime_negative_is_decimal_not_fieldwise():
    assert parse_microtime("-2,5").total_micros() == int(Decimal("-2.5") * 10**6)


@pytest.mark.parametrize("bad", ["", "5", "5,", ",5", "5,5,5", "5;5", "1,8210961", "a,b"])
def test_parse_microtime_bad_shapes(bad):
    with pytest.raises(BadNumber):
        parse_microtime(bad)


def test_microtime_normalizes_carry():
    assert MicroTime(0, 1_500_000) == MicroTime(1, 500_000)
    assert MicroTime(2, -500_000) == MicroTime(1, 500_000)


@given(st.integers(-10**12, 10**12))
def test_microtime_micros_always_in_range(total):
    t = MicroTime.from_micros(total)
    assert 0 <= t.micros <= 999_999
    assert t.total_micros() == total


def test_microduration_rejects_negative():
    with pytest.raises(ValueError):
        MicroDuration(0, -1)
    with pytest.raises(BadNumber):
        MicroDuration.parse("-1,000000")


def test_microduration_ordering():
    assert MicroDuration(0, 999_999) < MicroDuration(1, 0)


def test_timestamp_wire_form_pads_micros():
    assert MicroTime(5, 12).to_wire() == "5,000012"
    assert MicroDuration(0, 0).to_wire() == "0,000000"


# -- serialization details ---------------------------------------------------


def _msg(**overrides):
    base = dict(
        version=PROTOCOL_VERSION,
        description="x",
        family="custom",
        event=1,
        absolute=MicroTime(0, 0),
        relative=MicroDuration(0, 0),
    )
    base.update(overrides)
    return TidMessage(**base)


def test_serialize_escapes_quotes():
    line = serialize_message(_msg(description='say "hi"'))
    assert 'description="say &quot;hi&quot;"' in line
    assert parse_message(line).description == 'say "hi"'


def test_serialize_escapes_markup_and_newlines():
    msg = _msg(description="a<b>&c", source="line1\nline2\ttab")
    line = serialize_message(msg)
    assert "\n" not in line
    assert "&lt;" in line and "&gt;" in line and "&amp;" in line
    assert parse_message(line) == msg


@pytest.mark.parametrize(
    "value,expected",
    [
        (3.14159, "3,14159"),
        (1500.0, "1500,0"),
        (0.5, "0,5"),
        (-2.25, "-2,25"),
        (0.000001, "0,000001"),
        (0.0, "0,0"),
    ],
)
def test_value_formatting(value, expected):
    line = serialize_message(_msg(value=value))
    assert f'value="{expected}"' in line


def test_value_accepts_both_separators():
    a = parse_message(serialize_message(_msg(value=3.14)))
    b = parse_message(serialize_message(_msg(value=3.14)).replace("3,14", "3.14"))
    assert a.value == b.value == 3.14


def test_separator_tolerance_for_timestamps():
    dotted = GOLDEN.replace("1330691458,821096", "1330691458.821096")
    assert parse_message(dotted).absolute == MicroTime(1330691458, 821096)


def test_equal_messages_serialize_identically():
    a = _msg(absolute=MicroTime(1, 500_000))
    b = _msg(absolute=MicroTime(0, 1_500_000))
    assert a == b
    assert serialize_message(a) == serialize_message(b)


def test_message_construction_invariants():
    with pytest.raises(ValueError):
        _msg(description="")
    with pytest.raises(ValueError):
        _msg(family="")
    with pytest.raises(ValueError):
        _msg(block=-2)
    with pytest.raises(ValueError):
        _msg(description="bad\x00char")


# -- round-trip property -------------------------------------------------


def _xml_text(min_size=0):
    return st.text(
        alphabet=st.characters(
            codec="utf-8",
            exclude_characters="".join(map(chr, range(0x00, 0x09)))
            + "\x0b\x0c"
            + "".join(map(chr, range(0x0E, 0x20)))
            + "￾￿",
        ),
        min_size=min_size,
        max_size=40,
    )


def _microtimes():
    return st.builds(MicroTime.from_micros, st.integers(0, 2**45))


def _microdurations():
    return st.builds(MicroDuration.from_micros, st.integers(0, 2**40))


messages = st.builds(
    TidMessage,
    version=st.builds(ProtocolVersion, *[st.integers(0, 99)] * 4),
    description=_xml_text(min_size=1),
    family=_xml_text(min_size=1),
    event=st.integers(-(2**63), 2**63 - 1),
    block=st.integers(-1, 2**53),
    absolute=st.none() | _microtimes(),
    relative=st.none() | _microdurations(),
    source=st.none() | _xml_text(),
    value=st.none() | st.integers(-(10**12), 10**12).map(lambda n: n / 10**6),
)


@settings(max_examples=300)
@given(messages)
def test_round_trip_identity(msg):
    assert parse_message(serialize_message(msg)) == msg


@settings(max_examples=100)
@given(messages)
def test_serialized_form_is_single_line(msg):
    line = serialize_message(msg)
    assert "\n" not in line and "\r" not in line
    assert line.startswith("<tid ") and line.endswith("/>")
