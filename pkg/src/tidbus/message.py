"""TiD event message model and its XML attribute codec.

Every event travels the bus as one single-line XML empty-element tag:

    <tid version="0.3.0.0" description="beep" block="1732" family="biosig"
         event="785" absolute="1330691458,821096" relative="34687,761248"
         source="P300 detector" value="3,14159"/>

Tag and attribute names are case sensitive and the payload is UTF-8.
Timestamps are second/microsecond pairs; decimal attributes accept both
"," and "." as separator on input and are emitted with "," so serialized
messages stay byte-compatible with existing tooling.  Serialization is
canonical: fixed attribute order, fixed zero padding, so equal messages
produce identical bytes.
"""

from __future__ import annotations

import re
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass

FAMILY_BIOSIG = "biosig"
FAMILY_CUSTOM = "custom"

__all__ = [
    "FAMILY_BIOSIG",
    "FAMILY_CUSTOM",
    "PROTOCOL_VERSION",
    "BadNumber",
    "BadVersionFormat",
    "MalformedXml",
    "MessageError",
    "MicroDuration",
    "MicroTime",
    "MissingMandatory",
    "ProtocolVersion",
    "TidMessage",
    "parse_message",
    "parse_microtime",
    "serialize_message",
    "versions_compatible",
]


class MessageError(ValueError):
    """Base class for message decoding failures (fatal for the connection)."""


class MalformedXml(MessageError):
    """Input is not a well-formed single ``<tid .../>`` element."""


class MissingMandatory(MessageError):
    """A mandatory attribute is absent (or present but empty)."""

    def __init__(self, name: str):
        super().__init__(f"mandatory attribute {name!r} is missing")
        self.name = name


class BadNumber(MessageError):
    """An attribute is present but not decodable as the expected number."""

    def __init__(self, name: str, text: str):
        super().__init__(f"attribute {name!r} has undecodable value {text!r}")
        self.name = name


class BadVersionFormat(MessageError):
    """Version attribute is not four dot-separated integers."""


_VERSION_RE = re.compile(r"^(\d+)\.(\d+)\.(\d+)\.(\d+)$")


@dataclass(frozen=True)
class ProtocolVersion:
    """Four-part protocol version, CURRENT.REVISION.MINOR.BUGFIX."""

    current: int
    revision: int
    minor: int
    bugfix: int

    def __post_init__(self):
        for part in (self.current, self.revision, self.minor, self.bugfix):
            if part < 0:
                raise ValueError(f"version parts must be non-negative, got {self}")

    @classmethod
    def parse(cls, text: str) -> ProtocolVersion:
        m = _VERSION_RE.match(text)
        if m is None:
            raise BadVersionFormat(f"expected four dot-separated integers, got {text!r}")
        return cls(*(int(g) for g in m.groups()))

    def __str__(self) -> str:
        return f"{self.current}.{self.revision}.{self.minor}.{self.bugfix}"


#: Version stamped on messages built by this library.
PROTOCOL_VERSION = ProtocolVersion(0, 3, 0, 0)


def versions_compatible(a: ProtocolVersion, b: ProtocolVersion) -> bool:
    """Two versions interoperate iff their CURRENT fields match.

    CURRENT only changes on heavy interface breaks; the lower fields
    (revision, minor, bugfix) preserve wire compatibility.
    """
    return a.current == b.current


_STAMP_RE = re.compile(r"^(-?)(\d+)[.,](\d+)$")


def _parse_stamp_micros(text: str, attr: str) -> int:
    """Decode ``<seconds><sep><fraction>`` into total microseconds."""
    m = _STAMP_RE.match(text)
    if m is None:
        raise BadNumber(attr, text)
    sign, seconds, frac = m.groups()
    if len(frac) > 6:
        raise BadNumber(attr, text)
    total = int(seconds) * 1_000_000 + int(frac.ljust(6, "0"))
    return -total if sign else total


@dataclass(frozen=True, order=True)
class MicroTime:
    """Wall-clock instant: integer seconds plus microseconds since the Unix epoch.

    Construction normalizes carry, so ``micros`` is always in [0, 999999]
    and the total value equals ``seconds * 10**6 + micros`` microseconds.
    """

    seconds: int = 0
    micros: int = 0

    def __post_init__(self):
        seconds, micros = divmod(self.seconds * 1_000_000 + self.micros, 1_000_000)
        object.__setattr__(self, "seconds", seconds)
        object.__setattr__(self, "micros", micros)

    @classmethod
    def now(cls) -> MicroTime:
        return cls(0, time.time_ns() // 1000)

    @classmethod
    def from_micros(cls, total: int) -> MicroTime:
        return cls(0, total)

    @classmethod
    def parse(cls, text: str, attr: str = "absolute") -> MicroTime:
        return cls(0, _parse_stamp_micros(text, attr))

    def total_micros(self) -> int:
        return self.seconds * 1_000_000 + self.micros

    def to_wire(self) -> str:
        return f"{self.seconds},{self.micros:06d}"


@dataclass(frozen=True, order=True)
class MicroDuration:
    """Non-negative elapsed time with microsecond resolution."""

    seconds: int = 0
    micros: int = 0

    def __post_init__(self):
        total = self.seconds * 1_000_000 + self.micros
        if total < 0:
            raise ValueError(f"duration cannot be negative, got {total} us")
        seconds, micros = divmod(total, 1_000_000)
        object.__setattr__(self, "seconds", seconds)
        object.__setattr__(self, "micros", micros)

    @classmethod
    def from_seconds(cls, seconds: float) -> MicroDuration:
        return cls(0, round(seconds * 1_000_000))

    @classmethod
    def from_micros(cls, total: int) -> MicroDuration:
        return cls(0, total)

    @classmethod
    def parse(cls, text: str, attr: str = "relative") -> MicroDuration:
        total = _parse_stamp_micros(text, attr)
        if total < 0:
            raise BadNumber(attr, text)
        return cls(0, total)

    def total_micros(self) -> int:
        return self.seconds * 1_000_000 + self.micros

    def to_wire(self) -> str:
        return f"{self.seconds},{self.micros:06d}"


def parse_microtime(text: str) -> MicroTime:
    """Decode a ``seconds,micros`` timestamp (also accepts "." as separator).

    A fraction shorter than six digits is read as a decimal fraction of a
    second, i.e. right-padded with zeros ("5,5" is 5 s 500000 us).  Use
    :meth:`MicroDuration.parse` for relative values, which additionally
    rejects negative input.
    """
    return MicroTime.parse(text, "timestamp")


# Characters XML 1.0 cannot carry at all (even escaped): most C0 controls,
# surrogates and the two BMP non-characters.
_XML_UNREPRESENTABLE = re.compile(
    "[\x00-\x08\x0b\x0c\x0e-\x1f\ud800-\udfff￾￿]"
)


@dataclass(frozen=True)
class TidMessage:
    """One event on the bus.

    ``block`` is the data block/sample index the event belongs to; -1 means
    unknown and the server fills it before dispatching.  ``absolute`` and
    ``relative`` are None when the sender left them for the server to stamp.
    ``source`` and ``value`` are optional payload.
    """

    version: ProtocolVersion
    description: str
    family: str
    event: int
    block: int = -1
    absolute: MicroTime | None = None
    relative: MicroDuration | None = None
    source: str | None = None
    value: float | None = None

    def __post_init__(self):
        if not self.description:
            raise ValueError("description must be non-empty")
        if not self.family:
            raise ValueError("family must be non-empty")
        if self.block < -1:
            raise ValueError(f"block must be -1 or >= 0, got {self.block}")
        for name in ("description", "family", "source"):
            text = getattr(self, name)
            if text and _XML_UNREPRESENTABLE.search(text):
                raise ValueError(f"{name} contains characters XML cannot represent")


def _require(attrs: dict[str, str], name: str) -> str:
    value = attrs.get(name)
    if not value:
        raise MissingMandatory(name)
    return value


_INT_RE = re.compile(r"^-?\d+$")
_DECIMAL_RE = re.compile(r"^-?\d+([.,]\d+)?$")


def _parse_int(text: str, attr: str) -> int:
    if _INT_RE.match(text) is None:
        raise BadNumber(attr, text)
    return int(text)


def _parse_decimal(text: str, attr: str) -> float:
    if _DECIMAL_RE.match(text) is None:
        raise BadNumber(attr, text)
    return float(text.replace(",", ".", 1))


def parse_message(raw: str) -> TidMessage:
    """Decode one serialized ``<tid .../>`` message.

    Unknown attributes are ignored.  A missing ``block`` decodes to -1;
    missing ``absolute``/``relative`` decode to None so the server can fill
    them; missing ``source``/``value`` stay absent.
    """
    if not raw.lstrip().startswith("<tid"):
        raise MalformedXml("message must be a single <tid .../> element")
    try:
        root = ET.fromstring(raw)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from exc
    if root.tag != "tid":
        raise MalformedXml(f"expected a <tid .../> element, got <{root.tag}>")
    if len(root) or (root.text and root.text.strip()):
        raise MalformedXml("<tid .../> must be a single empty element")

    attrs = root.attrib
    version = ProtocolVersion.parse(_require(attrs, "version"))
    description = _require(attrs, "description")
    family = _require(attrs, "family")
    event = _parse_int(_require(attrs, "event"), "event")

    block_text = attrs.get("block")
    block = -1 if block_text is None else _parse_int(block_text, "block")
    if block < -1:
        raise BadNumber("block", block_text)

    absolute_text = attrs.get("absolute")
    absolute = None if absolute_text is None else MicroTime.parse(absolute_text, "absolute")
    relative_text = attrs.get("relative")
    relative = None if relative_text is None else MicroDuration.parse(relative_text, "relative")

    value_text = attrs.get("value")
    value = None if value_text is None else _parse_decimal(value_text, "value")

    return TidMessage(
        version=version,
        description=description,
        family=family,
        event=event,
        block=block,
        absolute=absolute,
        relative=relative,
        source=attrs.get("source"),
        value=value,
    )


# '&' must be rewritten first; tab/LF/CR become character references so
# attribute values survive XML whitespace normalization and the one-line
# framing stays intact.
_ESCAPES = (
    ("&", "&amp;"),
    ("<", "&lt;"),
    (">", "&gt;"),
    ('"', "&quot;"),
    ("\t", "&#9;"),
    ("\n", "&#10;"),
    ("\r", "&#13;"),
)


def _escape(text: str) -> str:
    for char, ref in _ESCAPES:
        if char in text:
            text = text.replace(char, ref)
    return text


def _format_value(value: float) -> str:
    # Up to six fractional digits, trailing zeros trimmed down to one.
    text = f"{value:.6f}".rstrip("0")
    if text.endswith("."):
        text += "0"
    return text.replace(".", ",")


def serialize_message(msg: TidMessage) -> str:
    """Emit the canonical single-line form of a message.

    Attribute order is fixed (version, description, block, family, event,
    absolute, relative, source, value); unset timestamps and absent
    optionals are omitted.  The output never contains a newline.
    """
    parts = [
        f'version="{msg.version}"',
        f'description="{_escape(msg.description)}"',
        f'block="{msg.block}"',
        f'family="{_escape(msg.family)}"',
        f'event="{msg.event}"',
    ]
    if msg.absolute is not None:
        parts.append(f'absolute="{msg.absolute.to_wire()}"')
    if msg.relative is not None:
        parts.append(f'relative="{msg.relative.to_wire()}"')
    if msg.source is not None:
        parts.append(f'source="{_escape(msg.source)}"')
    if msg.value is not None:
        parts.append(f'value="{_format_value(msg.value)}"')
    return "<tid " + " ".join(parts) + "/>"
