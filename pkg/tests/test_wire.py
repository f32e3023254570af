import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tidbus.wire import (
    ContainsNewline,
    FrameDecoder,
    FrameTooLarge,
    InvalidUtf8,
    encode_frame,
)


def test_encode_frame_appends_lf():
    assert encode_frame("<tid a/>") == b"<tid a/>\n"


def test_encode_frame_rejects_newline():
    with pytest.raises(ContainsNewline):
        encode_frame("two\nlines")


def test_encode_frame_empty_string_is_lone_terminator():
    # Degenerate but well defined; upstream never produces it.
    assert encode_frame("") == b"\n"


def test_encode_decode_duality():
    decoder = FrameDecoder()
    assert decoder.feed(encode_frame("<tid x/>")) == ["<tid x/>"]


def test_reassembly_across_chunks():
    decoder = FrameDecoder()
    assert decoder.feed(b"<tid a") == []
    assert decoder.pending == 6
    assert decoder.feed(b"/>\n") == ["<tid a/>"]
    assert decoder.pending == 0


def test_two_frames_in_one_chunk():
    decoder = FrameDecoder()
    assert decoder.feed(b"A\nB\n") == ["A", "B"]


def test_empty_chunk_is_noop():
    decoder = FrameDecoder()
    assert decoder.feed(b"") == []


def test_multibyte_utf8_split_across_chunks():
    payload = "héllo→".encode()
    decoder = FrameDecoder()
    assert decoder.feed(payload[:3]) == []
    assert decoder.feed(payload[3:] + b"\n") == ["héllo→"]


def test_frame_too_large_without_terminator():
    decoder = FrameDecoder()
    with pytest.raises(FrameTooLarge):
        decoder.feed(b"x" * 65537)


def test_exactly_max_bytes_still_buffers():
    decoder = FrameDecoder()
    assert decoder.feed(b"x" * 65536) == []
    assert decoder.feed(b"\n") == ["x" * 65536]


def test_oversize_terminated_frame_rejected():
    decoder = FrameDecoder(max_frame_bytes=8)
    with pytest.raises(FrameTooLarge):
        decoder.feed(b"123456789\n")


def test_invalid_utf8_frame_rejected():
    decoder = FrameDecoder()
    with pytest.raises(InvalidUtf8):
        decoder.feed(b"\xff\xfe\n")


def test_max_frame_bytes_must_be_positive():
    with pytest.raises(ValueError):
        FrameDecoder(max_frame_bytes=0)


frame_texts = st.lists(
    st.text(
        alphabet=st.characters(codec="utf-8", exclude_characters="\n"),
        max_size=64,
    ),
    max_size=20,
)


@settings(max_examples=200)
@given(frame_texts, st.data())
def test_chunking_invariance(frames, data):
    stream = b"".join(encode_frame(f) for f in frames)
    decoder = FrameDecoder()
    received = []
    position = 0
    while position < len(stream):
        step = data.draw(st.integers(1, len(stream) - position))
        received.extend(decoder.feed(stream[position : position + step]))
        position += step
    assert received == frames
    assert decoder.pending == 0
