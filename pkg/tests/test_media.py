import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image

from slomokit.errors import (
    DecoderConfigError,
    DecoderRunError,
    DimensionMismatchError,
    EmptySequenceError,
    MissingFrameError,
    TruncationError,
    UnsupportedFormatError,
    Y4mParseError,
)
from slomokit.media import (
    Frame,
    FrameSequence,
    Y4mHeader,
    decode_external,
    emit_y4m,
    parse_y4m,
    parse_y4m_header,
    read_frame_dir,
    rgb_to_yuv,
    write_frame_dir,
    yuv_to_rgb,
)

from conftest import noise_frame


def make_seq(rng, n=2, w=32, h=24, fps=Fraction(30, 1)):
    return FrameSequence(
        tuple(noise_frame(rng, w, h) for _ in range(n)), fps
    )


# --- structural parsing ------------------------------------------------------

def test_parse_two_frame_444_stream(rng):
    seq = make_seq(rng, n=2, w=2, h=2)
    parsed = parse_y4m(emit_y4m(seq, "444"))
    assert len(parsed) == 2
    assert parsed.width == 2 and parsed.height == 2
    assert parsed.fps == Fraction(30, 1)


def test_header_round_trip():
    h = Y4mHeader(64, 48, Fraction(30000, 1001), "t", (4, 3), "420jpeg",
                  ("XYSCSS=420JPEG",))
    parsed, _ = parse_y4m_header(h.emit() + b"junk")
    assert parsed == h


def test_emit_parse_byte_identical_420(rng):
    seq = make_seq(rng, n=3, w=16, h=16)
    stream = emit_y4m(seq, "420jpeg")
    assert emit_y4m(parse_y4m(stream), "420jpeg") == stream


def test_emit_parse_byte_identical_444(rng):
    seq = make_seq(rng, n=3, w=15, h=9)
    stream = emit_y4m(seq, "444")
    assert emit_y4m(parse_y4m(stream), "444") == stream


def test_444_rgb_round_trip_within_one(rng):
    seq = make_seq(rng, n=1, w=40, h=40)
    parsed = parse_y4m(emit_y4m(seq, "444"))
    dev = np.abs(parsed[0].pixels.astype(int) - seq[0].pixels.astype(int))
    assert dev.max() <= 1


def test_uniform_black_420_stream():
    # luma 16, chroma 128 in limited range is black
    header = Y4mHeader(4, 4, Fraction(30, 1), chroma="420jpeg")
    payload = bytes([16] * 16) + bytes([128] * 4) + bytes([128] * 4)
    stream = header.emit() + b"FRAME\n" + payload
    parsed = parse_y4m(stream)
    assert np.all(parsed[0].pixels == 0)


def test_emitted_header_fps(rng):
    seq = make_seq(rng, n=1, fps=Fraction(24000, 1001))
    assert b"F24000:1001" in emit_y4m(seq, "444").split(b"\n", 1)[0]


def test_single_frame_one_marker(rng):
    stream = emit_y4m(make_seq(rng, n=1), "444")
    assert stream.count(b"FRAME\n") == 1


def test_bad_signature_reports_offset():
    with pytest.raises(Y4mParseError) as exc:
        parse_y4m(b"YUVX4MPEG2 W2 H2 F30:1\nFRAME\n" + bytes(12))
    assert exc.value.offset == 0


def test_truncated_payload_reports_byte_counts(rng):
    stream = emit_y4m(make_seq(rng, n=1, w=4, h=4), "444")
    with pytest.raises(TruncationError) as exc:
        parse_y4m(stream[:-5])
    assert exc.value.expected == 4 * 4 * 3
    assert exc.value.actual == 4 * 4 * 3 - 5


def test_unsupported_chroma_tag():
    with pytest.raises(UnsupportedFormatError):
        parse_y4m(b"YUV4MPEG2 W2 H2 F30:1 C422\nFRAME\n" + bytes(8))


def test_emit_empty_sequence_rejected():
    with pytest.raises((EmptySequenceError, Exception)):
        emit_y4m(FrameSequence((), Fraction(30, 1)), "444")


@settings(max_examples=40, deadline=None)
@given(
    w=st.integers(1, 12), h=st.integers(1, 12), n=st.integers(1, 4),
    num=st.integers(1, 60), den=st.integers(1, 4),
)
def test_frame_count_equals_marker_count_fuzz(w, h, n, num, den):
    rng = np.random.default_rng(w * 1000 + h * 100 + n)
    seq = FrameSequence(
        tuple(noise_frame(rng, w, h) for _ in range(n)), Fraction(num, den)
    )
    stream = emit_y4m(seq, "444")
    parsed = parse_y4m(stream)
    assert len(parsed) == stream.count(b"FRAME\n") == n
    assert parsed.fps == Fraction(num, den)


# --- color conversion --------------------------------------------------------

def test_limited_range_white():
    f = yuv_to_rgb(np.full((2, 2), 235), np.full((2, 2), 128), np.full((2, 2), 128))
    assert np.all(f.pixels == 255)


def test_limited_range_black():
    f = yuv_to_rgb(np.full((2, 2), 16), np.full((2, 2), 128), np.full((2, 2), 128))
    assert np.all(f.pixels == 0)


def test_full_range_neutral_gray():
    f = yuv_to_rgb(np.full((2, 2), 128), np.full((2, 2), 128),
                   np.full((2, 2), 128), value_range="full")
    assert np.all(f.pixels == 128)


def test_plane_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        yuv_to_rgb(np.zeros((4, 4)), np.zeros((2, 2)), np.zeros((4, 4)))


@pytest.mark.parametrize("value_range", ["limited", "full"])
def test_round_trip_all_grays(value_range):
    grays = np.arange(256, dtype=np.uint8)
    frame = Frame(np.stack([grays] * 3, axis=-1).reshape(16, 16, 3))
    y, cb, cr = rgb_to_yuv(frame, value_range)
    back = yuv_to_rgb(y, cb, cr, value_range)
    assert np.abs(back.pixels.astype(int) - frame.pixels.astype(int)).max() <= 1


def test_round_trip_color_sample_within_one():
    # deterministic sample of >= 1e5 colors
    rng = np.random.default_rng(123)
    px = rng.integers(0, 256, size=(320, 320, 3), dtype=np.uint8)  # 102400 colors
    frame = Frame(px)
    y, cb, cr = rgb_to_yuv(frame)
    back = yuv_to_rgb(y, cb, cr)
    assert np.abs(back.pixels.astype(int) - px.astype(int)).max() <= 1


# --- frame directories -------------------------------------------------------

def write_pngs(path, count, w=8, h=6, skip=()):
    rng = np.random.default_rng(7)
    for i in range(1, count + 1):
        if i in skip:
            continue
        arr = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        Image.fromarray(arr).save(path / f"{i:06d}.png")


def test_frame_dir_round_trip(tmp_path, rng):
    seq = make_seq(rng, n=9, w=8, h=6)
    write_frame_dir(seq, tmp_path)
    loaded = read_frame_dir(tmp_path)
    assert len(loaded) == 9
    assert all(a == b for a, b in zip(loaded.frames, seq.frames))
    assert loaded.fps == seq.fps


def test_frame_dir_gap_reports_index(tmp_path):
    write_pngs(tmp_path, 3, skip=(2,))
    with pytest.raises(MissingFrameError) as exc:
        read_frame_dir(tmp_path, {"count": 3})
    assert exc.value.index == 2


def test_frame_dir_without_manifest_detects_gap(tmp_path):
    write_pngs(tmp_path, 3, skip=(2,))
    with pytest.raises(MissingFrameError):
        read_frame_dir(tmp_path)


def test_empty_frame_dir(tmp_path):
    with pytest.raises(EmptySequenceError):
        read_frame_dir(tmp_path)


def test_frame_dir_dimension_mismatch(tmp_path):
    write_pngs(tmp_path, 2)
    Image.fromarray(np.zeros((9, 9, 3), dtype=np.uint8)).save(
        tmp_path / f"{3:06d}.png"
    )
    with pytest.raises(DimensionMismatchError):
        read_frame_dir(tmp_path, {"count": 3})


def test_manifest_fps(tmp_path, rng):
    seq = make_seq(rng, n=2, fps=Fraction(60, 1))
    write_frame_dir(seq, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["fps_num"] == 60 and manifest["count"] == 2


# --- external decoder --------------------------------------------------------

def test_decode_external_pipes_through_child(tmp_path, rng):
    stream = emit_y4m(make_seq(rng, n=2, w=4, h=4), "444")
    fake_mp4 = tmp_path / "clip.mp4"
    fake_mp4.write_bytes(stream)
    seq = decode_external(fake_mp4, "cat {input}")
    assert len(seq) == 2


def test_decode_external_unconfigured(tmp_path):
    (tmp_path / "clip.mp4").write_bytes(b"x")
    with pytest.raises(DecoderConfigError):
        decode_external(tmp_path / "clip.mp4", None)


def test_decode_external_y4m_bypasses_child(tmp_path, rng):
    stream = emit_y4m(make_seq(rng, n=2, w=4, h=4), "444")
    y4m = tmp_path / "clip.y4m"
    y4m.write_bytes(stream)
    # a decoder that would fail is never invoked for Y4M input
    seq = decode_external(y4m, "/nonexistent/decoder {input}")
    assert len(seq) == 2


def test_decode_external_child_failure(tmp_path):
    (tmp_path / "clip.mp4").write_bytes(b"x")
    with pytest.raises(DecoderRunError):
        decode_external(tmp_path / "clip.mp4", "ls {input}.does-not-exist")


def test_decode_external_missing_executable(tmp_path):
    (tmp_path / "clip.mp4").write_bytes(b"x")
    with pytest.raises(DecoderConfigError):
        decode_external(tmp_path / "clip.mp4", "/nonexistent/decoder {input}")
