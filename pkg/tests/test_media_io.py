"""FSEQ container, PGM reader, and annotation CSV tests."""

from __future__ import annotations

import struct

import numpy as np
import pytest

from zstripe.errors import (
    GeometryMismatch,
    InvalidHeader,
    MagicMismatch,
    MissingIndex,
    ParseError,
    TruncatedPayload,
    UnsupportedPgm,
)
from zstripe.media_io import (
    FlowSequence,
    FrameSequence,
    SaliencySequence,
    read_annotations,
    read_fseq,
    read_pgm_sequence,
    write_annotations,
    write_fseq,
)


def test_u8_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(1)
    raw = rng.integers(0, 256, size=(3, 2, 2), dtype=np.uint8)
    seq = FrameSequence(2, 2, raw.astype(np.float32) / 255.0)
    path = tmp_path / "seq.fsq"
    write_fseq(seq, path, channel_type=0)
    back = read_fseq(path)
    assert isinstance(back, FrameSequence)
    assert back.frames.shape == (3, 2, 2)
    np.testing.assert_array_equal(back.frames, seq.frames)


def test_f32_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(2)
    vals = rng.random((4, 3, 5)).astype(np.float32)
    seq = SaliencySequence(5, 3, vals)
    path = tmp_path / "sal.fsq"
    write_fseq(seq, path)
    back = read_fseq(path)
    assert isinstance(back, SaliencySequence)
    assert back.frames.tobytes() == vals.tobytes()


def test_flow_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    fields = rng.normal(0, 2, size=(2, 4, 4, 2)).astype(np.float32)
    seq = FlowSequence(4, 4, fields)
    path = tmp_path / "flow.fsq"
    write_fseq(seq, path)
    back = read_fseq(path)
    assert isinstance(back, FlowSequence)
    assert back.fields.tobytes() == fields.tobytes()


def test_single_f32_pixel_golden_bytes(tmp_path):
    # 24-byte header then the IEEE-754 little-endian payload 00 00 00 3F.
    seq = SaliencySequence(1, 1, np.array([[[0.5]]], dtype=np.float32))
    path = tmp_path / "one.fsq"
    write_fseq(seq, path, channel_type=1)
    raw = path.read_bytes()
    assert len(raw) == 24 + 4
    assert raw[:4] == b"FSQ1"
    assert struct.unpack_from("<IIII", raw, 4) == (1, 1, 1, 1)
    assert raw[24:] == bytes.fromhex("0000003f")


def test_flow_pair_golden_bytes(tmp_path):
    fields = np.array([[[[1.0, -1.0]]]], dtype=np.float32)
    seq = FlowSequence(1, 1, fields)
    path = tmp_path / "pair.fsq"
    write_fseq(seq, path)
    raw = path.read_bytes()
    assert raw[24:] == bytes.fromhex("0000803f") + bytes.fromhex("000080bf")


def test_empty_sequence_valid(tmp_path):
    seq = FrameSequence(8, 6, np.zeros((0, 6, 8), dtype=np.float32))
    path = tmp_path / "empty.fsq"
    write_fseq(seq, path)
    back = read_fseq(path)
    assert len(back) == 0
    assert (back.width, back.height) == (8, 6)


def test_magic_mismatch(tmp_path):
    path = tmp_path / "bad.fsq"
    path.write_bytes(b"XXXX" + b"\x00" * 32)
    with pytest.raises(MagicMismatch):
        read_fseq(path)


def test_truncated_payload(tmp_path):
    # header declares 10 frames, payload holds 9
    header = struct.pack("<4sIIIIf", b"FSQ1", 2, 2, 10, 0, 10.0)
    path = tmp_path / "trunc.fsq"
    path.write_bytes(header + b"\x00" * (9 * 4))
    with pytest.raises(TruncatedPayload):
        read_fseq(path)


def test_invalid_header_zero_geometry(tmp_path):
    header = struct.pack("<4sIIIIf", b"FSQ1", 0, 2, 1, 0, 10.0)
    path = tmp_path / "zero.fsq"
    path.write_bytes(header)
    with pytest.raises(InvalidHeader):
        read_fseq(path)


def test_unknown_channel_type(tmp_path):
    header = struct.pack("<4sIIIIf", b"FSQ1", 1, 1, 0, 7, 10.0)
    path = tmp_path / "chan.fsq"
    path.write_bytes(header)
    with pytest.raises(InvalidHeader):
        read_fseq(path)


def test_frame_rate_round_trip(tmp_path):
    seq = FrameSequence(2, 2, np.zeros((1, 2, 2), dtype=np.float32), frame_rate=25.0)
    path = tmp_path / "rate.fsq"
    write_fseq(seq, path)
    assert read_fseq(path).frame_rate == 25.0


def _write_pgm(path, img, magic=b"P5", maxval=255):
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n%d\n" % (w, h, maxval))
        fh.write(img.astype(np.uint8).tobytes())


def test_pgm_sequence_reads_in_order(tmp_path):
    a = np.full((2, 3), 10, dtype=np.uint8)
    b = np.full((2, 3), 200, dtype=np.uint8)
    _write_pgm(tmp_path / "frame_000000.pgm", a)
    _write_pgm(tmp_path / "frame_000001.pgm", b)
    seq = read_pgm_sequence(tmp_path)
    assert len(seq) == 2
    np.testing.assert_allclose(seq.frames[0], 10 / 255, atol=1e-7)
    np.testing.assert_allclose(seq.frames[1], 200 / 255, atol=1e-7)


def test_pgm_gap_raises(tmp_path):
    img = np.zeros((2, 2), dtype=np.uint8)
    _write_pgm(tmp_path / "frame_000000.pgm", img)
    _write_pgm(tmp_path / "frame_000002.pgm", img)
    with pytest.raises(MissingIndex):
        read_pgm_sequence(tmp_path)


def test_pgm_wrong_maxval(tmp_path):
    img = np.zeros((2, 2), dtype=np.uint8)
    _write_pgm(tmp_path / "frame_000000.pgm", img, maxval=65535)
    with pytest.raises(UnsupportedPgm):
        read_pgm_sequence(tmp_path)


def test_pgm_ascii_p2(tmp_path):
    (tmp_path / "frame_000000.pgm").write_bytes(b"P2\n2 2\n255\n0 0 0 0\n")
    with pytest.raises(UnsupportedPgm):
        read_pgm_sequence(tmp_path)


def test_pgm_geometry_mismatch(tmp_path):
    _write_pgm(tmp_path / "frame_000000.pgm", np.zeros((2, 2), dtype=np.uint8))
    _write_pgm(tmp_path / "frame_000001.pgm", np.zeros((3, 2), dtype=np.uint8))
    with pytest.raises(GeometryMismatch):
        read_pgm_sequence(tmp_path)


def test_annotations_round_trip(tmp_path):
    path = tmp_path / "ann.csv"
    path.write_text(
        "scenario_id,start_frame,end_frame,label\n"
        "s1,10,50,crossing_lr\n"
        "s2,-1,-1,none\n"
    )
    events = read_annotations(path)
    assert len(events) == 2
    assert events[0].start_frame == 10 and events[0].end_frame == 50
    assert events[0].is_positive
    assert not events[1].is_positive
    out = tmp_path / "out.csv"
    write_annotations(events, out)
    assert read_annotations(out) == events


def test_annotations_start_after_end(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "scenario_id,start_frame,end_frame,label\ns3,50,10,crossing_rl\n"
    )
    with pytest.raises(ParseError, match="row 2"):
        read_annotations(path)


def test_annotations_bad_header(tmp_path):
    path = tmp_path / "hdr.csv"
    path.write_text("a,b,c,d\ns1,0,1,none\n")
    with pytest.raises(ParseError):
        read_annotations(path)


def test_annotations_duplicate_scenario(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text(
        "scenario_id,start_frame,end_frame,label\n"
        "s1,1,2,crossing_lr\ns1,3,4,crossing_lr\n"
    )
    with pytest.raises(ParseError, match="duplicate"):
        read_annotations(path)


def test_intensity_out_of_range_rejected():
    with pytest.raises(ValueError):
        FrameSequence(2, 2, np.full((1, 2, 2), 1.5, dtype=np.float32))
