import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cardioseq.seqio import (
    LabelMap,
    SegSequence,
    SequenceFormatError,
    SequenceManifest,
    is_sequence_dir,
    load_sequence,
    read_latent_table,
    read_series_table,
    save_sequence,
    write_latent_table,
    write_series_table,
)


def make_sequence(stack, spacing=(0.7, 0.7), patient="p001", period=None):
    T, H, W = stack.shape
    manifest = SequenceManifest(
        patient_id=patient,
        frame_files=tuple(f"frames/frame_{t:04d}.pgm" for t in range(T)),
        width=W,
        height=H,
        spacing_mm=spacing,
        frame_period_s=period,
    )
    frames = [LabelMap(stack[t], spacing) for t in range(T)]
    return SegSequence(manifest=manifest, frames=frames)


def test_save_load_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    stack = rng.integers(0, 3, size=(5, 12, 10)).astype(np.uint8)
    seq = make_sequence(stack, spacing=(0.5, 1.25), period=0.033)
    save_sequence(seq, tmp_path / "seq")
    back = load_sequence(tmp_path / "seq")
    assert len(back) == 5
    for t in range(5):
        assert np.array_equal(back.frames[t].labels, stack[t])
    assert back.manifest.patient_id == "p001"
    assert back.manifest.spacing_mm == (0.5, 1.25)
    assert back.manifest.frame_period_s == 0.033


def test_is_sequence_dir(tmp_path):
    stack = np.zeros((3, 4, 4), dtype=np.uint8)
    stack[:, 1, 1] = 1
    save_sequence(make_sequence(stack), tmp_path / "seq")
    assert is_sequence_dir(tmp_path / "seq")
    assert not is_sequence_dir(tmp_path)
    assert not is_sequence_dir(tmp_path / "absent")


def test_label_map_rejects_bad_values():
    with pytest.raises(SequenceFormatError):
        LabelMap(np.full((4, 4), 3, dtype=np.uint8), (1.0, 1.0))
    with pytest.raises(SequenceFormatError):
        LabelMap(np.array([[0.5, 0.0]]), (1.0, 1.0))
    with pytest.raises(SequenceFormatError):
        LabelMap(np.zeros(4, dtype=np.uint8), (1.0, 1.0))
    with pytest.raises(SequenceFormatError):
        LabelMap(np.zeros((4, 4), dtype=np.uint8), (0.0, 1.0))


def test_label_map_accepts_int_array():
    lm = LabelMap(np.array([[0, 1], [2, 0]]), (1.0, 1.0))
    assert lm.labels.dtype == np.uint8
    assert (lm.height, lm.width) == (2, 2)


def test_sequence_frame_count_must_match_manifest():
    stack = np.zeros((3, 4, 4), dtype=np.uint8)
    seq = make_sequence(stack)
    with pytest.raises(SequenceFormatError):
        SegSequence(manifest=seq.manifest, frames=seq.frames[:2])


def test_sequence_frame_shape_must_match_manifest():
    stack = np.zeros((2, 4, 4), dtype=np.uint8)
    seq = make_sequence(stack)
    bad = [LabelMap(np.zeros((4, 5), dtype=np.uint8), (0.7, 0.7)) for _ in range(2)]
    with pytest.raises(SequenceFormatError):
        SegSequence(manifest=seq.manifest, frames=bad)


def test_load_missing_manifest(tmp_path):
    with pytest.raises(SequenceFormatError, match="manifest"):
        load_sequence(tmp_path)


def test_load_missing_frame_file(tmp_path):
    stack = np.zeros((3, 4, 4), dtype=np.uint8)
    save_sequence(make_sequence(stack), tmp_path / "seq")
    (tmp_path / "seq" / "frames" / "frame_0001.pgm").unlink()
    with pytest.raises(SequenceFormatError, match="missing frame"):
        load_sequence(tmp_path / "seq")


def test_load_rejects_labels_above_two(tmp_path):
    stack = np.zeros((2, 4, 4), dtype=np.uint8)
    save_sequence(make_sequence(stack), tmp_path / "seq")
    frame = tmp_path / "seq" / "frames" / "frame_0000.pgm"
    blob = bytearray(frame.read_bytes())
    blob[-1] = 7
    frame.write_bytes(bytes(blob))
    with pytest.raises(SequenceFormatError, match="labels outside"):
        load_sequence(tmp_path / "seq")


def test_load_rejects_truncated_pgm(tmp_path):
    stack = np.zeros((2, 4, 4), dtype=np.uint8)
    save_sequence(make_sequence(stack), tmp_path / "seq")
    frame = tmp_path / "seq" / "frames" / "frame_0000.pgm"
    frame.write_bytes(frame.read_bytes()[:-3])
    with pytest.raises(SequenceFormatError, match="payload"):
        load_sequence(tmp_path / "seq")


def test_load_rejects_geometry_mismatch(tmp_path):
    stack = np.zeros((2, 4, 4), dtype=np.uint8)
    save_sequence(make_sequence(stack), tmp_path / "seq")
    man = tmp_path / "seq" / "manifest.json"
    d = json.loads(man.read_text())
    d["width"] = 9
    man.write_text(json.dumps(d))
    with pytest.raises(SequenceFormatError):
        load_sequence(tmp_path / "seq")


def test_save_into_file_parent_fails(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("x")
    stack = np.zeros((2, 4, 4), dtype=np.uint8)
    with pytest.raises(SequenceFormatError):
        save_sequence(make_sequence(stack), blocker / "seq")


label_stacks = arrays(
    dtype=np.uint8,
    shape=st.tuples(
        st.integers(1, 4), st.integers(1, 9), st.integers(1, 9)
    ),
    elements=st.integers(0, 2),
)


@settings(max_examples=25, deadline=None)
@given(stack=label_stacks)
def test_pgm_round_trip_property(tmp_path_factory, stack):
    out = tmp_path_factory.mktemp("pgm")
    seq = make_sequence(stack)
    save_sequence(seq, out / "seq")
    back = load_sequence(out / "seq")
    assert np.array_equal(
        np.stack([fr.labels for fr in back.frames]), stack
    )


# --- CSV tables -------------------------------------------------------------


def test_series_table_round_trip_exact(tmp_path):
    rng = np.random.default_rng(1)
    values = rng.normal(scale=100.0, size=(6, 7))
    write_series_table(tmp_path / "attributes.csv", values)
    back = read_series_table(tmp_path / "attributes.csv")
    # repr round trip must be lossless, not merely close
    assert np.array_equal(back, values)


def test_latent_table_round_trip_exact(tmp_path):
    rng = np.random.default_rng(2)
    values = rng.normal(size=(4, 16))
    write_latent_table(tmp_path / "latent.csv", values)
    assert np.array_equal(read_latent_table(tmp_path / "latent.csv"), values)


def test_series_table_rejects_wrong_width(tmp_path):
    with pytest.raises(SequenceFormatError):
        write_series_table(tmp_path / "a.csv", np.zeros((3, 6)))
    with pytest.raises(SequenceFormatError):
        write_latent_table(tmp_path / "z.csv", np.zeros((3, 7)))


def test_series_table_rejects_nan(tmp_path):
    values = np.zeros((3, 7))
    values[1, 2] = np.nan
    with pytest.raises(SequenceFormatError, match="non-finite"):
        write_series_table(tmp_path / "a.csv", values)


def test_series_table_rejects_bad_header(tmp_path):
    write_series_table(tmp_path / "a.csv", np.ones((2, 7)))
    text = (tmp_path / "a.csv").read_text().splitlines()
    text[0] = text[0].replace("lv_area", "lv_areaX")
    (tmp_path / "a.csv").write_text("\n".join(text) + "\n")
    with pytest.raises(SequenceFormatError, match="header"):
        read_series_table(tmp_path / "a.csv")


def test_series_table_rejects_reordered_rows(tmp_path):
    write_series_table(tmp_path / "a.csv", np.ones((3, 7)))
    lines = (tmp_path / "a.csv").read_text().splitlines()
    lines[1], lines[2] = lines[2], lines[1]
    (tmp_path / "a.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(SequenceFormatError, match="out of order"):
        read_series_table(tmp_path / "a.csv")


def test_read_series_table_missing_file(tmp_path):
    with pytest.raises(SequenceFormatError, match="missing table"):
        read_series_table(tmp_path / "nope.csv")
