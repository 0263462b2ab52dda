import os

import cv2
import numpy as np
import pytest

from ttrnn.data import (
    MANIFEST,
    MOTIONS,
    SequenceDataset,
    SequenceRecord,
    flatten_frames,
    generate_synthetic,
    ingest_frames,
    normalize_frames,
    read_dataset,
    read_manifest,
    shuffle_frames,
    write_dataset,
)
from ttrnn.errors import ArgumentError, FormatError
from ttrnn.tensor import reshape


def assert_same_dataset(a, b):
    assert a.class_names == b.class_names
    assert a.label_mode == b.label_mode
    assert len(a) == len(b)
    for x, y in zip(a.records, b.records):
        assert x.frames.tobytes() == y.frames.tobytes()
        if isinstance(x.label, int):
            assert x.label == y.label
        else:
            np.testing.assert_array_equal(x.label, y.label)


def multi_label_dataset(rng):
    records = [
        SequenceRecord(rng.uniform(0, 1, size=(int(t), 3, 2, 1)), rng.integers(0, 2, size=5))
        for t in rng.integers(1, 6, size=7)
    ]
    return SequenceDataset(records, ["a", "b", "c", "d", "e"], "multi")


class TestSynthetic:
    def test_deterministic(self):
        a = generate_synthetic(3, (4, 8), 10, 12, 2, seed=7)
        b = generate_synthetic(3, (4, 8), 10, 12, 2, seed=7)
        assert_same_dataset(a, b)
        c = generate_synthetic(3, (4, 8), 10, 12, 2, seed=8)
        assert any(x.frames.shape != y.frames.shape or not np.array_equal(x.frames, y.frames)
                   for x, y in zip(a.records, c.records))

    def test_shape_and_range(self):
        ds = generate_synthetic(5, (6, 9), 8, 8, 3, seed=1)
        assert len(ds) == 20 and ds.n_classes == 4
        assert ds.frame_shape == (8, 8, 3)
        assert sorted(np.bincount(ds.labels())) == [5, 5, 5, 5]
        for rec in ds.records:
            assert 6 <= rec.length <= 9
            assert rec.frames.min() >= 0.0 and rec.frames.max() <= 1.0

    def test_noise_free_square_moves(self):
        ds = generate_synthetic(4, (5, 7), 12, 10, 1, noise_std=0.0, seed=2, square=3)
        for rec in ds.records:
            dy, dx = MOTIONS[rec.label]
            first = rec.frames[0]
            assert np.count_nonzero(first) == 9
            assert set(np.unique(rec.frames)) == {0.0, 1.0}
            assert all(np.count_nonzero(frame) == 9 for frame in rec.frames)
            for t in range(1, rec.length):
                np.testing.assert_array_equal(rec.frames[t], np.roll(first, (dy * t, dx * t), axis=(0, 1)))

    @pytest.mark.parametrize("kwargs", [
        {"height": 6},
        {"t_range": (2, 8)},
        {"t_range": (10, 8)},
        {"t_range": (8, 65)},
        {"square": 16},
        {"seed": -1},
    ])
    def test_invalid_arguments(self, kwargs):
        with pytest.raises(ArgumentError):
            generate_synthetic(1, **{"t_range": (4, 8), "height": 16, "width": 16, **kwargs})

    def test_shuffled_frames_keep_content(self):
        ds = generate_synthetic(2, (6, 6), 8, 8, 1, seed=4)
        shuffled = shuffle_frames(ds, seed=1)
        for a, b in zip(ds.records, shuffled.records):
            assert a.label == b.label
            np.testing.assert_array_equal(np.sort(a.frames, axis=0), np.sort(b.frames, axis=0))


class TestRecords:
    def test_rejects_out_of_range_values(self):
        with pytest.raises(ArgumentError):
            SequenceRecord(np.full((1, 2, 2, 1), 1.5), 0)
        with pytest.raises(ArgumentError):
            SequenceRecord(np.zeros((0, 2, 2, 1)), 0)

    def test_dataset_checks_labels(self):
        rec = SequenceRecord(np.zeros((1, 2, 2, 1)), 3)
        with pytest.raises(ArgumentError):
            SequenceDataset([rec], ["a", "b"], "single")

    def test_dataset_checks_frame_shapes(self):
        recs = [SequenceRecord(np.zeros((1, 2, 2, 1)), 0), SequenceRecord(np.zeros((1, 2, 3, 1)), 0)]
        with pytest.raises(ArgumentError):
            SequenceDataset(recs, ["a", "b"])


class TestFrames:
    def test_normalize(self):
        out = normalize_frames(np.array([0, 128, 255], dtype=np.uint8))
        assert out[0] == 0.0 and out[2] == 1.0
        assert out[1] == pytest.approx(0.50196078, rel=1e-7)

    def test_flatten(self, rng):
        rec = SequenceRecord(rng.uniform(0, 1, size=(2, 2, 2, 1)), 0)
        flat = flatten_frames(rec)
        assert flat.shape == (2, 4)
        for t in range(2):
            np.testing.assert_array_equal(reshape(flat[t], (2, 2, 1)), rec.frames[t])

    def test_flattened_video_frame_length(self):
        rec = SequenceRecord(np.zeros((1, 120, 160, 3)), 0)
        assert flatten_frames(rec).shape == (1, 57600)


class TestContainer:
    def test_round_trip_single(self, tmp_path, tiny_dataset):
        write_dataset(tiny_dataset, tmp_path / "ds")
        assert_same_dataset(tiny_dataset, read_dataset(tmp_path / "ds"))

    def test_round_trip_multi(self, tmp_path, rng):
        ds = multi_label_dataset(rng)
        write_dataset(ds, tmp_path)
        restored = read_dataset(tmp_path)
        assert_same_dataset(ds, restored)
        mode, names, body = read_manifest(tmp_path)
        assert mode == "multi" and names == ["a", "b", "c", "d", "e"]
        assert len(body) == 7

    def test_rewrite_is_byte_identical(self, tmp_path, tiny_dataset):
        write_dataset(tiny_dataset, tmp_path / "a")
        write_dataset(read_dataset(tmp_path / "a"), tmp_path / "b")
        for name in sorted(os.listdir(tmp_path / "a")):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_file_layout(self, tmp_path):
        rec = SequenceRecord(np.full((2, 3, 4, 1), 0.5), 1)
        write_dataset(SequenceDataset([rec], ["x", "y"]), tmp_path)
        raw = (tmp_path / "seq_00000.ttsq").read_bytes()
        assert raw[:4] == b"TTSQ"
        assert raw[4:6] == (1).to_bytes(2, "little")
        assert raw[6:22] == b"".join(v.to_bytes(4, "little") for v in (2, 3, 4, 1))
        assert len(raw) == 22 + 4 * 24
        lines = (tmp_path / MANIFEST).read_text(encoding="utf-8").splitlines()
        assert lines == ["single\tx\ty", "seq_00000.ttsq\t1"]

    def test_truncated_payload(self, tmp_path, tiny_dataset):
        write_dataset(tiny_dataset, tmp_path)
        path = tmp_path / "seq_00002.ttsq"
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(FormatError, match="seq_00002.ttsq"):
            read_dataset(tmp_path)

    def test_bad_magic(self, tmp_path, tiny_dataset):
        write_dataset(tiny_dataset, tmp_path)
        path = tmp_path / "seq_00000.ttsq"
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])
        with pytest.raises(FormatError, match="magic"):
            read_dataset(tmp_path)

    def test_bad_version(self, tmp_path, tiny_dataset):
        write_dataset(tiny_dataset, tmp_path)
        path = tmp_path / "seq_00000.ttsq"
        raw = path.read_bytes()
        path.write_bytes(raw[:4] + (2).to_bytes(2, "little") + raw[6:])
        with pytest.raises(FormatError, match="version"):
            read_dataset(tmp_path)

    @pytest.mark.parametrize("value", [np.nan, np.inf, 1.5, -0.25])
    def test_payload_outside_unit_interval(self, tmp_path, tiny_dataset, value):
        write_dataset(tiny_dataset, tmp_path)
        path = tmp_path / "seq_00000.ttsq"
        raw = path.read_bytes()
        path.write_bytes(raw[:22] + np.array([value], dtype="<f4").tobytes() + raw[26:])
        with pytest.raises(FormatError, match="seq_00000.ttsq"):
            read_dataset(tmp_path)

    def test_missing_file(self, tmp_path, tiny_dataset):
        write_dataset(tiny_dataset, tmp_path)
        os.remove(tmp_path / "seq_00003.ttsq")
        with pytest.raises(FormatError, match="seq_00003.ttsq"):
            read_dataset(tmp_path)

    def test_unlisted_file(self, tmp_path, tiny_dataset):
        write_dataset(tiny_dataset, tmp_path)
        (tmp_path / "extra.ttsq").write_bytes((tmp_path / "seq_00000.ttsq").read_bytes())
        with pytest.raises(FormatError, match="extra.ttsq"):
            read_dataset(tmp_path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FormatError):
            read_dataset(tmp_path)


class TestIngest:
    def make_source(self, root, rng, size=(6, 5)):
        (root / "classes.txt").write_text("single\tcat\tdog\n", encoding="utf-8")
        (root / "labels.tsv").write_text("clip_a\t1\nclip_b\t0\n", encoding="utf-8")
        images = {}
        for folder, count in (("clip_a", 3), ("clip_b", 2)):
            (root / folder).mkdir()
            images[folder] = []
            for t in range(count):
                bgr = rng.integers(0, 256, size=size + (3,), dtype=np.uint8)
                cv2.imwrite(str(root / folder / f"frame_{t:03d}.png"), bgr)
                images[folder].append(bgr)
        return images

    def test_ingest_png_frames(self, tmp_path, rng):
        (tmp_path / "src").mkdir()
        images = self.make_source(tmp_path / "src", rng)
        ds = ingest_frames(tmp_path / "src", tmp_path / "out", 6, 5)
        assert [rec.label for rec in ds.records] == [1, 0]
        assert ds.records[0].frames.shape == (3, 6, 5, 3)
        expected = images["clip_a"][1][..., ::-1] / 255.0
        np.testing.assert_allclose(ds.records[0].frames[1], expected, rtol=1e-6)
        assert_same_dataset(ds, read_dataset(tmp_path / "out"))

    def test_ingest_resizes(self, tmp_path, rng):
        (tmp_path / "src").mkdir()
        self.make_source(tmp_path / "src", rng, size=(16, 12))
        ds = ingest_frames(tmp_path / "src", tmp_path / "out", 8, 6)
        assert ds.frame_shape == (8, 6, 3)

    def test_missing_label_files(self, tmp_path):
        with pytest.raises(FormatError):
            ingest_frames(tmp_path, tmp_path / "out", 8, 8)
