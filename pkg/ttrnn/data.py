"""
Labeled frame sequences and their on-disk layout.

A dataset directory holds one "TTSQ" file per sequence and a manifest.tsv.
Sequence file: magic "TTSQ", u16 version, u32 T, H, W, C, then T*H*W*C
float32 values, little-endian and row-major. Manifest: a header line with
the label mode and the class names (tab-separated), then one line per
record: file name, tab, label spec (a class id, or comma-separated class
ids for multi-label data).

Frames are kept as float64 in memory but at float32 precision, so writing
and reading back a dataset is a bitwise identity.
"""
import logging
import os
from dataclasses import dataclass
from typing import List, Union

import cv2
import numpy as np
import pandas as pd
from tqdm import tqdm

from ttrnn.binio import read_array, read_struct, write_array, write_struct
from ttrnn.errors import ArgumentError, FormatError

logger = logging.getLogger(__name__)

MAGIC = b"TTSQ"
VERSION = 1
MANIFEST = "manifest.tsv"
LabelModes = ["single", "multi"]
MotionClasses = ["left", "right", "up", "down"]
# (dy, dx) per step, in MotionClasses order
MOTIONS = [(0, -1), (0, 1), (-1, 0), (1, 0)]
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass
class SequenceRecord:
    frames: np.ndarray
    label: Union[int, np.ndarray]

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32).astype(np.float64)
        if frames.ndim != 4 or frames.shape[0] < 1:
            raise ArgumentError(f"Frames must be a (T, H, W, C) array with T >= 1, got {frames.shape}")
        if not np.all(np.isfinite(frames)) or frames.min() < 0.0 or frames.max() > 1.0:
            raise ArgumentError("Frame values must be finite and lie in [0, 1]")
        self.frames = frames
        if isinstance(self.label, (int, np.integer)):
            self.label = int(self.label)
        else:
            self.label = (np.asarray(self.label) != 0).astype(np.uint8)

    @property
    def length(self):
        return self.frames.shape[0]

    @property
    def frame_shape(self):
        return self.frames.shape[1:]


@dataclass
class SequenceDataset:
    records: List[SequenceRecord]
    class_names: List[str]
    label_mode: str = "single"

    def __post_init__(self):
        if self.label_mode not in LabelModes:
            raise ArgumentError(f"Label mode must be one of {LabelModes}, got {self.label_mode}")
        shapes = {rec.frame_shape for rec in self.records}
        if len(shapes) > 1:
            raise ArgumentError(f"Records have different frame shapes: {sorted(shapes)}")
        J = len(self.class_names)
        for i, rec in enumerate(self.records):
            if self.label_mode == "single":
                if not isinstance(rec.label, int) or not 0 <= rec.label < J:
                    raise ArgumentError(f"Record {i} has label {rec.label!r}, expected a class id < {J}")
            elif isinstance(rec.label, int) or rec.label.shape != (J,):
                raise ArgumentError(f"Record {i} needs a multi-hot label of length {J}")

    def __len__(self):
        return len(self.records)

    @property
    def n_classes(self):
        return len(self.class_names)

    @property
    def frame_shape(self):
        return self.records[0].frame_shape if self.records else None

    @property
    def frame_size(self):
        return int(np.prod(self.frame_shape)) if self.records else 0

    def labels(self):
        """
        Class ids (single) or the (S, J) multi-hot matrix (multi).
        """
        if self.label_mode == "single":
            return np.array([rec.label for rec in self.records], dtype=np.int64)
        return np.stack([rec.label for rec in self.records]) if self.records else np.zeros((0, self.n_classes))

    def subset(self, indices):
        return SequenceDataset([self.records[i] for i in indices], list(self.class_names), self.label_mode)


def normalize_frames(raw):
    """
    Maps 8-bit pixel values 0..255 to [0, 1].
    """
    return np.asarray(raw, dtype=np.float64) / 255.0


def flatten_frames(rec):
    """
    One row-major vector of length H*W*C per frame, as a (T, H*W*C) array.
    """
    return rec.frames.reshape(rec.length, -1)


def generate_synthetic(n_per_class, t_range=(8, 16), height=16, width=16, channels=3,
                       noise_std=0.05, seed=0, square=4, progress=False):
    """
    Four classes of a bright square moving left, right, up or down by one
    pixel per frame, wrapping around the frame borders, on a dark
    background with clipped Gaussian noise. Start positions and lengths are
    random, so no single frame reveals the class.
    """
    t_min, t_max = (int(t) for t in t_range)
    if height < 8 or width < 8:
        raise ArgumentError(f"Frames must be at least 8x8, got {height}x{width}")
    if not 4 <= t_min <= t_max <= 64:
        raise ArgumentError(f"Sequence lengths must satisfy 4 <= t_min <= t_max <= 64, got {t_range}")
    if not 1 <= square < min(height, width):
        raise ArgumentError(f"A {square}-pixel square does not fit {height}x{width} frames")
    if seed < 0:
        raise ArgumentError(f"Seed must be non-negative, got {seed}")
    rng = np.random.default_rng(seed)
    records = []
    offsets = np.arange(square)
    total = n_per_class * len(MotionClasses)
    with tqdm(total=total, disable=not progress, desc="generating") as pbar:
        for _ in range(n_per_class):
            for label, (dy, dx) in enumerate(MOTIONS):
                T = int(rng.integers(t_min, t_max + 1))
                y0 = int(rng.integers(0, height))
                x0 = int(rng.integers(0, width))
                frames = np.zeros((T, height, width, channels))
                for t in range(T):
                    rows = (y0 + dy * t + offsets) % height
                    cols = (x0 + dx * t + offsets) % width
                    frames[t][np.ix_(rows, cols)] = 1.0
                if noise_std > 0:
                    frames = np.clip(frames + rng.normal(0.0, noise_std, frames.shape), 0.0, 1.0)
                records.append(SequenceRecord(frames, label))
                pbar.update(1)
    return SequenceDataset(records, list(MotionClasses), "single")


def shuffle_frames(ds, seed=0):
    """
    Same dataset with the frames of every sequence in random order,
    destroying the temporal signal.
    """
    rng = np.random.default_rng(seed)
    records = [SequenceRecord(rec.frames[rng.permutation(rec.length)], rec.label) for rec in ds.records]
    return SequenceDataset(records, list(ds.class_names), ds.label_mode)


def format_label(label):
    if isinstance(label, int):
        return str(label)
    return ",".join(str(j) for j in np.flatnonzero(label))


def parse_label(spec, mode, n_classes):
    try:
        ids = [int(v) for v in str(spec).split(",") if v.strip()]
    except ValueError:
        raise FormatError(f"Invalid label spec {spec!r}")
    if any(not 0 <= j < n_classes for j in ids):
        raise FormatError(f"Label spec {spec!r} outside [0, {n_classes})")
    if mode == "single":
        if len(ids) != 1:
            raise FormatError(f"Single-label record with label spec {spec!r}")
        return ids[0]
    out = np.zeros(n_classes, dtype=np.uint8)
    out[ids] = 1
    return out


def write_sequence(path, frames):
    T, H, W, C = frames.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        write_struct(fh, "H", VERSION)
        write_struct(fh, "IIII", T, H, W, C)
        write_array(fh, frames, dtype="<f4")


def read_sequence(path):
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise FormatError(f"{path} is not a TTSQ sequence file (bad magic)")
        version = read_struct(fh, "H", "version")
        if version != VERSION:
            raise FormatError(f"{path} has unsupported TTSQ version {version}")
        shape = read_struct(fh, "IIII", "sequence header")
        frames = read_array(fh, shape, dtype="<f4", what="frame payload")
        if fh.read(1):
            raise FormatError(f"{path} has trailing bytes after the frame payload")
    if not np.all(np.isfinite(frames)) or frames.min() < 0.0 or frames.max() > 1.0:
        raise FormatError(f"{path} holds values outside [0, 1]")
    return frames


def write_dataset(ds, directory):
    os.makedirs(directory, exist_ok=True)
    files = [f"seq_{i:05d}.ttsq" for i in range(len(ds))]
    for name, rec in zip(files, ds.records):
        write_sequence(os.path.join(directory, name), rec.frames)
    manifest = pd.DataFrame({
        "file": files,
        "label": [format_label(rec.label) for rec in ds.records],
    })
    with open(os.path.join(directory, MANIFEST), "w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join([ds.label_mode] + list(ds.class_names)) + "\n")
        manifest.to_csv(fh, sep="\t", header=False, index=False, lineterminator="\n")
    logger.info("Wrote %d records to %s", len(ds), directory)


def read_manifest(directory):
    path = os.path.join(directory, MANIFEST)
    if not os.path.isfile(path):
        raise FormatError(f"{directory} has no {MANIFEST}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
    if header[0] not in LabelModes or len(header) < 2:
        raise FormatError(f"{path}: invalid header line")
    try:
        body = pd.read_csv(path, sep="\t", header=None, skiprows=1, names=["file", "label"],
                           dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        body = pd.DataFrame({"file": [], "label": []})
    except pd.errors.ParserError as e:
        raise FormatError(f"{path}: {e}")
    return header[0], header[1:], body


def read_dataset(directory, progress=False):
    mode, class_names, body = read_manifest(directory)
    listed = set(body["file"])
    on_disk = {f for f in os.listdir(directory) if f.endswith(".ttsq")}
    missing = sorted(listed - on_disk)
    if missing:
        raise FormatError(f"Manifest of {directory} references missing file {missing[0]}")
    unlisted = sorted(on_disk - listed)
    if unlisted:
        raise FormatError(f"{directory} holds {unlisted[0]}, which the manifest does not list")
    records = []
    for name, spec in tqdm(zip(body["file"], body["label"]), total=len(body),
                           disable=not progress, desc="reading"):
        frames = read_sequence(os.path.join(directory, name))
        records.append(SequenceRecord(frames, parse_label(spec, mode, len(class_names))))
    try:
        return SequenceDataset(records, class_names, mode)
    except ArgumentError as e:
        raise FormatError(f"{directory}: {e}")


def dataset_bytes(directory):
    return sum(os.path.getsize(os.path.join(directory, f)) for f in os.listdir(directory))


def load_frame_image(path, height, width):
    """
    Reads one pre-extracted frame image as an RGB (H, W, 3) array in [0, 1].
    """
    image = cv2.imread(path, cv2.IMREAD_COLOR)
    if image is None:
        raise FormatError(f"Cannot read frame image {path}")
    image = cv2.cvtColor(image, cv2.COLOR_BGR2RGB)
    if image.shape[:2] != (height, width):
        image = cv2.resize(image, (width, height), interpolation=cv2.INTER_AREA)
    return normalize_frames(image)


def ingest_frames(source_dir, out_dir, height, width, progress=False):
    """
    Converts pre-extracted frame images into a dataset directory.

    `source_dir` holds a `classes.txt` (label mode and class names,
    tab-separated), a `labels.tsv` (sequence folder, tab, label spec) and
    one folder of images per sequence, in lexical frame order.
    """
    classes_path = os.path.join(source_dir, "classes.txt")
    labels_path = os.path.join(source_dir, "labels.tsv")
    if not os.path.isfile(classes_path) or not os.path.isfile(labels_path):
        raise FormatError(f"{source_dir} needs classes.txt and labels.tsv")
    with open(classes_path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
    mode, class_names = header[0], header[1:]
    if mode not in LabelModes or not class_names:
        raise FormatError(f"{classes_path}: invalid header")
    labels = pd.read_csv(labels_path, sep="\t", header=None, names=["folder", "label"],
                         dtype=str, keep_default_na=False)
    records = []
    for folder, spec in tqdm(zip(labels["folder"], labels["label"]), total=len(labels),
                             disable=not progress, desc="ingesting"):
        seq_dir = os.path.join(source_dir, folder)
        if not os.path.isdir(seq_dir):
            raise FormatError(f"labels.tsv references missing folder {seq_dir}")
        images = sorted(f for f in os.listdir(seq_dir) if f.lower().endswith(IMAGE_SUFFIXES))
        if not images:
            raise FormatError(f"{seq_dir} holds no frame images")
        frames = np.stack([load_frame_image(os.path.join(seq_dir, f), height, width) for f in images])
        records.append(SequenceRecord(frames, parse_label(spec, mode, len(class_names))))
    ds = SequenceDataset(records, class_names, mode)
    write_dataset(ds, out_dir)
    return ds
