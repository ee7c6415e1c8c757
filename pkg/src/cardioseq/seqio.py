"""Reading and writing segmentation sequences and numeric tables.

A sequence lives in a directory with a ``manifest.json`` and one binary PGM
(P5) file per frame under ``frames/``.  Label maps use 0 = background,
1 = left-ventricle cavity, 2 = myocardium.  Numeric series travel as CSV with
full-precision floats so that write -> read round trips are lossless.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SequenceFormatError

BACKGROUND = 0
LV = 1
MYO = 2
VALID_LABELS = (BACKGROUND, LV, MYO)

#: Canonical attribute order used by every table and latent layout.
ATTRIBUTE_NAMES = (
    "lv_area",
    "lv_base_width",
    "lv_length",
    "lv_orientation",
    "myo_area",
    "epi_cx",
    "epi_cy",
)

SERIES_HEADER = ("frame",) + ATTRIBUTE_NAMES
LATENT_DIM = 16
LATENT_HEADER = ("frame",) + tuple(f"z{i:02d}" for i in range(LATENT_DIM))

_FRAME_TEMPLATE = "frame_{:04d}.pgm"


@dataclass(frozen=True)
class SequenceManifest:
    """Metadata stored alongside the frames of one sequence."""

    patient_id: str
    frame_files: tuple[str, ...]
    width: int
    height: int
    spacing_mm: tuple[float, float]  # (sx, sy), millimetres per pixel
    frame_period_s: float | None = None

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise SequenceFormatError("manifest width/height must be positive")
        sx, sy = self.spacing_mm
        if not (sx > 0 and sy > 0) or not (math.isfinite(sx) and math.isfinite(sy)):
            raise SequenceFormatError("manifest spacing_mm must be positive and finite")
        if len(self.frame_files) == 0:
            raise SequenceFormatError("manifest lists no frames")

    def to_dict(self) -> dict:
        d = {
            "patient_id": self.patient_id,
            "frame_files": list(self.frame_files),
            "width": self.width,
            "height": self.height,
            "spacing_mm": list(self.spacing_mm),
        }
        if self.frame_period_s is not None:
            d["frame_period_s"] = self.frame_period_s
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SequenceManifest":
        try:
            return cls(
                patient_id=str(d["patient_id"]),
                frame_files=tuple(str(f) for f in d["frame_files"]),
                width=int(d["width"]),
                height=int(d["height"]),
                spacing_mm=(float(d["spacing_mm"][0]), float(d["spacing_mm"][1])),
                frame_period_s=(
                    float(d["frame_period_s"]) if d.get("frame_period_s") is not None else None
                ),
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise SequenceFormatError(f"malformed manifest: {exc}") from exc


@dataclass
class LabelMap:
    """One segmentation frame: a (height, width) uint8 grid plus pixel spacing."""

    labels: np.ndarray
    spacing_mm: tuple[float, float]

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 2:
            raise SequenceFormatError("label map must be 2-D")
        if self.labels.dtype != np.uint8:
            if not np.isin(self.labels, VALID_LABELS).all():
                raise SequenceFormatError("label map contains labels outside {0, 1, 2}")
            self.labels = self.labels.astype(np.uint8)
        elif self.labels.max(initial=0) > MYO:
            raise SequenceFormatError("label map contains labels outside {0, 1, 2}")
        sx, sy = self.spacing_mm
        if not (sx > 0 and sy > 0):
            raise SequenceFormatError("spacing must be positive")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def copy(self) -> "LabelMap":
        return LabelMap(self.labels.copy(), self.spacing_mm)


@dataclass
class SegSequence:
    """An ordered run of frames from one acquisition."""

    manifest: SequenceManifest
    frames: list[LabelMap] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.frames) != len(self.manifest.frame_files):
            raise SequenceFormatError(
                f"manifest lists {len(self.manifest.frame_files)} frames, "
                f"got {len(self.frames)}"
            )
        for i, fr in enumerate(self.frames):
            if fr.labels.shape != (self.manifest.height, self.manifest.width):
                raise SequenceFormatError(
                    f"frame {i} is {fr.labels.shape}, manifest says "
                    f"({self.manifest.height}, {self.manifest.width})"
                )

    def __len__(self) -> int:
        return len(self.frames)


# ---------------------------------------------------------------------------
# PGM (P5, 8-bit) frame codec.  Hand-rolled so that label bytes survive
# bit-exactly and we control every failure mode.
# ---------------------------------------------------------------------------


def _write_pgm(path: Path, labels: np.ndarray) -> None:
    h, w = labels.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    path.write_bytes(header + labels.tobytes())


def _read_pgm(path: Path) -> np.ndarray:
    try:
        blob = path.read_bytes()
    except FileNotFoundError as exc:
        raise SequenceFormatError(f"missing frame file: {path}") from exc

    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed between them.
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(blob):
            raise SequenceFormatError(f"{path}: truncated PGM header")
        c = blob[pos : pos + 1]
        if c == b"#":
            nl = blob.find(b"\n", pos)
            pos = len(blob) if nl < 0 else nl + 1
        elif c.isspace():
            pos += 1
        else:
            end = pos
            while end < len(blob) and not blob[end : end + 1].isspace():
                end += 1
            tokens.append(blob[pos:end])
            pos = end
    if tokens[0] != b"P5":
        raise SequenceFormatError(f"{path}: not a binary PGM (P5) file")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise SequenceFormatError(f"{path}: malformed PGM header") from exc
    if w <= 0 or h <= 0 or not (0 < maxval < 256):
        raise SequenceFormatError(f"{path}: bad PGM dimensions or maxval")
    pos += 1  # single whitespace byte after maxval
    data = blob[pos : pos + w * h]
    if len(data) != w * h:
        raise SequenceFormatError(f"{path}: PGM payload is {len(data)} bytes, expected {w * h}")
    arr = np.frombuffer(data, dtype=np.uint8).reshape(h, w)
    if arr.max(initial=0) > MYO:
        raise SequenceFormatError(f"{path}: labels outside {{0, 1, 2}}")
    return arr.copy()


# ---------------------------------------------------------------------------
# Sequence directories
# ---------------------------------------------------------------------------


def save_sequence(seq: SegSequence, seq_dir: str | Path) -> None:
    """Write ``manifest.json`` plus one PGM per frame under ``frames/``."""
    seq_dir = Path(seq_dir)
    try:
        (seq_dir / "frames").mkdir(parents=True, exist_ok=True)
    except (OSError, NotADirectoryError) as exc:
        raise SequenceFormatError(f"cannot create sequence dir {seq_dir}: {exc}") from exc
    names = [_FRAME_TEMPLATE.format(i) for i in range(len(seq))]
    manifest = SequenceManifest(
        patient_id=seq.manifest.patient_id,
        frame_files=tuple(f"frames/{n}" for n in names),
        width=seq.manifest.width,
        height=seq.manifest.height,
        spacing_mm=seq.manifest.spacing_mm,
        frame_period_s=seq.manifest.frame_period_s,
    )
    try:
        for name, frame in zip(names, seq.frames):
            _write_pgm(seq_dir / "frames" / name, frame.labels)
        (seq_dir / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2))
    except OSError as exc:
        raise SequenceFormatError(f"cannot write sequence to {seq_dir}: {exc}") from exc


def load_sequence(seq_dir: str | Path) -> SegSequence:
    """Load a sequence directory written by :func:`save_sequence`."""
    seq_dir = Path(seq_dir)
    manifest_path = seq_dir / "manifest.json"
    if not manifest_path.is_file():
        raise SequenceFormatError(f"missing manifest: {manifest_path}")
    try:
        manifest = SequenceManifest.from_dict(json.loads(manifest_path.read_text()))
    except json.JSONDecodeError as exc:
        raise SequenceFormatError(f"unparseable manifest {manifest_path}: {exc}") from exc
    frames = []
    for rel in manifest.frame_files:
        arr = _read_pgm(seq_dir / rel)
        if arr.shape != (manifest.height, manifest.width):
            raise SequenceFormatError(
                f"{rel}: frame is {arr.shape}, manifest says "
                f"({manifest.height}, {manifest.width})"
            )
        frames.append(LabelMap(arr, manifest.spacing_mm))
    return SegSequence(manifest=manifest, frames=frames)


def is_sequence_dir(path: str | Path) -> bool:
    return (Path(path) / "manifest.json").is_file()


# ---------------------------------------------------------------------------
# CSV tables
# ---------------------------------------------------------------------------


def _format_value(v: float) -> str:
    return repr(float(v))


def _parse_value(token: str, where: str) -> float:
    try:
        v = float(token)
    except ValueError as exc:
        raise SequenceFormatError(f"{where}: non-numeric value {token!r}") from exc
    if not math.isfinite(v):
        raise SequenceFormatError(f"{where}: non-finite value {token!r}")
    return v


def _write_table(path: Path, header: tuple[str, ...], rows: np.ndarray) -> None:
    if not np.isfinite(rows).all():
        raise SequenceFormatError(f"refusing to write non-finite values to {path}")
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i, row in enumerate(rows):
                writer.writerow([i] + [_format_value(v) for v in row])
    except OSError as exc:
        raise SequenceFormatError(f"cannot write table {path}: {exc}") from exc


def _read_table(path: Path, header: tuple[str, ...]) -> np.ndarray:
    if not Path(path).is_file():
        raise SequenceFormatError(f"missing table: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise SequenceFormatError(f"{path}: empty file") from None
        if tuple(got) != header:
            raise SequenceFormatError(
                f"{path}: bad header {got!r}, expected {list(header)!r}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SequenceFormatError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                idx = int(row[0])
            except ValueError as exc:
                raise SequenceFormatError(f"{path}:{lineno}: bad frame index {row[0]!r}") from exc
            if idx != lineno - 2:
                raise SequenceFormatError(
                    f"{path}:{lineno}: frame index {idx} out of order"
                )
            rows.append([_parse_value(tok, f"{path}:{lineno}") for tok in row[1:]])
    if not rows:
        raise SequenceFormatError(f"{path}: table has no data rows")
    return np.asarray(rows, dtype=np.float64)


def write_series_table(path: str | Path, values: np.ndarray) -> None:
    """Write a (T, 7) attribute-series array as ``attributes.csv``."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != len(ATTRIBUTE_NAMES):
        raise SequenceFormatError(
            f"series table must be (T, {len(ATTRIBUTE_NAMES)}), got {values.shape}"
        )
    _write_table(Path(path), SERIES_HEADER, values)


def read_series_table(path: str | Path) -> np.ndarray:
    """Read an ``attributes.csv`` written by :func:`write_series_table`."""
    return _read_table(Path(path), SERIES_HEADER)


def write_latent_table(path: str | Path, values: np.ndarray) -> None:
    """Write a (T, 16) latent-trajectory array as ``latent.csv``."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != LATENT_DIM:
        raise SequenceFormatError(
            f"latent table must be (T, {LATENT_DIM}), got {values.shape}"
        )
    _write_table(Path(path), LATENT_HEADER, values)


def read_latent_table(path: str | Path) -> np.ndarray:
    """Read a ``latent.csv`` written by :func:`write_latent_table`."""
    return _read_table(Path(path), LATENT_HEADER)
