"""Shape attributes of a segmented left ventricle and their per-sequence series.

Seven scalar attributes summarize each frame:

==================  =====================================================
``lv_area``         cavity area, mm^2
``lv_base_width``   distance between the two valve-plane corner points, mm
``lv_length``       base midpoint to apex distance, mm
``lv_orientation``  long-axis angle versus image-vertical, degrees, (-90, 90]
``myo_area``        myocardium area, mm^2
``epi_cx``          epicardium (LV + MYO) centroid x, mm from image origin
``epi_cy``          epicardium centroid y, mm (y grows downward)
==================  =====================================================

Pixel centres sit at ``(col * sx, row * sy)`` with the origin at the
top-left pixel.  The valve plane ("base") is the set of cavity boundary
pixels exposed to background: the myocardium wraps the cavity everywhere
else, so background contact marks the opening.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from . import _mask
from .errors import AttributeExtractionError, DegenerateBaseError, DegenerateStatsError
from .seqio import ATTRIBUTE_NAMES, LV, MYO, LabelMap, SegSequence


@dataclass(frozen=True)
class AttributeVector:
    """The seven shape attributes of a single frame."""

    lv_area: float
    lv_base_width: float
    lv_length: float
    lv_orientation: float
    myo_area: float
    epi_cx: float
    epi_cy: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in ATTRIBUTE_NAMES], dtype=np.float64)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "AttributeVector":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape != (len(ATTRIBUTE_NAMES),):
            raise ValueError(f"expected {len(ATTRIBUTE_NAMES)} values, got {arr.shape}")
        return cls(**dict(zip(ATTRIBUTE_NAMES, (float(v) for v in arr))))


@dataclass
class AttributeSeries:
    """One attribute's values over the frames of a sequence."""

    attribute: str
    values: np.ndarray
    domain: str = "image"  # "image" (extracted from frames) or "latent"
    normalized: bool = False

    def __post_init__(self) -> None:
        if self.attribute not in ATTRIBUTE_NAMES:
            raise ValueError(f"unknown attribute {self.attribute!r}")
        if self.domain not in ("image", "latent"):
            raise ValueError(f"unknown domain {self.domain!r}")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("series values must be 1-D")
        if not np.isfinite(self.values).all():
            raise ValueError(f"series {self.attribute} contains non-finite values")


@dataclass(frozen=True)
class NormalizationStats:
    """Per-attribute (min, max) observed over a reference set, for one domain."""

    domain: str
    ranges: dict[str, tuple[float, float]]

    def to_dict(self) -> dict:
        return {a: {"min": lo, "max": hi} for a, (lo, hi) in self.ranges.items()}

    @classmethod
    def from_dict(cls, domain: str, d: dict) -> "NormalizationStats":
        return cls(
            domain=domain,
            ranges={a: (float(v["min"]), float(v["max"])) for a, v in d.items()},
        )


# ---------------------------------------------------------------------------
# Per-frame extraction
# ---------------------------------------------------------------------------


def _base_segment(labels: np.ndarray, lv: np.ndarray) -> np.ndarray:
    """Boolean mask of cavity boundary pixels exposed to background."""
    return _mask.exposed_to_background(labels, lv)


def _orientation_deg(xy: np.ndarray, toward: np.ndarray) -> float:
    """Principal-axis angle vs image-vertical, eigenvector pointed toward ``toward``."""
    centred = xy - xy.mean(axis=0)
    cov = centred.T @ centred / len(xy)
    eigvals, eigvecs = np.linalg.eigh(cov)
    v = eigvecs[:, int(np.argmax(eigvals))]
    if float(v @ toward) < 0.0:
        v = -v
    theta = float(np.degrees(np.arctan2(v[0], v[1])))
    # Fold into (-90, 90]: the axis is only defined modulo 180 degrees.
    if theta > 90.0:
        theta -= 180.0
    elif theta <= -90.0:
        theta += 180.0
    return theta


def extract_attributes(frame: LabelMap) -> AttributeVector:
    """Measure the seven shape attributes of one frame.

    Raises
    ------
    AttributeExtractionError
        If the cavity or the myocardium is empty.
    DegenerateBaseError
        If the cavity is fully enclosed (no valve opening).
    """
    labels = frame.labels
    sx, sy = frame.spacing_mm
    lv_all = labels == LV
    myo = labels == MYO
    if not lv_all.any():
        raise AttributeExtractionError("no left-ventricle pixels in frame")
    if not myo.any():
        raise AttributeExtractionError("no myocardium pixels in frame")

    lv = _mask.largest_component(lv_all)
    epi = lv | myo

    pixel_area = sx * sy
    lv_area = float(lv.sum()) * pixel_area
    myo_area = float(myo.sum()) * pixel_area

    epi_xy = _mask.pixel_coords_mm(epi, frame.spacing_mm)
    epi_cx, epi_cy = (float(v) for v in epi_xy.mean(axis=0))

    base = _base_segment(labels, lv)
    if not base.any():
        raise DegenerateBaseError("left ventricle has no background-facing opening")
    base_xy = _mask.pixel_coords_mm(base, frame.spacing_mm)

    # Valve corners: the pair of exposed pixels at maximal mutual distance.
    diffs = base_xy[:, None, :] - base_xy[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diffs, diffs)
    i, j = np.unravel_index(int(np.argmax(d2)), d2.shape)
    corner_a, corner_b = base_xy[i], base_xy[j]
    lv_base_width = float(np.sqrt(d2[i, j]))
    base_mid = 0.5 * (corner_a + corner_b)

    boundary_xy = _mask.pixel_coords_mm(_mask.boundary_4(lv), frame.spacing_mm)
    dist_from_base = np.linalg.norm(boundary_xy - base_mid, axis=1)
    apex = boundary_xy[int(np.argmax(dist_from_base))]
    lv_length = float(dist_from_base.max())

    lv_xy = _mask.pixel_coords_mm(lv, frame.spacing_mm)
    lv_orientation = _orientation_deg(lv_xy, toward=apex - lv_xy.mean(axis=0))

    return AttributeVector(
        lv_area=lv_area,
        lv_base_width=lv_base_width,
        lv_length=lv_length,
        lv_orientation=lv_orientation,
        myo_area=myo_area,
        epi_cx=epi_cx,
        epi_cy=epi_cy,
    )


# ---------------------------------------------------------------------------
# Sequences of frames
# ---------------------------------------------------------------------------


def extract_series(seq: SegSequence) -> list[AttributeSeries]:
    """Extract all seven attribute series from a sequence (image domain)."""
    rows = []
    for t, frame in enumerate(seq.frames):
        try:
            rows.append(extract_attributes(frame).as_array())
        except AttributeExtractionError as exc:
            raise type(exc)(f"frame {t}: {exc}") from exc
    matrix = np.asarray(rows)
    return [
        AttributeSeries(attribute=name, values=matrix[:, k], domain="image")
        for k, name in enumerate(ATTRIBUTE_NAMES)
    ]


def series_matrix(series: Sequence[AttributeSeries]) -> np.ndarray:
    """Stack the canonical seven series into a (T, 7) array."""
    by_name = {s.attribute: s for s in series}
    if set(by_name) != set(ATTRIBUTE_NAMES):
        raise ValueError("need exactly the seven canonical attribute series")
    return np.column_stack([by_name[name].values for name in ATTRIBUTE_NAMES])


def series_from_matrix(
    matrix: np.ndarray, domain: str = "image", normalized: bool = False
) -> list[AttributeSeries]:
    matrix = np.asarray(matrix, dtype=np.float64)
    return [
        AttributeSeries(attribute=name, values=matrix[:, k], domain=domain, normalized=normalized)
        for k, name in enumerate(ATTRIBUTE_NAMES)
    ]


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


def compute_stats(series: Iterable[AttributeSeries]) -> NormalizationStats:
    """Observed (min, max) per attribute over a reference collection.

    All series must share one domain; an attribute may contribute several
    series (for instance one per reference sequence).
    """
    series = list(series)
    if not series:
        raise DegenerateStatsError("no reference series given")
    domains = {s.domain for s in series}
    if len(domains) != 1:
        raise DegenerateStatsError(f"mixed domains in reference set: {sorted(domains)}")
    ranges: dict[str, tuple[float, float]] = {}
    for s in series:
        lo, hi = float(s.values.min()), float(s.values.max())
        if s.attribute in ranges:
            old_lo, old_hi = ranges[s.attribute]
            ranges[s.attribute] = (min(old_lo, lo), max(old_hi, hi))
        else:
            ranges[s.attribute] = (lo, hi)
    return NormalizationStats(domain=domains.pop(), ranges=ranges)


def normalize_series(series: AttributeSeries, stats: NormalizationStats) -> AttributeSeries:
    """Affinely map values so the reference (min, max) hits (0, 1).  No clamping."""
    if series.normalized:
        raise ValueError(f"series {series.attribute} is already normalized")
    if series.attribute not in stats.ranges:
        raise DegenerateStatsError(f"stats carry no range for {series.attribute!r}")
    lo, hi = stats.ranges[series.attribute]
    if not hi > lo:
        raise DegenerateStatsError(
            f"degenerate range for {series.attribute!r}: min == max == {lo}"
        )
    return replace(
        series, values=(series.values - lo) / (hi - lo), normalized=True
    )


def denormalize_series(series: AttributeSeries, stats: NormalizationStats) -> AttributeSeries:
    """Inverse of :func:`normalize_series`."""
    if not series.normalized:
        raise ValueError(f"series {series.attribute} is not normalized")
    lo, hi = stats.ranges[series.attribute]
    if not hi > lo:
        raise DegenerateStatsError(
            f"degenerate range for {series.attribute!r}: min == max == {lo}"
        )
    return replace(series, values=series.values * (hi - lo) + lo, normalized=False)
