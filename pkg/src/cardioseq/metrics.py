"""Evaluation metrics: overlap, surface distances, ejection fraction,
anatomical plausibility, and the temporal Gaussian baseline.

Regions are named ``lv`` (cavity), ``myo`` (muscle ring) and ``epi`` (their
union).  Surface distances operate on boundary pixels -- pixels of a region
with a 4-neighbour outside it -- with anisotropic pixel spacing, so results
are in millimetres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from . import _mask
from .attributes import extract_series, normalize_series, NormalizationStats
from .consistency import ConsistencyReport, Thresholds, report
from .errors import CardioseqError
from .seqio import LV, MYO, LabelMap, SegSequence

REGIONS = ("lv", "myo", "epi")

VIOLATIONS = (
    "lv_disconnected",
    "myo_disconnected",
    "lv_holes",
    "myo_holes",
    "lv_myo_detached",
    "myo_open_beyond_base",
)


class MetricsError(CardioseqError):
    """Metric preconditions violated (geometry mismatch, empty region...)."""


class UndefinedMetricError(MetricsError):
    """A surface distance was requested for an empty region."""


def _region_mask(frame: LabelMap, region: str) -> np.ndarray:
    if region == "lv":
        return frame.labels == LV
    if region == "myo":
        return frame.labels == MYO
    if region == "epi":
        return frame.labels > 0
    raise ValueError(f"unknown region {region!r}; expected one of {REGIONS}")


def _check_geometry(a: LabelMap, b: LabelMap) -> None:
    if a.labels.shape != b.labels.shape:
        raise MetricsError(f"geometry mismatch: {a.labels.shape} vs {b.labels.shape}")
    if a.spacing_mm != b.spacing_mm:
        raise MetricsError(f"spacing mismatch: {a.spacing_mm} vs {b.spacing_mm}")


# ---------------------------------------------------------------------------
# Overlap and surface distances
# ---------------------------------------------------------------------------


def dice(a: LabelMap, b: LabelMap, region: str) -> float:
    """Dice overlap of one region; two empty regions count as perfect (1.0)."""
    _check_geometry(a, b)
    ma, mb = _region_mask(a, region), _region_mask(b, region)
    denom = int(ma.sum()) + int(mb.sum())
    if denom == 0:
        return 1.0
    return 2.0 * float((ma & mb).sum()) / denom


def _boundary_distances(a: LabelMap, b: LabelMap, region: str) -> tuple[np.ndarray, np.ndarray]:
    """Directed nearest-boundary distances (a->b, b->a) in mm."""
    _check_geometry(a, b)
    ma, mb = _region_mask(a, region), _region_mask(b, region)
    if not ma.any() or not mb.any():
        raise UndefinedMetricError(f"region {region!r} empty; surface distance undefined")
    bd_a, bd_b = _mask.boundary_4(ma), _mask.boundary_4(mb)
    sx, sy = a.spacing_mm
    dist_to_b = ndimage.distance_transform_edt(~bd_b, sampling=(sy, sx))
    dist_to_a = ndimage.distance_transform_edt(~bd_a, sampling=(sy, sx))
    return dist_to_b[bd_a], dist_to_a[bd_b]


def hausdorff(a: LabelMap, b: LabelMap, region: str) -> float:
    """Symmetric Hausdorff distance between region boundaries, in mm."""
    d_ab, d_ba = _boundary_distances(a, b, region)
    return float(max(d_ab.max(), d_ba.max()))


def assd(a: LabelMap, b: LabelMap, region: str) -> float:
    """Average symmetric surface distance: mean over both directions, in mm."""
    d_ab, d_ba = _boundary_distances(a, b, region)
    return float(np.concatenate([d_ab, d_ba]).mean())


@dataclass(frozen=True)
class FrameMetrics:
    """Per-region overlap and surface distances of one frame pair."""

    dice: dict[str, float]
    hd_mm: dict[str, float]
    assd_mm: dict[str, float]

    def to_dict(self) -> dict:
        return {"dice": dict(self.dice), "hd_mm": dict(self.hd_mm), "assd_mm": dict(self.assd_mm)}


def frame_metrics(pred: LabelMap, gt: LabelMap) -> FrameMetrics:
    """All regions of one frame pair; empty-region distances become NaN."""
    d, h, s = {}, {}, {}
    for region in REGIONS:
        d[region] = dice(pred, gt, region)
        try:
            d_ab, d_ba = _boundary_distances(pred, gt, region)
        except UndefinedMetricError:
            h[region] = math.nan
            s[region] = math.nan
        else:
            h[region] = float(max(d_ab.max(), d_ba.max()))
            s[region] = float(np.concatenate([d_ab, d_ba]).mean())
    return FrameMetrics(dice=d, hd_mm=h, assd_mm=s)


# ---------------------------------------------------------------------------
# Ejection fraction
# ---------------------------------------------------------------------------


def ef_from_areas(areas: Sequence[float] | np.ndarray) -> float:
    """Area-based ejection fraction in percent.

    ED and ES are the frames of maximal and minimal area (a sequence need
    not start at end-diastole), EF = 100 * (A_ED - A_ES) / A_ED.
    """
    a = np.asarray(areas, dtype=np.float64)
    if a.ndim != 1 or a.shape[0] < 2:
        raise MetricsError("need a 1-D series of at least 2 areas")
    if not np.isfinite(a).all():
        raise MetricsError("areas contain non-finite values")
    a_ed = float(a.max())
    if a_ed <= 0:
        raise MetricsError("end-diastolic area must be positive")
    return 100.0 * (a_ed - float(a.min())) / a_ed


def lv_area_series(seq: SegSequence) -> np.ndarray:
    """Per-frame cavity area in mm^2 from raw pixel counts."""
    sx, sy = seq.frames[0].spacing_mm if seq.frames else (1.0, 1.0)
    return np.array([float((fr.labels == LV).sum()) * sx * sy for fr in seq.frames])


# ---------------------------------------------------------------------------
# Anatomical plausibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnatomicalReport:
    """Structural violations found in one frame; empty means plausible.

    The six checks are a documented subset of published plausibility
    criteria: one 8-connected component per class, no background enclosed by
    the cavity or the muscle, cavity attached to muscle everywhere except the
    valve opening, and exactly one such opening.
    """

    violations: tuple[str, ...]

    @property
    def is_clean(self) -> bool:
        return len(self.violations) == 0

    def to_dict(self) -> dict:
        return {"violations": list(self.violations), "is_clean": self.is_clean}


def anatomical_check(frame: LabelMap) -> AnatomicalReport:
    """Run all plausibility checks on one frame.  Reports, never raises."""
    labels = frame.labels
    lv = labels == LV
    myo = labels == MYO
    bg = labels == 0
    found: list[str] = []

    if _mask.connected_components(lv)[1] != 1:
        found.append("lv_disconnected")
    if _mask.connected_components(myo)[1] != 1:
        found.append("myo_disconnected")
    if _mask.background_holes(lv, bg).any():
        found.append("lv_holes")
    if _mask.background_holes(myo, bg).any():
        found.append("myo_holes")

    if lv.any():
        boundary = _mask.boundary_4(lv)
        base = _mask.exposed_to_background(labels, boundary)
        attached = _mask.adjacent_4(boundary, myo)
        if (boundary & ~base & ~attached).any():
            found.append("lv_myo_detached")
        # The valve plane must be the one and only opening of the muscle
        # ring: no exposed cavity anywhere else, and not fully sealed either.
        if _mask.connected_components(base)[1] != 1:
            found.append("myo_open_beyond_base")

    return AnatomicalReport(violations=tuple(found))


# ---------------------------------------------------------------------------
# Temporal Gaussian baseline
# ---------------------------------------------------------------------------


def gaussian_baseline(seq: SegSequence, sigma: float | None = None) -> SegSequence:
    """Per-pixel temporal Gaussian smoothing of one-hot labels, then argmax.

    The reference post-processor the regularizer is compared against: each
    class's indicator is filtered along time (kernel truncated at 3 sigma,
    edges replicated) and every pixel takes its highest-scoring class.  The
    default bandwidth is one twentieth of the sequence length; ``sigma=0``
    degenerates to the identity.
    """
    T = len(seq)
    if T < 3:
        raise MetricsError("gaussian baseline needs at least 3 frames")
    if sigma is None:
        sigma = T / 20.0
    if sigma < 0:
        raise MetricsError("sigma must be non-negative")
    if sigma == 0.0:
        return SegSequence(manifest=seq.manifest, frames=[fr.copy() for fr in seq.frames])

    stack = np.stack([fr.labels for fr in seq.frames])  # (T, H, W)
    onehot = np.stack([(stack == c).astype(np.float32) for c in (0, LV, MYO)], axis=1)
    smoothed = ndimage.gaussian_filter1d(
        onehot, sigma=sigma, axis=0, mode="nearest", truncate=3.0
    )
    labels = np.argmax(smoothed, axis=1).astype(np.uint8)
    frames = [LabelMap(labels[t], seq.frames[t].spacing_mm) for t in range(T)]
    return SegSequence(manifest=seq.manifest, frames=frames)


# ---------------------------------------------------------------------------
# Sequence-pair evaluation
# ---------------------------------------------------------------------------


@dataclass
class PairEvaluation:
    """Aggregate comparison of a predicted sequence against ground truth."""

    per_frame: list[FrameMetrics]
    mean_dice: dict[str, float]
    mean_hd_mm: dict[str, float]
    mean_assd_mm: dict[str, float]
    ef_pred: float
    ef_gt: float
    anatomical_error_frames: int
    violation_counts: dict[str, int] = field(default_factory=dict)
    consistency: ConsistencyReport | None = None

    @property
    def ef_abs_error(self) -> float:
        return abs(self.ef_pred - self.ef_gt)

    def to_dict(self) -> dict:
        return {
            "mean_dice": dict(self.mean_dice),
            "mean_hd_mm": dict(self.mean_hd_mm),
            "mean_assd_mm": dict(self.mean_assd_mm),
            "ef_pred": self.ef_pred,
            "ef_gt": self.ef_gt,
            "ef_abs_error": self.ef_abs_error,
            "anatomical_error_frames": self.anatomical_error_frames,
            "violation_counts": dict(self.violation_counts),
            "consistency": None if self.consistency is None else self.consistency.to_dict(),
            "n_frames": len(self.per_frame),
        }


def evaluate_pair(
    pred: SegSequence,
    gt: SegSequence,
    thresholds: Thresholds | None = None,
    stats: NormalizationStats | None = None,
) -> PairEvaluation:
    """Frame metrics, EF error, anatomical counts and (optionally) the
    consistency report of ``pred`` under image-domain thresholds."""
    if len(pred) != len(gt):
        raise MetricsError(f"sequence lengths differ: {len(pred)} vs {len(gt)}")
    per_frame = [frame_metrics(p, g) for p, g in zip(pred.frames, gt.frames)]

    def agg(values: list[float]) -> float:
        arr = np.asarray(values)
        finite = arr[np.isfinite(arr)]
        return float(finite.mean()) if finite.size else math.nan

    mean_dice = {r: agg([fm.dice[r] for fm in per_frame]) for r in REGIONS}
    mean_hd = {r: agg([fm.hd_mm[r] for fm in per_frame]) for r in REGIONS}
    mean_assd = {r: agg([fm.assd_mm[r] for fm in per_frame]) for r in REGIONS}

    ef_pred = ef_from_areas(lv_area_series(pred))
    ef_gt = ef_from_areas(lv_area_series(gt))

    violation_counts = {name: 0 for name in VIOLATIONS}
    bad_frames = 0
    for fr in pred.frames:
        rep = anatomical_check(fr)
        if not rep.is_clean:
            bad_frames += 1
            for v in rep.violations:
                violation_counts[v] += 1

    consistency = None
    if thresholds is not None and stats is not None:
        normalized = [normalize_series(s, stats) for s in extract_series(pred)]
        consistency = report(normalized, thresholds)

    return PairEvaluation(
        per_frame=per_frame,
        mean_dice=mean_dice,
        mean_hd_mm=mean_hd,
        mean_assd_mm=mean_assd,
        ef_pred=ef_pred,
        ef_gt=ef_gt,
        anatomical_error_frames=bad_frames,
        violation_counts=violation_counts,
        consistency=consistency,
    )
