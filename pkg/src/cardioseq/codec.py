"""Parametric shape codec between label maps and 16-dimensional latents.

Latent layout: dimensions 0-6 hold the raw shape attributes in canonical
order, dimensions 7-15 hold residual coefficients describing how the
endocardial contour deviates from the canonical shape implied by those
attributes.

The canonical endocardial contour is an egg profile in a local frame whose
axis runs from the valve-plane midpoint toward the apex.  With axial position
``t`` in [0, 1] the lateral half-width is::

    rho(t) = (w / 2 + b * t) * sqrt(1 - t**2)

where ``w`` is the base width.  The elliptic envelope gives the apex a
vertical tangent, so the tip stays wider than a pixel at every valid
slimness and rasterization never eats into the measured length.  The taper
``b`` is solved analytically so the enclosed area matches the requested
cavity area (the enclosed area is ``pi*w*L/4 + 2*b*L/3``).
Residual coefficients displace the contour
along its outward normals, as a function of the arc-length fraction ``u``
measured from one valve corner around the apex to the other corner::

    dev(u) = scale * sum_k z[7 + k] * [f_k(u) - corrections]
    f_k(u) = sin(pi * u) * cos(pi * h_k * u),   h_k in {1, 4, 6, 7, ..., 12}

The taper keeps the valve corners anchored so the base width is preserved.
From each profile a small combination of four corrective modes (the tapered
order-0, order-2, order-3 and order-5 cosines, which is why orders 2, 3 and
5 are absent from the harmonic set) is subtracted so that, to first order,
the displacement changes neither the enclosed area, nor the apex reach, nor
the principal-axis tilt, nor the lateral centroid of the shape.  Residual
detail therefore never aliases into the attribute dims or moves the
reference frame, and encode fits deviations in exactly the same corrected
basis that decode renders with.

Decoding rasterizes the contour (pixel centres at ``(col * sx, row * sy)``),
wraps the cavity in a myocardial band of locally uniform thickness that is
open at the base and closed around apex and sides, and shifts everything so
the epicardium centroid lands at ``(epi_cx, epi_cy)``.  Band thickness is
chosen so the myocardium pixel area matches the requested area (the eligible
pixels nearest to the cavity are selected until the pixel budget is met).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import ndimage
from skimage import measure

from . import _mask
from .attributes import AttributeVector, extract_attributes
from .errors import CodecError
from .seqio import (
    ATTRIBUTE_NAMES,
    LATENT_DIM,
    LV,
    MYO,
    LabelMap,
    SegSequence,
    read_latent_table,
    write_latent_table,
)

N_ATTRS = len(ATTRIBUTE_NAMES)
N_RESIDUAL = LATENT_DIM - N_ATTRS

_DENSE_SAMPLES = 512
_CENTROID_TOL_MM = 0.05
_CENTROID_MAX_ITERS = 6


@dataclass(frozen=True)
class CodecModel:
    """Geometry and basis parameters shared by encode and decode."""

    width: int = 224
    height: int = 224
    spacing_mm: tuple[float, float] = (0.7, 0.7)
    contour_samples: int = 128
    harmonics: int = N_RESIDUAL
    residual_scale_mm: float = 16.0

    def __post_init__(self) -> None:
        if self.width < 8 or self.height < 8:
            raise CodecError("codec image geometry too small")
        if self.harmonics != N_RESIDUAL:
            raise CodecError(f"latent layout requires exactly {N_RESIDUAL} harmonics")
        if self.contour_samples < 2 * self.harmonics:
            raise CodecError(
                "contour_samples must be at least twice the harmonic count "
                f"({self.contour_samples} < {2 * self.harmonics})"
            )
        sx, sy = self.spacing_mm
        if not (sx > 0 and sy > 0):
            raise CodecError("spacing must be positive")
        if self.residual_scale_mm <= 0:
            raise CodecError("residual scale must be positive")

    def basis(self) -> np.ndarray:
        """(N, harmonics) tapered cosine design matrix, before drift correction."""
        u = np.linspace(0.0, 1.0, self.contour_samples)
        return _harmonic_fields(u, self.harmonics)

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "spacing_mm": list(self.spacing_mm),
            "contour_samples": self.contour_samples,
            "harmonics": self.harmonics,
            "residual_scale_mm": self.residual_scale_mm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CodecModel":
        try:
            return cls(
                width=int(d["width"]),
                height=int(d["height"]),
                spacing_mm=(float(d["spacing_mm"][0]), float(d["spacing_mm"][1])),
                contour_samples=int(d["contour_samples"]),
                harmonics=int(d["harmonics"]),
                residual_scale_mm=float(d["residual_scale_mm"]),
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise CodecError(f"malformed codec model: {exc}") from exc


def save_model(model: CodecModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2))


def load_model(path: str | Path) -> CodecModel:
    path = Path(path)
    if not path.is_file():
        raise CodecError(f"missing codec model file: {path}")
    return CodecModel.from_dict(json.loads(path.read_text()))


# ---------------------------------------------------------------------------
# Canonical contour construction
# ---------------------------------------------------------------------------


def lateral_bulge(lv_area: float, base_width: float, length: float) -> float:
    """Width-taper coefficient making the canonical contour enclose ``lv_area``.

    Positive values widen the contour toward mid-height, negative values
    narrow it; the half-width must stay positive all the way to the apex.
    """
    if lv_area <= 0 or base_width <= 0 or length <= 0:
        raise CodecError("areas, width and length must be positive")
    b = 1.5 * lv_area / length - 3.0 * np.pi * base_width / 8.0
    if b <= -0.5 * base_width:
        raise CodecError(
            f"cavity area {lv_area:.1f} mm^2 unreachable with base width "
            f"{base_width:.1f} mm and length {length:.1f} mm"
        )
    return float(b)


def _axis_frame(orientation_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors (lateral, axial) for an orientation vs image-vertical."""
    th = np.radians(orientation_deg)
    axial = np.array([np.sin(th), np.cos(th)])  # toward the apex; y grows down
    lateral = np.array([np.cos(th), -np.sin(th)])
    return lateral, axial


def _dense_arc(attrs: AttributeVector, model: CodecModel) -> np.ndarray:
    """Dense local-frame polyline corner A -> apex -> corner B.

    Local frame: origin at the valve-plane midpoint, first coordinate
    lateral, second axial (0 at base, ``lv_length`` at apex).

    Width is drawn one pixel larger than requested and length three quarters
    of a pixel longer: pixel centres sit strictly inside the contour, so the
    extreme-pixel measurements read systematically low by just that much
    (calibrated over placements, tilts and sizes).  Drawing the compensation
    makes extraction of a decoded frame land on the requested values.
    """
    sx, sy = model.spacing_mm
    w = attrs.lv_base_width + sx
    length = attrs.lv_length + 0.75 * sy
    b = lateral_bulge(attrs.lv_area, w, length)
    u = np.linspace(0.0, 1.0, _DENSE_SAMPLES)
    t = 0.5 * (1.0 - np.cos(np.pi * u))  # dense near base and apex
    rho = (0.5 * w + b * t) * np.sqrt(np.maximum(1.0 - t * t, 0.0))
    down = np.column_stack([-rho, t * length])  # corner A side
    up = np.column_stack([rho, t * length])[::-1]  # back up to corner B
    return np.concatenate([down, up[1:]], axis=0)


def _arc_geometry(arc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Arc-length fractions in [0, 1] and outward unit normals of a polyline.

    Outward means away from the shape axis; the polyline is expected in the
    local frame (axis along the second coordinate) or any rigid image of it
    where the widest point still lies off-axis on the correct side.
    """
    deltas = np.diff(arc, axis=0)
    seglen = np.hypot(deltas[:, 0], deltas[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    total = cum[-1]
    if total <= 0:
        raise CodecError("degenerate contour: zero arc length")
    u = cum / total
    tang = np.gradient(arc, axis=0)
    tang /= np.maximum(np.hypot(tang[:, 0], tang[:, 1]), 1e-12)[:, None]
    normals = np.column_stack([tang[:, 1], -tang[:, 0]])
    widest = int(np.argmax(np.abs(arc[:, 0])))
    if normals[widest, 0] * arc[widest, 0] < 0:
        normals = -normals
    return u, normals


def _resample_arc(arc: np.ndarray, n: int) -> np.ndarray:
    """Resample a polyline to ``n`` points uniformly spaced by arc length."""
    deltas = np.diff(arc, axis=0)
    seglen = np.hypot(deltas[:, 0], deltas[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    stations = np.linspace(0.0, cum[-1], n)
    return np.column_stack(
        [np.interp(stations, cum, arc[:, 0]), np.interp(stations, cum, arc[:, 1])]
    )


def _harmonic_orders(harmonics: int) -> np.ndarray:
    """Cosine orders used for the residual dims; 2, 3 and 5 are reserved."""
    orders = [h for h in range(1, harmonics + 4) if h not in (2, 3, 5)]
    return np.asarray(orders[:harmonics])


def _harmonic_fields(u: np.ndarray, harmonics: int) -> np.ndarray:
    """Tapered cosine profiles, one column per harmonic, at fractions ``u``."""
    h = _harmonic_orders(harmonics)
    return np.sin(np.pi * u)[:, None] * np.cos(np.pi * u[:, None] * h[None, :])


def _drift_fields(u: np.ndarray) -> np.ndarray:
    """Four corrective displacement profiles: inflate, breathe, seesaw, sway.

    All vanish at the valve corners.  They span (to first order) the changes
    a normal displacement can make to enclosed area, apex reach, principal
    tilt and lateral centroid, and are used to cancel exactly those changes
    out of the harmonic profiles, so residual detail neither aliases into
    the attribute dims nor moves the reference frame the encoder rebuilds
    from them (a lateral centroid shift would feed straight back into the
    fit).  Cosine orders 2, 3 and 5 are kept out of the harmonic set to
    serve here: distinct orders are exactly linearly independent, so the
    fitted system cannot degenerate, and the antisymmetric pair 3/5 peaks on
    the flanks with opposite signs -- strong tilt and sway levers -- which
    keeps the mixing coefficients O(1).
    """
    env = np.sin(np.pi * u)
    return np.column_stack(
        [
            env,
            env * np.cos(2.0 * np.pi * u),
            env * np.cos(3.0 * np.pi * u),
            env * np.cos(5.0 * np.pi * u),
        ]
    )


def _polygon_shape_stats(polygon: np.ndarray) -> tuple[float, float, float, float]:
    """(area, principal angle vs local axial in degrees, apex reach, centroid x).

    Polygon vertices are in the local frame (origin at the valve midpoint,
    second axis toward the apex); the polygon closes itself.
    """
    x, y = polygon[:, 0], polygon[:, 1]
    x1, y1 = np.roll(x, -1), np.roll(y, -1)
    cross = x * y1 - x1 * y
    a2 = cross.sum()
    if a2 == 0:
        raise CodecError("degenerate contour: zero enclosed area")
    if a2 < 0:  # normalize to counter-clockwise traversal
        return _polygon_shape_stats(polygon[::-1])
    area = 0.5 * a2
    cx = ((x + x1) * cross).sum() / (3.0 * a2)
    cy = ((y + y1) * cross).sum() / (3.0 * a2)
    mxx = ((x * x + x * x1 + x1 * x1) * cross).sum() / 12.0
    myy = ((y * y + y * y1 + y1 * y1) * cross).sum() / 12.0
    mxy = ((x * y1 + 2.0 * x * y + 2.0 * x1 * y1 + x1 * y) * cross).sum() / 24.0
    cov = np.array(
        [
            [mxx - area * cx * cx, mxy - area * cx * cy],
            [mxy - area * cx * cy, myy - area * cy * cy],
        ]
    )
    evals, evecs = np.linalg.eigh(cov)
    major = evecs[:, int(np.argmax(evals))]
    if major[1] < 0:
        major = -major
    angle = float(np.degrees(np.arctan2(major[0], major[1])))
    reach = float(np.hypot(x, y).max())
    return float(area), angle, reach, float(cx)


_DRIFT_PROBE_MM = 1e-2


def _drift_correction(
    dense: np.ndarray, u: np.ndarray, normals: np.ndarray, harmonics: int
) -> np.ndarray:
    """Mixing matrix C such that ``harmonic - modes @ C`` is drift-free.

    Responses of (area, tilt, apex reach, lateral centroid) to each
    displacement field are probed on the polygon itself, then the corrective
    modes are combined to cancel the harmonics' responses.
    """
    base = np.array(_polygon_shape_stats(dense))
    fields = np.concatenate([_harmonic_fields(u, harmonics), _drift_fields(u)], axis=1)
    resp = np.empty((4, fields.shape[1]))
    for j in range(fields.shape[1]):
        pert = dense + _DRIFT_PROBE_MM * fields[:, j : j + 1] * normals
        resp[:, j] = (np.array(_polygon_shape_stats(pert)) - base) / _DRIFT_PROBE_MM
    try:
        return np.linalg.solve(resp[:, harmonics:], resp[:, :harmonics])
    except np.linalg.LinAlgError as exc:
        raise CodecError(f"residual basis degenerate for this shape: {exc}") from exc


def _residual_profile(
    u: np.ndarray, residuals: np.ndarray, mixing: np.ndarray, model: CodecModel
) -> np.ndarray:
    """Drift-corrected residual displacement (mm) at arc fractions ``u``."""
    corrected = _harmonic_fields(u, model.harmonics) - _drift_fields(u) @ mixing
    return model.residual_scale_mm * (corrected @ residuals)


def canonical_contour(
    attrs: AttributeVector, model: CodecModel
) -> tuple[np.ndarray, np.ndarray]:
    """Station-sampled canonical contour and outward normals (local frame)."""
    dense = _dense_arc(attrs, model)
    u, normals = _arc_geometry(dense)
    pts = _resample_arc(dense, model.contour_samples)
    stations = np.linspace(0.0, 1.0, model.contour_samples)
    station_normals = np.column_stack(
        [np.interp(stations, u, normals[:, 0]), np.interp(stations, u, normals[:, 1])]
    )
    station_normals /= np.maximum(
        np.hypot(station_normals[:, 0], station_normals[:, 1]), 1e-12
    )[:, None]
    return pts, station_normals


# ---------------------------------------------------------------------------
# Rasterization (scanline, even-odd, pixel centres on the mm lattice)
# ---------------------------------------------------------------------------


def rasterize_polygon(
    points_mm: np.ndarray, width: int, height: int, spacing_mm: tuple[float, float]
) -> np.ndarray:
    """Boolean mask of pixels whose centres fall inside a closed polygon.

    The polygon closes itself from the last point back to the first.  A pixel
    centre exactly on a left/bottom crossing counts as inside (half-open
    rule), which keeps the fill deterministic.
    """
    pts = np.asarray(points_mm, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("polygon needs at least 3 (x, y) points")
    sx, sy = spacing_mm
    p = pts
    q = np.roll(pts, -1, axis=0)
    py, qy = p[:, 1], q[:, 1]
    px, qx = p[:, 0], q[:, 0]
    mask = np.zeros((height, width), dtype=bool)
    ys = np.arange(height) * sy
    #

    lo = np.minimum(py, qy)
    hi = np.maximum(py, qy)
    denom = qy - py
    for r, y in enumerate(ys):
        crossing = (lo <= y) & (y < hi)  # half-open: excludes horizontal edges
        if not crossing.any():
            continue
        t = (y - py[crossing]) / denom[crossing]
        xs = np.sort(px[crossing] + t * (qx[crossing] - px[crossing]))
        for x_enter, x_exit in zip(xs[0::2], xs[1::2]):
            c0 = int(np.ceil(x_enter / sx - 1e-9))
            c1 = int(np.ceil(x_exit / sx - 1e-9))  # exclusive
            if c1 > 0 and c0 < width:
                mask[r, max(c0, 0) : min(c1, width)] = True
    return mask


# ---------------------------------------------------------------------------
# Decode
# ---------------------------------------------------------------------------


def _validate_latent(z: np.ndarray) -> AttributeVector:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (LATENT_DIM,):
        raise CodecError(f"latent must have {LATENT_DIM} dimensions, got {z.shape}")
    if not np.isfinite(z).all():
        raise CodecError("latent contains non-finite values")
    attrs = AttributeVector.from_array(z[:N_ATTRS])
    if attrs.lv_area <= 0 or attrs.myo_area <= 0:
        raise CodecError("areas must be positive")
    if attrs.lv_base_width <= 0 or attrs.lv_length <= 0:
        raise CodecError("base width and length must be positive")
    if not (-90.0 < attrs.lv_orientation <= 90.0):
        raise CodecError("orientation must lie in (-90, 90] degrees")
    return attrs


def _align_base_mid(attrs: AttributeVector, model: CodecModel) -> np.ndarray:
    """Valve-midpoint position that puts the canonical epicardium centroid
    at ``(epi_cx, epi_cy)``.

    Runs the same rasterize-measure-shift loop during encode and decode, on
    the residual-free canonical shape, so both sides agree on the reference
    curve for any given attribute values.
    """
    lateral, axial = _axis_frame(attrs.lv_orientation)
    pts_local = _dense_arc(attrs, model)
    world_dirs = np.stack([lateral, axial])
    target = np.array([attrs.epi_cx, attrs.epi_cy])
    base_mid = target - 0.5 * attrs.lv_length * axial
    for _ in range(_CENTROID_MAX_ITERS):
        pts = base_mid + pts_local @ world_dirs
        lv = rasterize_polygon(pts, model.width, model.height, model.spacing_mm)
        if not lv.any():
            raise CodecError("canonical contour rasterized to an empty mask")
        myo = _myo_band(lv, base_mid, axial, attrs.myo_area, model)
        epi_xy = _mask.pixel_coords_mm(lv | myo, model.spacing_mm)
        delta = target - epi_xy.mean(axis=0)
        if float(np.hypot(*delta)) <= _CENTROID_TOL_MM:
            break
        base_mid = base_mid + delta
    return base_mid


def _myo_band(
    lv: np.ndarray,
    base_mid: np.ndarray,
    axial: np.ndarray,
    target_area: float,
    model: CodecModel,
) -> np.ndarray:
    """Myocardial band: nearest eligible pixels until the area budget is met."""
    sx, sy = model.spacing_mm
    pixel_area = sx * sy
    target_px = int(round(target_area / pixel_area))
    if target_px < 1:
        raise CodecError("myocardium area smaller than one pixel")
    dist = ndimage.distance_transform_edt(~lv, sampling=(sy, sx))
    cols, rows = np.meshgrid(np.arange(lv.shape[1]), np.arange(lv.shape[0]))
    eta = (cols * sx - base_mid[0]) * axial[0] + (rows * sy - base_mid[1]) * axial[1]
    eligible = (~lv) & (eta >= 0.0)
    flat = np.flatnonzero(eligible)
    if flat.size < target_px:
        raise CodecError(
            f"cannot fit myocardium of {target_area:.0f} mm^2: "
            f"only {flat.size} eligible pixels"
        )
    order = np.argsort(dist.ravel()[flat], kind="stable")
    chosen = flat[order[:target_px]]
    myo = np.zeros(lv.shape, dtype=bool)
    myo.ravel()[chosen] = True
    return myo


def _render(
    attrs: AttributeVector, residuals: np.ndarray, model: CodecModel
) -> LabelMap:
    """Rasterize cavity and myocardium at the canonical placement."""
    lateral, axial = _axis_frame(attrs.lv_orientation)
    base_mid = _align_base_mid(attrs, model)
    world_dirs = np.stack([lateral, axial])  # local (lat, ax) -> image (x, y)

    # Displace the dense polyline, not the station-sampled one: the harmonic
    # profile is continuous in arc length, and a coarse polygon would blunt
    # the apex by a visible fraction of a millimetre.
    dense = _dense_arc(attrs, model)
    u, normals_local = _arc_geometry(dense)
    mixing = _drift_correction(dense, u, normals_local, model.harmonics)
    dev = _residual_profile(u, residuals, mixing, model)
    pts = base_mid + (dense + dev[:, None] * normals_local) @ world_dirs
    lv = rasterize_polygon(pts, model.width, model.height, model.spacing_mm)
    if not lv.any():
        raise CodecError("decoded cavity rasterized to an empty mask")
    myo = _myo_band(lv, base_mid, axial, attrs.myo_area, model)
    labels = np.zeros((model.height, model.width), dtype=np.uint8)
    labels[lv] = LV
    labels[myo] = MYO
    out = LabelMap(labels, model.spacing_mm)
    _check_inside_frame(out)
    return out


def _check_inside_frame(frame: LabelMap) -> None:
    lab = frame.labels
    if lab[0, :].any() or lab[-1, :].any() or lab[:, 0].any() or lab[:, -1].any():
        raise CodecError("decoded shape touches the image border; geometry too large")


def decode(z: np.ndarray, model: CodecModel) -> LabelMap:
    """Render a latent vector to a label map.  Deterministic."""
    attrs = _validate_latent(z)
    residuals = np.asarray(z, dtype=np.float64)[N_ATTRS:]
    return _render(attrs, residuals, model)


# ---------------------------------------------------------------------------
# Encode
# ---------------------------------------------------------------------------


def _observed_arc(
    frame: LabelMap, corner_a: np.ndarray, corner_b: np.ndarray, base_mid: np.ndarray
) -> np.ndarray:
    """Endocardial contour from corner A around the apex to corner B, in mm."""
    lv = _mask.largest_component(frame.labels == LV)
    lv = ndimage.binary_fill_holes(lv)
    contours = measure.find_contours(lv.astype(float), 0.5)
    if not contours:
        raise CodecError("no endocardial contour found")
    contour = max(contours, key=len)
    sx, sy = frame.spacing_mm
    xy = np.column_stack([contour[:, 1] * sx, contour[:, 0] * sy])
    if np.allclose(xy[0], xy[-1]):
        xy = xy[:-1]
    n = len(xy)
    if n < 8:
        raise CodecError("endocardial contour too short")
    ia = int(np.argmin(np.einsum("ij,ij->i", xy - corner_a, xy - corner_a)))
    ib = int(np.argmin(np.einsum("ij,ij->i", xy - corner_b, xy - corner_b)))
    if ia == ib:
        raise CodecError("valve corners collapsed onto one contour vertex")
    idx_fwd = np.arange(ia, ia + (ib - ia) % n + 1) % n
    idx_bwd = np.arange(ia, ia - ((ia - ib) % n) - 1, -1) % n
    arc_fwd, arc_bwd = xy[idx_fwd], xy[idx_bwd]

    def max_reach(arc: np.ndarray) -> float:
        d = arc - base_mid
        return float(np.einsum("ij,ij->i", d, d).max())

    return arc_fwd if max_reach(arc_fwd) >= max_reach(arc_bwd) else arc_bwd


def _normal_offsets(
    pts: np.ndarray, normals: np.ndarray, polyline: np.ndarray
) -> np.ndarray:
    """Signed distance from each point to the polyline along its normal.

    The offset is read where the polyline crosses the point's normal line
    (the crossing closest to the point wins).  This geometric correspondence
    is immune to the parameterization distortion of pixelated contours,
    whose staircase inflates arc length unevenly along the curve.
    """
    out = np.empty(len(pts))
    for i, (p, n) in enumerate(zip(pts, normals)):
        rel = polyline - p
        t_coord = rel @ np.array([-n[1], n[0]])
        n_coord = rel @ n
        sign_change = (t_coord[:-1] * t_coord[1:] <= 0) & (
            np.abs(t_coord[:-1] - t_coord[1:]) > 1e-12
        )
        seg = np.nonzero(sign_change)[0]
        candidates = np.empty(0)
        if seg.size:
            frac = t_coord[seg] / (t_coord[seg] - t_coord[seg + 1])
            candidates = n_coord[seg] + frac * (n_coord[seg + 1] - n_coord[seg])
            # Distant crossings sit on the opposite flank of the shape
            # (the normal line re-enters the contour there); genuine offsets
            # are a few millimetres at most.
            candidates = candidates[np.abs(candidates) <= 8.0]
        if candidates.size:
            # A pixelated polyline zigzags about the true curve, so the
            # normal line may cross it several times within a pixel. Taking
            # the median of the crossings stays unbiased; taking the
            # smallest would shrink every offset by the staircase amplitude.
            anchor = candidates[int(np.argmin(np.abs(candidates)))]
            cluster = candidates[np.abs(candidates - anchor) <= 2.0]
            out[i] = float(np.median(cluster))
        else:  # no usable crossing (the polyline ends at the corners)
            out[i] = n_coord[int(np.argmin(t_coord**2 + n_coord**2))]
    return out


def encode(frame: LabelMap, model: CodecModel) -> np.ndarray:
    """Project a label map to the 16-dimensional latent space."""
    if frame.labels.shape != (model.height, model.width):
        raise CodecError(
            f"frame is {frame.labels.shape}, codec model expects "
            f"({model.height}, {model.width})"
        )
    if frame.spacing_mm != model.spacing_mm:
        raise CodecError("frame spacing differs from codec model spacing")
    attrs = extract_attributes(frame)

    lateral, axial = _axis_frame(attrs.lv_orientation)
    pts_local, normals_local = canonical_contour(attrs, model)
    world_dirs = np.stack([lateral, axial])
    # Place the canonical shape exactly as decode does, so encode and decode
    # measure deviations against the same reference curve.
    base_mid = _align_base_mid(attrs, model)
    canon = base_mid + pts_local @ world_dirs
    normals = normals_local @ world_dirs
    arc = _observed_arc(frame, canon[0], canon[-1], base_mid)
    dev = _normal_offsets(canon, normals, arc)
    # Fit in the same drift-corrected basis that decode renders with.  The
    # raw corrective modes ride along as nuisance columns: smooth leftover
    # mismatch (the extracted attributes are a fraction of a pixel off the
    # values the shape was drawn with, which bows the reconstructed
    # canonical) lands on those columns instead of contaminating the
    # harmonic coefficients.  Stations are weighted by the taper envelope:
    # near the corners the basis carries no signal, while the reference
    # mismatch peaks there (a base-width error offsets the curve ends, which
    # no tapered profile can express), so unweighted least squares would
    # bend interior coefficients to chase content the model cannot explain.
    dense = _dense_arc(attrs, model)
    u_dense, n_dense = _arc_geometry(dense)
    mixing = _drift_correction(dense, u_dense, n_dense, model.harmonics)
    stations = np.linspace(0.0, 1.0, model.contour_samples)
    modes = _drift_fields(stations)
    design = np.concatenate(
        [_harmonic_fields(stations, model.harmonics) - modes @ mixing, modes],
        axis=1,
    )
    weights = np.sin(np.pi * stations)
    coef, *_ = np.linalg.lstsq(design * weights[:, None], dev * weights, rcond=None)
    z = np.empty(LATENT_DIM)
    z[:N_ATTRS] = attrs.as_array()
    z[N_ATTRS:] = coef[: model.harmonics] / model.residual_scale_mm
    return z


def sample_valid_latent(rng: np.random.Generator, model: CodecModel) -> np.ndarray:
    """Draw one latent from the anatomically plausible envelope.

    The ranges describe a mid-ventricular short-axis-like cavity at the
    default 0.7 mm grid: elongated (width 42-55 % of a 68-90 mm length),
    moderately bulged flanks, tilt between 8 and 25 degrees either way, a
    myocardium half to seven tenths of the cavity area, and the shape
    roughly centred in the field of view.  The bulge is floored so the apex
    keeps a tip radius of at least 5 mm; blunt apexes are both the
    anatomical norm and what a pixel grid can represent faithfully.
    Residual amplitudes fall off with cosine order, as real contour detail
    does.
    """
    length = rng.uniform(68.0, 90.0)
    width = rng.uniform(0.42, 0.55) * length
    min_bulge = np.sqrt(5.0 * length) - 0.5 * width
    bulge = rng.uniform(max(-0.10 * width, min_bulge), 0.35 * width)
    area = np.pi * width * length / 4.0 + 2.0 * bulge * length / 3.0
    theta = rng.choice([-1.0, 1.0]) * rng.uniform(8.0, 25.0)
    myo = rng.uniform(0.50, 0.70) * area
    centre = 0.5 * model.width * model.spacing_mm[0]
    cx = centre + rng.uniform(-6.0, 6.0)
    cy = 0.5 * model.height * model.spacing_mm[1] + rng.uniform(-6.0, 6.0)
    residuals = rng.uniform(-0.06, 0.06, size=model.harmonics)
    residuals /= _harmonic_orders(model.harmonics)
    return np.concatenate([[area, width, length, theta, myo, cx, cy], residuals])


# ---------------------------------------------------------------------------
# Sequences and external-codec hand-off
# ---------------------------------------------------------------------------


def encode_sequence(seq: SegSequence, model: CodecModel) -> np.ndarray:
    """(T, 16) latent trajectory of a sequence."""
    rows = []
    for t, frame in enumerate(seq.frames):
        try:
            rows.append(encode(frame, model))
        except CodecError as exc:
            raise CodecError(f"frame {t}: {exc}") from exc
    return np.vstack(rows)


def decode_sequence(trajectory: np.ndarray, model: CodecModel) -> list[LabelMap]:
    """Render every row of a latent trajectory."""
    trajectory = np.asarray(trajectory, dtype=np.float64)
    if trajectory.ndim != 2 or trajectory.shape[1] != LATENT_DIM:
        raise CodecError(f"trajectory must be (T, {LATENT_DIM})")
    frames = []
    for t in range(trajectory.shape[0]):
        try:
            frames.append(decode(trajectory[t], model))
        except CodecError as exc:
            raise CodecError(f"frame {t}: {exc}") from exc
    return frames


def external_codec_roundtrip(
    latent_in: str | Path,
    latent_out: str | Path,
    transform: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """Apply a trajectory transform to an externally produced ``latent.csv``.

    Lets a third-party encoder/decoder own the pixel side: it writes
    ``latent.csv``, this function maps the trajectory through ``transform``
    (typically the regularizer) and writes the result back in the same
    format.
    """
    traj = read_latent_table(latent_in)
    out = np.asarray(transform(traj), dtype=np.float64)
    if out.shape != traj.shape:
        raise CodecError(f"transform changed trajectory shape {traj.shape} -> {out.shape}")
    write_latent_table(latent_out, out)
    return out
