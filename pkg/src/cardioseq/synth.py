"""Synthetic cardiac cycles and controlled corruptions.

A cycle is an analytic latent trajectory rendered frame by frame through the
shape codec: every attribute follows a raised-cosine contraction from
end-diastole (ED) to end-systole (ES) and back, and the residual dimensions
drift slowly with small random phases.  The generator returns the rendered
sequence together with the analytic series and trajectory, which downstream
tests use as exact ground truth.

Corruptions reproduce the two artifact families seen in real sequence
predictions -- value spikes along an attribute's temporal curve and abrupt
whole-frame displacements -- plus two pixel-space defects (boundary dropout,
high-frequency contour jitter).  Every corruption touches only the frames it
was asked to touch and is deterministic given its seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import codec as codec_mod
from .attributes import AttributeSeries, series_from_matrix
from .codec import CodecModel, decode, encode
from .errors import CardioseqError
from .seqio import (
    ATTRIBUTE_NAMES,
    LATENT_DIM,
    LabelMap,
    SegSequence,
    SequenceManifest,
)

N_ATTRS = len(ATTRIBUTE_NAMES)

CORRUPTION_KINDS = (
    "attribute_spike",
    "frame_shift",
    "blob_dropout",
    "contour_jitter",
)


# ---------------------------------------------------------------------------
# Cycle parameters and generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CycleParams:
    """Shape and motion of one synthetic cardiac cycle.

    ``*_swing`` values are the ED-to-ES change of an attribute; the attribute
    moves by the full swing at end-systole and returns to its base value at
    the end of the cycle.  Widths and lengths shrink by their swing, the
    myocardium area and the centroid coordinates grow by theirs (wall
    thickening, base descent).  ``residual_drift`` scales the slow sinusoidal
    motion of the residual shape dimensions.
    """

    n_frames: int = 40
    lv_area_ed: float = 3300.0
    lv_area_es: float = 1980.0
    es_fraction: float = 0.35
    width_mm: float = 40.0
    width_swing_mm: float = 9.0
    length_mm: float = 82.0
    length_swing_mm: float = 10.0
    orientation_deg: float = 12.0
    orientation_swing_deg: float = 3.0
    myo_area_mm2: float = 1900.0
    myo_swing_mm2: float = 120.0
    cx_mm: float = 78.4
    cy_mm: float = 78.4
    cx_swing_mm: float = 0.6
    cy_swing_mm: float = 2.0
    residual_drift: float = 0.02
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_frames < 8:
            raise ValueError("a cycle needs at least 8 frames")
        if not (self.lv_area_ed > self.lv_area_es > 0):
            raise ValueError("need lv_area_ed > lv_area_es > 0")
        if not (0.0 < self.es_fraction < 1.0):
            raise ValueError("es_fraction must lie strictly between 0 and 1")
        if self.width_mm <= self.width_swing_mm:
            raise ValueError("width swing must leave a positive ES width")
        if self.length_mm <= self.length_swing_mm:
            raise ValueError("length swing must leave a positive ES length")
        if self.myo_area_mm2 <= 0:
            raise ValueError("myocardium area must be positive")
        if self.residual_drift < 0:
            raise ValueError("residual drift must be non-negative")


def systole_weight(n_frames: int, es_fraction: float) -> np.ndarray:
    """Raised-cosine contraction weight per frame: 0 at ED, 1 at ES, 0 again.

    The cycle runs over normalized time [0, 1]; the weight rises smoothly to
    1 at ``es_fraction`` and relaxes back to 0 at the final frame.
    """
    t = np.linspace(0.0, 1.0, n_frames)
    w = np.empty(n_frames)
    systole = t <= es_fraction
    w[systole] = 0.5 * (1.0 - np.cos(np.pi * t[systole] / es_fraction))
    w[~systole] = 0.5 * (
        1.0 + np.cos(np.pi * (t[~systole] - es_fraction) / (1.0 - es_fraction))
    )
    return w


def cycle_trajectory(params: CycleParams) -> np.ndarray:
    """Analytic (T, 16) latent trajectory of a cycle.  Deterministic per seed."""
    T = params.n_frames
    phi = systole_weight(T, params.es_fraction)
    traj = np.empty((T, LATENT_DIM))
    traj[:, 0] = params.lv_area_ed + (params.lv_area_es - params.lv_area_ed) * phi
    traj[:, 1] = params.width_mm - params.width_swing_mm * phi
    traj[:, 2] = params.length_mm - params.length_swing_mm * phi
    traj[:, 3] = params.orientation_deg + params.orientation_swing_deg * phi
    traj[:, 4] = params.myo_area_mm2 + params.myo_swing_mm2 * phi
    traj[:, 5] = params.cx_mm + params.cx_swing_mm * phi
    traj[:, 6] = params.cy_mm + params.cy_swing_mm * phi

    rng = np.random.default_rng(params.seed)
    t = np.linspace(0.0, 1.0, T)
    orders = codec_mod._harmonic_orders(LATENT_DIM - N_ATTRS)
    for j, order in enumerate(orders):
        amp = params.residual_drift * rng.uniform(0.25, 1.0) / order
        phase = rng.uniform(0.0, 2.0 * np.pi)
        traj[:, N_ATTRS + j] = amp * np.sin(2.0 * np.pi * t + phase)
    return traj


@dataclass
class CycleData:
    """Everything :func:`gen_cycle` knows about one synthetic sequence."""

    sequence: SegSequence
    series: list[AttributeSeries]
    trajectory: np.ndarray  # (T, 16) analytic ground truth
    params: CycleParams
    model: CodecModel


def gen_cycle(params: CycleParams, model: CodecModel | None = None) -> CycleData:
    """Render one synthetic cycle through the codec.

    Returns the rendered frames together with the analytic attribute series
    and latent trajectory they were drawn from.  Extreme parameters (for
    example a cavity area unreachable at the requested width and length)
    surface as codec errors from the per-frame decode.
    """
    model = model or CodecModel()
    traj = cycle_trajectory(params)
    frames = [decode(traj[t], model) for t in range(params.n_frames)]
    manifest = SequenceManifest(
        patient_id=f"synth-{params.seed:08d}",
        frame_files=tuple(f"frames/frame_{t:04d}.pgm" for t in range(params.n_frames)),
        width=model.width,
        height=model.height,
        spacing_mm=model.spacing_mm,
    )
    seq = SegSequence(manifest=manifest, frames=frames)
    series = series_from_matrix(traj[:, :N_ATTRS], domain="image")
    return CycleData(sequence=seq, series=series, trajectory=traj, params=params, model=model)


def _tip_radius_ok(area: float, width: float, length: float) -> bool:
    # Same apex-bluntness floor as codec.sample_valid_latent: the egg profile
    # keeps a tip radius of at least 5 mm, which the pixel grid can render
    # and re-measure faithfully.
    bulge = 1.5 * area / length - 3.0 * np.pi * width / 8.0
    return 0.5 * width + bulge >= np.sqrt(5.0 * length)


def sample_params(rng: np.random.Generator, n_frames: int | None = None) -> CycleParams:
    """Draw plausible cycle parameters ("one patient") from a seeded generator.

    Sequences run 30-50 frames unless a length is forced.  Rejection sampling
    keeps the apex blunt at every phase of the cycle so each frame stays
    within the codec's valid envelope.
    """
    if n_frames is None:
        n_frames = int(rng.integers(30, 51))
    for _ in range(200):
        length = rng.uniform(74.0, 88.0)
        width = rng.uniform(0.44, 0.52) * length
        bulge = rng.uniform(0.05, 0.30) * width
        area_ed = np.pi * width * length / 4.0 + 2.0 * bulge * length / 3.0
        ef = rng.uniform(0.32, 0.50)
        area_es = (1.0 - ef) * area_ed
        width_swing = rng.uniform(0.18, 0.28) * width
        length_swing = rng.uniform(0.09, 0.15) * length
        phis = np.linspace(0.0, 1.0, 5)
        ok = all(
            _tip_radius_ok(
                area_ed + (area_es - area_ed) * p,
                width - width_swing * p,
                length - length_swing * p,
            )
            for p in phis
        )
        if not ok:
            continue
        centre = 78.4
        return CycleParams(
            n_frames=n_frames,
            lv_area_ed=float(area_ed),
            lv_area_es=float(area_es),
            es_fraction=0.35,
            width_mm=float(width),
            width_swing_mm=float(width_swing),
            length_mm=float(length),
            length_swing_mm=float(length_swing),
            orientation_deg=float(rng.choice([-1.0, 1.0]) * rng.uniform(8.0, 20.0)),
            orientation_swing_deg=float(rng.choice([-1.0, 1.0]) * rng.uniform(1.5, 4.0)),
            myo_area_mm2=float(rng.uniform(0.52, 0.65) * area_ed),
            myo_swing_mm2=float(rng.uniform(60.0, 160.0)),
            cx_mm=float(centre + rng.uniform(-5.0, 5.0)),
            cy_mm=float(centre + rng.uniform(-5.0, 5.0)),
            cx_swing_mm=float(rng.uniform(-1.0, 1.0)),
            cy_swing_mm=float(rng.uniform(0.5, 2.5)),
            residual_drift=float(rng.uniform(0.01, 0.03)),
            seed=int(rng.integers(2**31)),
        )
    raise CardioseqError("could not sample valid cycle parameters")


# ---------------------------------------------------------------------------
# Corruption
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorruptionSpec:
    """One corruption event.

    ``magnitude`` units depend on the kind:

    attribute_spike
        raw units of the target attribute (mm^2, mm or degrees) added to the
        latent attribute at each listed frame; the sign is drawn from the
        seed.  ``attribute`` names the target, or is drawn when omitted.
    frame_shift
        vertical whole-frame translation in pixels (rounded); direction
        drawn from the seed, vacated rows zero-filled.
    blob_dropout
        radius in mm of a background disk punched at a random point of the
        epicardial boundary.
    contour_jitter
        standard deviation of white noise added to the nine residual latent
        dimensions (latent units) before re-rendering the frame.

    A magnitude of zero leaves the sequence unchanged for every kind.
    Frames may be given explicitly; otherwise ``count`` frames are drawn
    without replacement from the seed.
    """

    kind: str
    magnitude: float
    frames: tuple[int, ...] | None = None
    count: int = 1
    attribute: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in CORRUPTION_KINDS:
            raise ValueError(f"unknown corruption kind {self.kind!r}")
        if self.magnitude < 0:
            raise ValueError("corruption magnitude must be non-negative")
        if self.frames is not None and len(self.frames) == 0:
            raise ValueError("explicit frame list must not be empty")
        if self.frames is None and self.count < 1:
            raise ValueError("count must be at least 1")
        if self.attribute is not None and self.attribute not in ATTRIBUTE_NAMES:
            raise ValueError(f"unknown attribute {self.attribute!r}")


def _resolve_frames(spec: CorruptionSpec, n_frames: int, rng: np.random.Generator) -> list[int]:
    if spec.frames is not None:
        frames = [int(t) for t in spec.frames]
        bad = [t for t in frames if not 0 <= t < n_frames]
        if bad:
            raise ValueError(f"corruption frames {bad} outside [0, {n_frames})")
        if len(set(frames)) != len(frames):
            raise ValueError("corruption frames must be distinct")
        return frames
    if spec.count > n_frames:
        raise ValueError(f"cannot corrupt {spec.count} of {n_frames} frames")
    return sorted(int(t) for t in rng.choice(n_frames, size=spec.count, replace=False))


def _shift_frame(labels: np.ndarray, dy: int) -> np.ndarray:
    out = np.zeros_like(labels)
    if dy > 0:
        out[dy:, :] = labels[:-dy, :]
    elif dy < 0:
        out[:dy, :] = labels[-dy:, :]
    else:
        out[:, :] = labels
    return out


def _dropout_frame(
    frame: LabelMap, radius_mm: float, rng: np.random.Generator
) -> np.ndarray:
    from . import _mask

    labels = frame.labels.copy()
    epi = labels > 0
    boundary = _mask.boundary_4(epi)
    coords = np.argwhere(boundary)
    if coords.size == 0:
        return labels
    r0, c0 = coords[rng.integers(len(coords))]
    sx, sy = frame.spacing_mm
    cols, rows = np.meshgrid(np.arange(labels.shape[1]), np.arange(labels.shape[0]))
    d2 = ((cols - c0) * sx) ** 2 + ((rows - r0) * sy) ** 2
    labels[d2 <= radius_mm**2] = 0
    return labels


def corrupt(
    target: SegSequence | np.ndarray,
    spec: CorruptionSpec,
    model: CodecModel | None = None,
) -> SegSequence:
    """Apply one corruption event and return the damaged sequence.

    ``target`` is either a rendered sequence or a (T, 16) latent trajectory;
    a trajectory is rendered first (for trajectories produced by
    :func:`gen_cycle` the untouched frames come out bit-identical to the
    clean render).  Latent-space corruptions on a pixel sequence go through
    an encode/decode round trip of the affected frames only.
    """
    model = model or CodecModel()
    if isinstance(target, np.ndarray):
        traj = np.asarray(target, dtype=np.float64)
        if traj.ndim != 2 or traj.shape[1] != LATENT_DIM:
            raise ValueError(f"trajectory must be (T, {LATENT_DIM}), got {traj.shape}")
        frames = [decode(traj[t], model) for t in range(traj.shape[0])]
        manifest = SequenceManifest(
            patient_id="trajectory",
            frame_files=tuple(f"frames/frame_{t:04d}.pgm" for t in range(len(frames))),
            width=model.width,
            height=model.height,
            spacing_mm=model.spacing_mm,
        )
        seq = SegSequence(manifest=manifest, frames=frames)
        latent_rows: dict[int, np.ndarray] = {t: traj[t] for t in range(traj.shape[0])}
    else:
        seq = target
        latent_rows = {}

    rng = np.random.default_rng(spec.seed)
    picked = _resolve_frames(spec, len(seq), rng)
    out_frames = [fr.copy() for fr in seq.frames]
    if spec.magnitude == 0:
        return SegSequence(manifest=seq.manifest, frames=out_frames)

    if spec.kind == "attribute_spike":
        attr = spec.attribute or str(rng.choice(ATTRIBUTE_NAMES))
        k = ATTRIBUTE_NAMES.index(attr)
        sign = float(rng.choice([-1.0, 1.0]))
        for t in picked:
            z = latent_rows.get(t)
            z = encode(out_frames[t], model) if z is None else z.copy()
            z[k] += sign * spec.magnitude
            out_frames[t] = decode(z, model)
    elif spec.kind == "frame_shift":
        dy = int(round(spec.magnitude)) * int(rng.choice([-1, 1]))
        for t in picked:
            out_frames[t] = LabelMap(
                _shift_frame(out_frames[t].labels, dy), out_frames[t].spacing_mm
            )
    elif spec.kind == "blob_dropout":
        for t in picked:
            out_frames[t] = LabelMap(
                _dropout_frame(out_frames[t], spec.magnitude, rng),
                out_frames[t].spacing_mm,
            )
    else:  # contour_jitter
        for t in picked:
            z = latent_rows.get(t)
            z = encode(out_frames[t], model) if z is None else z.copy()
            z[N_ATTRS:] += rng.normal(0.0, spec.magnitude, size=LATENT_DIM - N_ATTRS)
            out_frames[t] = decode(z, model)

    return SegSequence(manifest=seq.manifest, frames=out_frames)


# ---------------------------------------------------------------------------
# Standard corruption battery
# ---------------------------------------------------------------------------

#: Spike targets: the cavity and myocardium areas are excluded so the
#: ejection fraction of a corrupted sequence stays meaningful (an area spike
#: that lands on the ED or ES frame would redefine the measured extremes).
_SPIKE_TARGETS = ("lv_base_width", "lv_length", "lv_orientation", "epi_cx", "epi_cy")

_SPIKE_FLOORS = {
    "lv_base_width": 6.0,
    "lv_length": 7.0,
    "lv_orientation": 10.0,
    "epi_cx": 5.0,
    "epi_cy": 5.0,
}


def _pick_window(
    rng: np.random.Generator, n_frames: int, run: int, used: set[int]
) -> tuple[int, ...] | None:
    """A run of consecutive frames away from the ends and from other events."""
    candidates = [
        start
        for start in range(2, n_frames - 2 - run + 1)
        if not any(t in used for t in range(start - 1, start + run + 1))
    ]
    if not candidates:
        return None
    start = int(rng.choice(candidates))
    return tuple(range(start, start + run))


@dataclass
class CorruptionOutcome:
    sequence: SegSequence
    specs: list[CorruptionSpec] = field(default_factory=list)

    @property
    def corrupted_frames(self) -> list[int]:
        frames: set[int] = set()
        for s in self.specs:
            frames.update(s.frames or ())
        return sorted(frames)


def corrupt_battery(
    data: CycleData,
    rng: np.random.Generator,
    kinds: Sequence[str] = CORRUPTION_KINDS,
) -> CorruptionOutcome:
    """Damage one clean cycle with a randomized mix of corruption events.

    Spikes target individual attributes at 60-100 % of their observed swing
    (floored for low-swing attributes so every spike is visible); shifts
    displace runs of 1-3 consecutive frames by 12-18 pixels (consecutive runs
    are what temporal majority-vote baselines fail to repair); dropout and
    jitter are pixel-space defects added with moderate probability.  Events
    never overlap and keep two clean frames at each end of the sequence.
    """
    for kind in kinds:
        if kind not in CORRUPTION_KINDS:
            raise ValueError(f"unknown corruption kind {kind!r}")
    T = data.params.n_frames
    traj = data.trajectory
    used: set[int] = set()
    specs: list[CorruptionSpec] = []

    def add(kind: str, run: int, magnitude: float, attribute: str | None = None) -> None:
        window = _pick_window(rng, T, run, used)
        if window is None:
            return
        used.update(window)
        specs.append(
            CorruptionSpec(
                kind=kind,
                magnitude=magnitude,
                frames=window,
                attribute=attribute,
                seed=int(rng.integers(2**31)),
            )
        )

    if "attribute_spike" in kinds:
        for _ in range(4):
            attr = str(rng.choice(_SPIKE_TARGETS))
            k = ATTRIBUTE_NAMES.index(attr)
            swing = float(np.ptp(traj[:, k]))
            magnitude = rng.uniform(0.6, 1.0) * max(swing, _SPIKE_FLOORS[attr])
            run = int(rng.choice([1, 2], p=[0.7, 0.3]))
            add("attribute_spike", run, float(magnitude), attr)
    if "frame_shift" in kinds:
        for _ in range(5):
            run = int(rng.choice([1, 2, 3], p=[0.6, 0.25, 0.15]))
            add("frame_shift", run, float(rng.uniform(12.0, 18.0)))
    if "blob_dropout" in kinds and rng.random() < 0.5:
        add("blob_dropout", 1, float(rng.uniform(5.0, 8.0)))
    if "contour_jitter" in kinds and rng.random() < 0.4:
        add("contour_jitter", int(rng.choice([1, 2])), float(rng.uniform(0.05, 0.09)))

    seq = data.sequence
    for spec in specs:
        seq = corrupt(seq, spec, data.model)
    return CorruptionOutcome(sequence=seq, specs=specs)
