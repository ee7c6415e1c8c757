"""Temporal-consistency indicator for attribute series.

A frame is temporally inconsistent for an attribute when the magnitude of the
discrete second difference (Laplacian) of its normalized series exceeds a
per-attribute threshold.  Series are edge-padded by repeating the first and
last samples, so no cyclicity is assumed and the output keeps the input
length.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .attributes import AttributeSeries
from .errors import CardioseqError
from .seqio import ATTRIBUTE_NAMES

#: Default multiplier applied to the largest reference Laplacian magnitude.
DEFAULT_SAFETY = 1.25
#: Default lower bound for calibrated thresholds (guards constant references).
DEFAULT_FLOOR = 1e-3


def laplacian(values: np.ndarray) -> np.ndarray:
    """Second difference ``s[t+1] + s[t-1] - 2 s[t]`` with edge replication.

    The series is padded with ``s[-1] := s[0]`` and ``s[T] := s[T-1]``, so the
    result has the same length as the input and the end entries reduce to
    first differences.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError("laplacian expects a 1-D series")
    if values.shape[0] < 3:
        raise ValueError("need at least 3 frames for a temporal Laplacian")
    padded = np.concatenate([values[:1], values, values[-1:]])
    return padded[2:] + padded[:-2] - 2.0 * padded[1:-1]


def indicator(values: np.ndarray, tau: float) -> np.ndarray:
    """Boolean per-frame flags: ``|laplacian| > tau``."""
    if not tau > 0:
        raise ValueError(f"threshold must be positive, got {tau}")
    return np.abs(laplacian(values)) > tau


@dataclass(frozen=True)
class Thresholds:
    """Per-attribute Laplacian thresholds for one domain."""

    taus: dict[str, float]

    def __getitem__(self, attribute: str) -> float:
        try:
            return self.taus[attribute]
        except KeyError as exc:
            raise CardioseqError(f"no threshold calibrated for {attribute!r}") from exc

    def to_dict(self) -> dict:
        return dict(self.taus)

    @classmethod
    def from_dict(cls, d: Mapping[str, float]) -> "Thresholds":
        return cls(taus={str(k): float(v) for k, v in d.items()})


def calibrate_thresholds(
    reference: Iterable[AttributeSeries],
    safety: float = DEFAULT_SAFETY,
    floor: float = DEFAULT_FLOOR,
) -> Thresholds:
    """Per-attribute thresholds from the largest Laplacian seen on references.

    ``tau_a = max(safety * max |laplacian(s_a)|, floor)`` where the inner max
    runs over every reference series of attribute ``a``.  References are
    expected to be normalized, consistent (clean) series; the safety factor
    buys headroom so clean data never trips the indicator.
    """
    if not safety > 0:
        raise ValueError("safety factor must be positive")
    if not floor > 0:
        raise ValueError("threshold floor must be positive")
    peaks: dict[str, float] = {}
    for s in reference:
        peak = float(np.abs(laplacian(s.values)).max())
        peaks[s.attribute] = max(peaks.get(s.attribute, 0.0), peak)
    if not peaks:
        raise CardioseqError("no reference series given for calibration")
    return Thresholds(taus={a: max(safety * p, floor) for a, p in peaks.items()})


@dataclass
class ConsistencyReport:
    """Outcome of checking one sequence's series against thresholds."""

    attributes: tuple[str, ...]
    flags: np.ndarray  # (n_attributes, T) bool
    laplacians: np.ndarray  # (n_attributes, T) float
    taus: dict[str, float] = field(default_factory=dict)

    @property
    def any_inconsistent(self) -> bool:
        return bool(self.flags.any())

    @property
    def frames_inconsistent(self) -> np.ndarray:
        """Per-frame flag: any attribute inconsistent at that frame."""
        return self.flags.any(axis=0)

    @property
    def ratio_stat(self) -> float:
        """Mean of ``|laplacian| / tau`` over all attributes and frames."""
        taus = np.array([self.taus[a] for a in self.attributes])[:, None]
        return float((np.abs(self.laplacians) / taus).mean())

    def to_dict(self) -> dict:
        return {
            "any_inconsistent": self.any_inconsistent,
            "ratio_stat": self.ratio_stat,
            "n_frames": int(self.flags.shape[1]),
            "n_flagged_frames": int(self.frames_inconsistent.sum()),
            "per_attribute": {
                a: {
                    "tau": self.taus[a],
                    "flagged_frames": [int(t) for t in np.nonzero(self.flags[k])[0]],
                    "max_abs_laplacian": float(np.abs(self.laplacians[k]).max()),
                }
                for k, a in enumerate(self.attributes)
            },
        }


def report(series: Sequence[AttributeSeries], thresholds: Thresholds) -> ConsistencyReport:
    """Evaluate the indicator for every attribute series of one sequence."""
    series = list(series)
    if not series:
        raise CardioseqError("no series to check")
    lengths = {len(s.values) for s in series}
    if len(lengths) != 1:
        raise CardioseqError(f"series lengths differ: {sorted(lengths)}")
    order = [s.attribute for s in series]
    known = [a for a in ATTRIBUTE_NAMES if a in order]
    if set(order) == set(ATTRIBUTE_NAMES):
        order = known  # canonical ordering when the full set is present
    by_name = {s.attribute: s for s in series}
    laps = np.vstack([laplacian(by_name[a].values) for a in order])
    taus = {a: thresholds[a] for a in order}
    flags = np.abs(laps) > np.array([taus[a] for a in order])[:, None]
    return ConsistencyReport(
        attributes=tuple(order), flags=flags, laplacians=laps, taus=taus
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def save_thresholds(path: str | Path, per_domain: Mapping[str, Thresholds]) -> None:
    payload = {dom: th.to_dict() for dom, th in per_domain.items()}
    Path(path).write_text(json.dumps(payload, indent=2))


def load_thresholds(path: str | Path) -> dict[str, Thresholds]:
    path = Path(path)
    if not path.is_file():
        raise CardioseqError(f"missing thresholds file: {path}")
    payload = json.loads(path.read_text())
    return {dom: Thresholds.from_dict(d) for dom, d in payload.items()}


def save_report_csv(path: str | Path, rep: ConsistencyReport) -> None:
    """Per-frame flag table: one row per frame, one column per attribute."""
    lines = ["frame," + ",".join(rep.attributes)]
    for t in range(rep.flags.shape[1]):
        lines.append(f"{t}," + ",".join(str(int(v)) for v in rep.flags[:, t]))
    Path(path).write_text("\n".join(lines) + "\n")
