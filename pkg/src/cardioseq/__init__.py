"""Temporal-consistency detection and repair for cardiac segmentation sequences.

The package follows one pipeline: segmentation masks are mapped to a
16-dimensional shape code (7 interpretable attributes + 9 contour-residual
coefficients), every code dimension is checked and smoothed as a time
series, and the repaired codes are rendered back to masks.

Module map:

- :mod:`cardioseq.seqio` — sequence/label-map containers and file formats.
- :mod:`cardioseq.attributes` — per-frame attribute extraction, min-max
  normalization.
- :mod:`cardioseq.consistency` — second-difference indicator, threshold
  calibration, reports.
- :mod:`cardioseq.regularizer` — penalized/constrained temporal smoothing.
- :mod:`cardioseq.codec` — deterministic mask<->latent codec.
- :mod:`cardioseq.synth` — synthetic cycles and corruption battery.
- :mod:`cardioseq.metrics` — Dice/HD/ASSD, EF, anatomical checks, Gaussian
  baseline.
- :mod:`cardioseq.cli` — the ``cardioseq`` command.
"""

from .attributes import (
    AttributeSeries,
    AttributeVector,
    NormalizationStats,
    compute_stats,
    denormalize_series,
    extract_attributes,
    extract_series,
    normalize_series,
)
from .codec import (
    CodecModel,
    decode,
    decode_sequence,
    encode,
    encode_sequence,
    external_codec_roundtrip,
    load_model,
    sample_valid_latent,
    save_model,
)
from .consistency import (
    ConsistencyReport,
    Thresholds,
    calibrate_thresholds,
    indicator,
    laplacian,
    load_thresholds,
    report,
    save_thresholds,
)
from .errors import (
    AttributeExtractionError,
    CardioseqError,
    CodecError,
    ConfigError,
    OptimizationError,
    SequenceFormatError,
)
from .metrics import (
    AnatomicalReport,
    PairEvaluation,
    anatomical_check,
    assd,
    dice,
    ef_from_areas,
    evaluate_pair,
    frame_metrics,
    gaussian_baseline,
    hausdorff,
)
from .regularizer import (
    RegularizerConfig,
    TrajectoryResult,
    closed_form_oracle,
    regularize_series,
    regularize_trajectory,
    smooth_constrained,
    smooth_penalized,
)
from .seqio import (
    ATTRIBUTE_NAMES,
    BACKGROUND,
    LATENT_DIM,
    LV,
    MYO,
    LabelMap,
    SegSequence,
    SequenceManifest,
    load_sequence,
    save_sequence,
)
from .synth import (
    CORRUPTION_KINDS,
    CorruptionSpec,
    CycleParams,
    corrupt,
    corrupt_battery,
    cycle_trajectory,
    gen_cycle,
    sample_params,
)

__version__ = "0.1.0"

__all__ = [
    "ATTRIBUTE_NAMES",
    "AnatomicalReport",
    "AttributeExtractionError",
    "AttributeSeries",
    "AttributeVector",
    "BACKGROUND",
    "CORRUPTION_KINDS",
    "CardioseqError",
    "CodecError",
    "CodecModel",
    "ConfigError",
    "ConsistencyReport",
    "CorruptionSpec",
    "CycleParams",
    "LATENT_DIM",
    "LV",
    "LabelMap",
    "MYO",
    "NormalizationStats",
    "OptimizationError",
    "PairEvaluation",
    "RegularizerConfig",
    "SegSequence",
    "SequenceFormatError",
    "SequenceManifest",
    "Thresholds",
    "TrajectoryResult",
    "anatomical_check",
    "assd",
    "calibrate_thresholds",
    "closed_form_oracle",
    "compute_stats",
    "corrupt",
    "corrupt_battery",
    "cycle_trajectory",
    "decode",
    "decode_sequence",
    "denormalize_series",
    "dice",
    "ef_from_areas",
    "encode",
    "encode_sequence",
    "evaluate_pair",
    "external_codec_roundtrip",
    "extract_attributes",
    "extract_series",
    "frame_metrics",
    "gaussian_baseline",
    "gen_cycle",
    "hausdorff",
    "indicator",
    "laplacian",
    "load_model",
    "load_sequence",
    "load_thresholds",
    "normalize_series",
    "regularize_series",
    "regularize_trajectory",
    "report",
    "sample_params",
    "sample_valid_latent",
    "save_model",
    "save_sequence",
    "save_thresholds",
    "smooth_constrained",
    "smooth_penalized",
    "__version__",
]
