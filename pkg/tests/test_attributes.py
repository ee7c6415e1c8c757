import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cardioseq.attributes import (
    ATTRIBUTE_NAMES,
    AttributeExtractionError,
    AttributeSeries,
    AttributeVector,
    DegenerateBaseError,
    DegenerateStatsError,
    NormalizationStats,
    compute_stats,
    denormalize_series,
    extract_attributes,
    normalize_series,
    series_from_matrix,
    series_matrix,
)
from cardioseq.seqio import LabelMap


def box_phantom(spacing=(1.0, 1.0)):
    """LV rectangle rows 10-19 x cols 12-17 in a U-shaped myocardium.

    The muscle wraps the sides and the bottom (rows 10-21 x cols 10-19 minus
    the cavity); the top cavity row faces background, so the base is exactly
    the six pixels of row 10.
    """
    labels = np.zeros((32, 32), dtype=np.uint8)
    labels[10:22, 10:20] = 2
    labels[10:20, 12:18] = 1
    return LabelMap(labels, spacing)


def test_box_phantom_attributes():
    attrs = extract_attributes(box_phantom())
    assert attrs.lv_area == 60.0
    assert attrs.myo_area == 60.0
    assert attrs.lv_base_width == 5.0
    # apex = farthest LV boundary pixel from the base midpoint (14.5, 10)
    assert attrs.lv_length == pytest.approx(np.hypot(2.5, 9.0), abs=1e-12)
    # a taller-than-wide upright rectangle has a vertical principal axis
    assert attrs.lv_orientation == pytest.approx(0.0, abs=1e-9)
    # epicardium fills the whole 10x12 block
    assert attrs.epi_cx == pytest.approx(14.5)
    assert attrs.epi_cy == pytest.approx(15.5)


def test_box_phantom_respects_spacing():
    attrs = extract_attributes(box_phantom(spacing=(0.5, 1.0)))
    assert attrs.lv_area == 30.0
    assert attrs.myo_area == 30.0
    assert attrs.lv_base_width == 2.5
    assert attrs.lv_length == pytest.approx(np.hypot(2.5 * 0.5, 9.0), abs=1e-12)
    assert attrs.epi_cx == pytest.approx(14.5 * 0.5)
    assert attrs.epi_cy == pytest.approx(15.5)


def test_wide_phantom_orientation_is_horizontal():
    # wider than tall: principal axis folds to +90 degrees
    labels = np.zeros((32, 32), dtype=np.uint8)
    labels[10:18, 6:24] = 2
    labels[10:16, 8:22] = 1
    attrs = extract_attributes(LabelMap(labels, (1.0, 1.0)))
    assert attrs.lv_orientation == pytest.approx(90.0, abs=1e-9)
    assert attrs.lv_base_width == 13.0


def test_detached_speck_is_ignored():
    frame = box_phantom()
    speck = frame.labels.copy()
    speck[2, 2] = 1
    a = extract_attributes(frame)
    b = extract_attributes(LabelMap(speck, (1.0, 1.0)))
    assert b.lv_area == a.lv_area
    assert b.lv_base_width == a.lv_base_width
    assert b.lv_length == a.lv_length


def test_missing_classes_raise():
    labels = np.zeros((16, 16), dtype=np.uint8)
    labels[4:8, 4:8] = 2
    with pytest.raises(AttributeExtractionError, match="left-ventricle"):
        extract_attributes(LabelMap(labels, (1.0, 1.0)))
    labels = np.zeros((16, 16), dtype=np.uint8)
    labels[4:8, 4:8] = 1
    with pytest.raises(AttributeExtractionError, match="myocardium"):
        extract_attributes(LabelMap(labels, (1.0, 1.0)))


def test_sealed_cavity_raises_degenerate_base():
    labels = np.zeros((16, 16), dtype=np.uint8)
    labels[4:12, 4:12] = 2
    labels[6:10, 6:10] = 1
    with pytest.raises(DegenerateBaseError):
        extract_attributes(LabelMap(labels, (1.0, 1.0)))


def test_attribute_vector_array_round_trip():
    v = AttributeVector(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0)
    assert AttributeVector.from_array(v.as_array()) == v
    with pytest.raises(ValueError):
        AttributeVector.from_array(np.zeros(6))


coords = st.integers(min_value=0, max_value=6)


@settings(max_examples=20, deadline=None)
@given(dr=coords, dc=coords)
def test_translation_moves_centroid_exactly(dr, dc):
    base = box_phantom()
    moved = np.zeros((40, 40), dtype=np.uint8)
    moved[dr : dr + 32, dc : dc + 32] = base.labels
    a = extract_attributes(base)
    b = extract_attributes(LabelMap(moved, (1.0, 1.0)))
    assert b.epi_cx == pytest.approx(a.epi_cx + dc, abs=1e-9)
    assert b.epi_cy == pytest.approx(a.epi_cy + dr, abs=1e-9)
    assert b.lv_area == a.lv_area
    assert b.lv_base_width == a.lv_base_width


# --- series and normalization -------------------------------------------------


def test_series_validation():
    with pytest.raises(ValueError, match="unknown attribute"):
        AttributeSeries(attribute="lv_mass", values=np.zeros(3))
    with pytest.raises(ValueError, match="domain"):
        AttributeSeries(attribute="lv_area", values=np.zeros(3), domain="pixel")
    with pytest.raises(ValueError, match="non-finite"):
        AttributeSeries(attribute="lv_area", values=np.array([1.0, np.inf]))
    with pytest.raises(ValueError, match="1-D"):
        AttributeSeries(attribute="lv_area", values=np.zeros((3, 2)))


def test_compute_stats_merges_ranges():
    a = AttributeSeries("lv_area", np.array([0.0, 1.0]))
    b = AttributeSeries("lv_area", np.array([-1.0, 0.5]))
    stats = compute_stats([a, b])
    assert stats.ranges["lv_area"] == (-1.0, 1.0)
    assert stats.domain == "image"


def test_compute_stats_rejects_mixed_domains_and_empty():
    a = AttributeSeries("lv_area", np.array([0.0, 1.0]), domain="image")
    b = AttributeSeries("lv_area", np.array([0.0, 1.0]), domain="latent")
    with pytest.raises(DegenerateStatsError, match="mixed"):
        compute_stats([a, b])
    with pytest.raises(DegenerateStatsError):
        compute_stats([])


def test_normalize_endpoints_and_no_clamping():
    stats = NormalizationStats(domain="image", ranges={"lv_area": (10.0, 30.0)})
    s = AttributeSeries("lv_area", np.array([10.0, 30.0, 40.0, 0.0]))
    n = normalize_series(s, stats)
    assert n.normalized
    assert n.values[0] == 0.0 and n.values[1] == 1.0
    # values outside the reference range pass straight through the affine map
    assert n.values[2] == pytest.approx(1.5)
    assert n.values[3] == pytest.approx(-0.5)


def test_normalize_denormalize_identity():
    stats = NormalizationStats(domain="image", ranges={"lv_length": (60.0, 95.0)})
    s = AttributeSeries("lv_length", np.array([61.0, 80.0, 94.5]))
    back = denormalize_series(normalize_series(s, stats), stats)
    assert np.allclose(back.values, s.values, atol=1e-12)
    assert not back.normalized


def test_normalize_degenerate_range_raises():
    stats = NormalizationStats(domain="image", ranges={"lv_area": (5.0, 5.0)})
    s = AttributeSeries("lv_area", np.array([5.0, 5.0]))
    with pytest.raises(DegenerateStatsError, match="degenerate"):
        normalize_series(s, stats)


def test_normalize_twice_rejected():
    stats = NormalizationStats(domain="image", ranges={"lv_area": (0.0, 1.0)})
    s = AttributeSeries("lv_area", np.array([0.5, 0.5]))
    n = normalize_series(s, stats)
    with pytest.raises(ValueError, match="already normalized"):
        normalize_series(n, stats)
    with pytest.raises(ValueError, match="not normalized"):
        denormalize_series(s, stats)


@settings(max_examples=30, deadline=None)
@given(
    values=st.lists(st.floats(-100.0, 100.0), min_size=3, max_size=12),
    lo=st.floats(-50.0, 0.0),
    span=st.floats(0.5, 80.0),
)
def test_normalization_is_monotone(values, lo, span):
    # weakly monotone only: distinctions below float resolution may collapse
    stats = NormalizationStats(domain="image", ranges={"myo_area": (lo, lo + span)})
    order = np.argsort(values, kind="stable")
    s = AttributeSeries("myo_area", np.array(values)[order])
    n = normalize_series(s, stats)
    assert np.all(np.diff(n.values) >= 0.0)


def test_series_matrix_round_trip():
    rng = np.random.default_rng(4)
    mat = rng.normal(size=(5, 7))
    series = series_from_matrix(mat, domain="latent")
    assert [s.attribute for s in series] == list(ATTRIBUTE_NAMES)
    assert np.array_equal(series_matrix(series), mat)


def test_series_matrix_needs_all_seven():
    series = series_from_matrix(np.zeros((3, 7)))[:6]
    with pytest.raises(ValueError, match="seven"):
        series_matrix(series)


def test_stats_dict_round_trip():
    stats = NormalizationStats(domain="latent", ranges={"lv_area": (1.0, 2.0), "epi_cy": (-3.0, 4.0)})
    back = NormalizationStats.from_dict("latent", stats.to_dict())
    assert back == stats
