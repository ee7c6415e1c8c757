import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cardioseq.attributes import ATTRIBUTE_NAMES, AttributeSeries
from cardioseq.consistency import (
    ConsistencyReport,
    Thresholds,
    calibrate_thresholds,
    indicator,
    laplacian,
    load_thresholds,
    report,
    save_report_csv,
    save_thresholds,
)
from cardioseq.errors import CardioseqError


def test_laplacian_unit_spike():
    assert np.array_equal(laplacian(np.array([0.0, 0, 1, 0, 0])), [0.0, 1, -2, 1, 0])


def test_laplacian_edge_padding_reduces_to_first_difference():
    # ramp: interior curvature zero, replicated edges leave +/- the slope
    assert np.array_equal(laplacian(np.array([0.0, 1, 2, 3])), [1.0, 0, 0, -1])


def test_laplacian_validation():
    with pytest.raises(ValueError):
        laplacian(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        laplacian(np.array([1.0, 2.0]))


def test_indicator_flags_exactly_the_spike():
    flags = indicator(np.array([0.0, 0, 1, 0, 0]), tau=1.5)
    assert np.array_equal(flags, [False, False, True, False, False])


def test_indicator_requires_positive_tau():
    with pytest.raises(ValueError):
        indicator(np.zeros(5), tau=0.0)


series_arrays = arrays(
    dtype=np.float64,
    shape=st.integers(3, 20),
    elements=st.floats(-50.0, 50.0, allow_nan=False),
)


@settings(max_examples=40, deadline=None)
@given(x=series_arrays, a=st.floats(-3.0, 3.0), b=st.floats(-3.0, 3.0))
def test_laplacian_is_linear(x, a, b):
    y = np.linspace(-1.0, 1.0, len(x))
    lhs = laplacian(a * x + b * y)
    rhs = a * laplacian(x) + b * laplacian(y)
    assert np.allclose(lhs, rhs, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(slope=st.floats(-10.0, 10.0), intercept=st.floats(-10.0, 10.0), n=st.integers(3, 30))
def test_laplacian_of_affine_series(slope, intercept, n):
    s = slope * np.arange(n, dtype=np.float64) + intercept
    lap = laplacian(s)
    assert np.allclose(lap[1:-1], 0.0, atol=1e-9)
    assert lap[0] == pytest.approx(slope, abs=1e-9)
    assert lap[-1] == pytest.approx(-slope, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(x=series_arrays, tau=st.floats(0.1, 5.0), bump=st.floats(0.1, 5.0))
def test_indicator_monotone_in_tau(x, tau, bump):
    loose = indicator(x, tau + bump)
    tight = indicator(x, tau)
    assert not (loose & ~tight).any()


# --- calibration ---------------------------------------------------------------


def test_calibrate_cosine_oracle():
    # one cycle of a 0.4-amplitude cosine over 40 frames: the largest interior
    # second difference is 2A(1 - cos w) and both edge first differences are
    # half that, so the analytic peak is the interior one
    t = np.arange(40)
    s = AttributeSeries("lv_area", 0.4 * np.cos(2.0 * np.pi * t / 40.0))
    peak = 0.8 * (1.0 - np.cos(np.pi / 20.0))
    th = calibrate_thresholds([s], safety=1.25)
    assert th["lv_area"] == pytest.approx(1.25 * peak, rel=1e-12)
    assert th["lv_area"] == pytest.approx(0.0123117, abs=1e-6)


def test_calibrate_floor_applies_to_flat_series():
    s = AttributeSeries("epi_cx", np.zeros(10))
    th = calibrate_thresholds([s], safety=1.25, floor=1e-3)
    assert th["epi_cx"] == 1e-3


def test_calibrate_takes_max_over_references():
    a = AttributeSeries("lv_area", np.array([0.0, 0, 1, 0, 0]))
    b = AttributeSeries("lv_area", np.array([0.0, 0, 3, 0, 0]))
    th = calibrate_thresholds([a, b], safety=2.0)
    assert th["lv_area"] == pytest.approx(12.0)  # 2.0 * |-2 * 3|


def test_calibrate_validation():
    s = AttributeSeries("lv_area", np.zeros(5))
    with pytest.raises(ValueError):
        calibrate_thresholds([s], safety=0.0)
    with pytest.raises(ValueError):
        calibrate_thresholds([s], floor=0.0)
    with pytest.raises(CardioseqError):
        calibrate_thresholds([])


def test_thresholds_missing_attribute():
    th = Thresholds(taus={"lv_area": 1.0})
    with pytest.raises(CardioseqError, match="no threshold"):
        th["epi_cy"]


# --- reports ---------------------------------------------------------------


def seven_series(T=8, spike_attr="lv_length", spike_frame=4):
    series = []
    for name in ATTRIBUTE_NAMES:
        v = np.zeros(T)
        if name == spike_attr:
            v[spike_frame] = 1.0
        series.append(AttributeSeries(name, v, normalized=True))
    return series


def test_report_flags_and_frames():
    th = Thresholds(taus={name: 0.5 for name in ATTRIBUTE_NAMES})
    rep = report(seven_series(), th)
    assert rep.attributes == ATTRIBUTE_NAMES
    assert rep.flags.shape == (7, 8)
    assert rep.any_inconsistent
    k = ATTRIBUTE_NAMES.index("lv_length")
    expected_frames = np.zeros(8, dtype=bool)
    expected_frames[3:6] = True  # the spike's neighbours exceed tau=0.5 too
    assert np.array_equal(rep.frames_inconsistent, expected_frames)
    assert np.array_equal(np.nonzero(rep.flags[k])[0], [3, 4, 5])


def test_report_ratio_stat_matches_manual_computation():
    taus = {name: 0.25 * (i + 1) for i, name in enumerate(ATTRIBUTE_NAMES)}
    series = seven_series()
    rep = report(series, Thresholds(taus=taus))
    manual = np.mean(
        [np.abs(laplacian(s.values)) / taus[s.attribute] for s in series]
    )
    assert rep.ratio_stat == pytest.approx(manual, rel=1e-12)


def test_report_canonicalizes_order():
    th = Thresholds(taus={name: 0.5 for name in ATTRIBUTE_NAMES})
    rep = report(list(reversed(seven_series())), th)
    assert rep.attributes == ATTRIBUTE_NAMES


def test_report_rejects_mixed_lengths_and_empty():
    th = Thresholds(taus={name: 0.5 for name in ATTRIBUTE_NAMES})
    series = seven_series()
    series[0] = AttributeSeries(series[0].attribute, np.zeros(9), normalized=True)
    with pytest.raises(CardioseqError, match="lengths"):
        report(series, th)
    with pytest.raises(CardioseqError):
        report([], th)


def test_clean_report_is_clean():
    th = Thresholds(taus={name: 0.5 for name in ATTRIBUTE_NAMES})
    series = [AttributeSeries(n, np.linspace(0, 0.1, 8), normalized=True) for n in ATTRIBUTE_NAMES]
    rep = report(series, th)
    assert not rep.any_inconsistent
    assert rep.to_dict()["n_flagged_frames"] == 0


def test_thresholds_file_round_trip(tmp_path):
    per_domain = {
        "image": Thresholds(taus={"lv_area": 0.012, "epi_cy": 0.5}),
        "latent": Thresholds(taus={"lv_area": 0.007}),
    }
    save_thresholds(tmp_path / "thresholds.json", per_domain)
    back = load_thresholds(tmp_path / "thresholds.json")
    assert back["image"].taus == per_domain["image"].taus
    assert back["latent"].taus == per_domain["latent"].taus
    with pytest.raises(CardioseqError, match="missing thresholds"):
        load_thresholds(tmp_path / "absent.json")


def test_report_csv_contents(tmp_path):
    th = Thresholds(taus={name: 0.5 for name in ATTRIBUTE_NAMES})
    rep = report(seven_series(), th)
    save_report_csv(tmp_path / "report.csv", rep)
    lines = (tmp_path / "report.csv").read_text().splitlines()
    assert lines[0] == "frame," + ",".join(ATTRIBUTE_NAMES)
    assert len(lines) == 1 + 8
    k = ATTRIBUTE_NAMES.index("lv_length")
    row4 = lines[1 + 4].split(",")
    assert row4[0] == "4"
    assert row4[1 + k] == "1"
