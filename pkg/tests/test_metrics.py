import json
import math

import numpy as np
import pytest

from memslidar.metrics import (
    METRICS_CSV_HEADER,
    DegenerateGeometry,
    EmptyMask,
    MetricsError,
    NonPositiveDepth,
    compute,
    depth_to_points,
    planar_rmse,
)


# ---------- compute ----------

def test_identical_maps_are_perfect():
    depth = np.full((10, 12), 2.5)
    report = compute(depth, depth)
    assert report.mre_pct == 0.0
    assert report.rmse_m == 0.0
    assert report.log10 == 0.0
    assert report.delta1_pct == 100.0
    assert report.delta2_pct == 100.0
    assert report.delta3_pct == 100.0
    assert report.n_pixels == 120


def test_uniform_thirty_percent_error():
    pred = np.full((4, 4), 1.3)
    truth = np.ones((4, 4))
    report = compute(pred, truth)
    assert report.mre_pct == pytest.approx(30.0, rel=1e-12)
    assert report.rmse_m == pytest.approx(0.3, rel=1e-12)
    assert report.log10 == pytest.approx(0.11394335230683676, rel=1e-12)
    # ratio 1.3 misses the 1.25 gate but clears 1.5625 and beyond
    assert report.delta1_pct == 0.0
    assert report.delta2_pct == 100.0
    assert report.delta3_pct == 100.0


def test_half_percent_error():
    report = compute(np.full((3, 3), 1.005), np.ones((3, 3)))
    assert report.mre_pct == pytest.approx(0.5, rel=1e-9)
    assert report.delta1_pct == 100.0


def test_delta_thresholds_are_strict():
    report = compute(np.full((2, 2), 1.25), np.ones((2, 2)))
    assert report.delta1_pct == 0.0  # ratio == 1.25 exactly, not < 1.25
    assert report.delta2_pct == 100.0


def test_matches_naive_per_pixel_loop():
    rng = np.random.default_rng(9)
    for _ in range(10):
        shape = (rng.integers(4, 16), rng.integers(4, 16))
        pred = rng.uniform(0.5, 5.0, shape)
        truth = rng.uniform(0.5, 5.0, shape)
        mask = rng.random(shape) < 0.7
        if not mask.any():
            continue
        report = compute(pred, truth, mask)

        mre = rmse = lg = 0.0
        d = [0, 0, 0]
        n = 0
        for y in range(shape[0]):
            for x in range(shape[1]):
                if not mask[y, x]:
                    continue
                p, t = pred[y, x], truth[y, x]
                mre += abs(p - t) / t
                rmse += (p - t) ** 2
                lg += abs(math.log10(p) - math.log10(t))
                ratio = max(p / t, t / p)
                for i in range(3):
                    d[i] += ratio < 1.25 ** (i + 1)
                n += 1
        assert report.n_pixels == n
        assert report.mre_pct == pytest.approx(mre / n * 100, rel=1e-12)
        assert report.rmse_m == pytest.approx(math.sqrt(rmse / n), rel=1e-12)
        assert report.log10 == pytest.approx(lg / n, rel=1e-12)
        assert report.delta1_pct == pytest.approx(d[0] / n * 100, rel=1e-12)
        assert report.delta2_pct == pytest.approx(d[1] / n * 100, rel=1e-12)
        assert report.delta3_pct == pytest.approx(d[2] / n * 100, rel=1e-12)


def test_fuzz_invariants():
    rng = np.random.default_rng(10)
    for _ in range(200):
        shape = (rng.integers(2, 10), rng.integers(2, 10))
        pred = rng.uniform(0.1, 10.0, shape)
        truth = rng.uniform(0.1, 10.0, shape)
        report = compute(pred, truth)
        assert report.mre_pct >= 0.0
        assert report.rmse_m >= 0.0
        assert report.log10 >= 0.0
        assert report.delta1_pct <= report.delta2_pct <= report.delta3_pct

        # joint rescaling leaves relative metrics alone, scales RMSE
        k = 3.7
        scaled = compute(k * pred, k * truth)
        assert scaled.mre_pct == pytest.approx(report.mre_pct, rel=1e-9)
        assert scaled.log10 == pytest.approx(report.log10, rel=1e-9, abs=1e-12)
        assert scaled.rmse_m == pytest.approx(k * report.rmse_m, rel=1e-9)
        assert scaled.delta1_pct == report.delta1_pct
        assert scaled.delta2_pct == report.delta2_pct
        assert scaled.delta3_pct == report.delta3_pct


def test_default_mask_skips_invalid_pixels():
    pred = np.array([[2.0, 0.0], [2.0, 2.0]])
    truth = np.array([[2.0, 2.0], [0.0, 2.0]])
    report = compute(pred, truth)
    assert report.n_pixels == 2
    assert report.mre_pct == 0.0


def test_empty_mask_raises():
    depth = np.ones((4, 4))
    with pytest.raises(EmptyMask):
        compute(depth, depth, np.zeros((4, 4), dtype=bool))
    with pytest.raises(EmptyMask):
        compute(np.zeros((4, 4)), depth)


def test_masked_non_positive_depth_raises():
    pred = np.array([[1.0, 0.0]])
    truth = np.ones((1, 2))
    with pytest.raises(NonPositiveDepth):
        compute(pred, truth, np.ones((1, 2), dtype=bool))


def test_shape_mismatches_raise():
    with pytest.raises(MetricsError):
        compute(np.ones((2, 2)), np.ones((2, 3)))
    with pytest.raises(MetricsError):
        compute(np.ones((2, 2)), np.ones((2, 2)), np.ones((3, 3), dtype=bool))


# ---------- planar fit ----------

def test_exact_plane_has_zero_rmse():
    rng = np.random.default_rng(0)
    xy = rng.uniform(-1, 1, (200, 2))
    z = 0.3 * xy[:, 0] + 0.2 * xy[:, 1] + 1.0
    pts = np.column_stack([xy, z])
    assert planar_rmse(pts) < 1e-12


def test_noisy_plane_recovers_sigma():
    rng = np.random.default_rng(1)
    xy = rng.uniform(-1, 1, (1000, 2))
    z = 2.0 + rng.normal(0, 0.05, 1000)
    rmse = planar_rmse(np.column_stack([xy, z]))
    assert rmse == pytest.approx(0.05, rel=0.10)


def test_planar_rmse_is_rigid_motion_invariant():
    rng = np.random.default_rng(2)
    pts = np.column_stack([
        rng.uniform(-1, 1, (300, 2)),
        1.5 + rng.normal(0, 0.02, 300),
    ])
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    moved = pts @ q.T + np.array([5.0, -2.0, 11.0])
    assert planar_rmse(moved) == pytest.approx(planar_rmse(pts), rel=1e-9)


def test_degenerate_point_sets_raise():
    with pytest.raises(DegenerateGeometry):
        planar_rmse(np.zeros((2, 3)))
    line = np.outer(np.linspace(0, 1, 50), [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateGeometry):
        planar_rmse(line)
    with pytest.raises(MetricsError):
        planar_rmse(np.ones((5, 2)))


# ---------- back-projection ----------

def test_depth_to_points_flat_plane():
    depth = np.full((4, 6), 2.0)
    depth[0, 0] = 0.0  # invalid pixel must be dropped
    pts = depth_to_points(depth, fx_px=100.0, fy_px=100.0, cx_px=3.0, cy_px=2.0)
    assert pts.shape == (23, 3)
    assert np.all(pts[:, 2] == 2.0)
    # pixel (x=5, y=1) center offset: ((5.5-3)/100*2, (1.5-2)/100*2)
    idx = np.argwhere((np.abs(pts[:, 0] - 0.05) < 1e-12)
                      & (np.abs(pts[:, 1] + 0.01) < 1e-12))
    assert len(idx) == 1


# ---------- serialization ----------

def test_csv_header_and_row():
    depth = np.full((5, 5), 2.0)
    report = compute(depth, depth)
    assert METRICS_CSV_HEADER == (
        "mre_pct,rmse_m,log10,delta1_pct,delta2_pct,delta3_pct,n_pixels"
    )
    assert report.to_csv_row() == "0,0,0,100,100,100,25"


def test_json_roundtrip():
    report = compute(np.full((3, 3), 1.3), np.ones((3, 3)))
    doc = json.loads(report.to_json())
    assert doc["mre_pct"] == pytest.approx(30.0)
    assert doc["n_pixels"] == 9
    assert list(doc) == sorted(doc)
