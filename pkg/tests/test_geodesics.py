import math

import numpy as np
import pytest

from finsler_lab import numdiff
from finsler_lab.calculus import finsler_gradient
from finsler_lab.domains import DiscDomain
from finsler_lab.errors import LeftDomain, NeverReached, ZeroVector
from finsler_lab.geodesics import (
    exp_map,
    integrate_geodesic,
    integrate_to_level,
    orthogonality_defect,
    polyline_length,
    spray_coefficients,
    tangent_basis_from_differential,
)
from finsler_lab.metrics import (
    RandersMetric,
    TangentVector,
    euclidean_metric,
    reverse_metric,
)

ORIGIN = np.zeros(2)


# ---------------------------------------------------------------------------
# spray


def test_minkowski_spray_vanishes(rng):
    metric = RandersMetric.constant_wind([0.5, 0.0])
    for _ in range(10):
        v = TangentVector(rng.normal(size=2), rng.normal(size=2))
        assert np.max(np.abs(spray_coefficients(metric, v))) < 1e-14


def test_riemannian_spray_is_christoffel_contraction(sphere_scenario, rng):
    # independent oracle: Christoffel symbols from finite differences of h
    from finsler_lab.metrics import RiemannianMetric

    band = sphere_scenario.charts["band"]
    metric = RiemannianMetric(band.metric.h_matrix, 2)
    for _ in range(5):
        x = np.array([rng.uniform(0.5, 2.5), rng.uniform(-1.0, 1.0)])
        v = rng.normal(size=2)
        a = spray_coefficients(metric, TangentVector(x, v))
        h_of = metric.h_matrix
        dh_flat = numdiff.jacobian(lambda q: h_of(q).ravel(), x, step=1e-6)
        dh = np.transpose(dh_flat.reshape(2, 2, 2), (2, 0, 1))
        h_inv = np.linalg.inv(h_of(x))
        gamma = np.zeros((2, 2, 2))
        for l in range(2):
            for i in range(2):
                for j in range(2):
                    gamma[l, i, j] = 0.5 * sum(
                        h_inv[l, k] * (dh[i, k, j] + dh[j, k, i] - dh[k, i, j])
                        for k in range(2)
                    )
        oracle = -np.einsum("lij,i,j->l", gamma, v, v)
        assert np.max(np.abs(a - oracle)) < 1e-5 * (1.0 + np.max(np.abs(oracle)))


def test_disc_radial_spray_collinear(disc_scenario):
    a = spray_coefficients(
        disc_scenario.chart.metric, TangentVector([0.3, 0.0], [1.0, 0.0])
    )
    assert abs(a[1]) < 1e-12


def test_spray_zero_vector(disc_scenario):
    with pytest.raises(ZeroVector):
        spray_coefficients(disc_scenario.chart.metric, TangentVector(ORIGIN, [0.0, 0.0]))


# ---------------------------------------------------------------------------
# integration


def test_minkowski_straight_line():
    metric = RandersMetric.constant_wind([0.5, 0.0])
    traj = integrate_geodesic(metric, TangentVector(ORIGIN, [1.0, 0.0]), 1.0)
    assert np.max(np.abs(traj.points[-1] - [1.0, 0.0])) < 1e-12
    deviation = np.max(np.abs(traj.points - np.outer(traj.times, [1.0, 0.0])))
    assert deviation <= 1e-9


def test_euclidean_arc_length():
    traj = integrate_geodesic(euclidean_metric(2), TangentVector(ORIGIN, [0.6, 0.8]), 3.0)
    assert traj.arc_lengths[-1] == pytest.approx(3.0, abs=1e-10)
    assert np.linalg.norm(traj.points[-1]) == pytest.approx(3.0, abs=1e-10)


def test_sphere_equator_half_turn(sphere_scenario):
    band = sphere_scenario.charts["band"]
    # the Riemannian round sphere: drop the wind, keep h
    from finsler_lab.metrics import RiemannianMetric

    metric = RiemannianMetric(band.metric.h_matrix, 2)
    start = TangentVector(np.array([math.pi / 2, 0.0]), np.array([0.0, 1.0]))
    traj = integrate_geodesic(metric, start, math.pi, step=1e-3)
    assert traj.arc_lengths[-1] == pytest.approx(math.pi, abs=1e-5)
    assert traj.points[-1][1] == pytest.approx(math.pi, abs=1e-6)


def test_speed_drift_fourth_order(sphere_scenario):
    band = sphere_scenario.charts["band"]
    start = TangentVector(np.array([1.0, 0.0]), np.array([0.3, 1.0]))
    drifts = [
        integrate_geodesic(band.metric, start, 1.0, step=s).speed_drift()
        for s in (2e-2, 1e-2, 5e-3)
    ]
    assert drifts[0] / drifts[1] >= 8.0
    assert drifts[1] / drifts[2] >= 8.0


def test_left_domain():
    metric = euclidean_metric(2)
    with pytest.raises(LeftDomain):
        integrate_geodesic(
            metric, TangentVector(ORIGIN, [1.0, 0.0]), 2.0, domain=DiscDomain(0.5)
        )


def test_reverse_metric_time_reversal(disc_scenario):
    metric = disc_scenario.chart.metric
    start = TangentVector([0.2, 0.1], [0.5, 0.3])
    traj = integrate_geodesic(metric, start, 1.0, step=1e-3)
    end = traj.endpoint
    back = integrate_geodesic(
        reverse_metric(metric), TangentVector(end.base, -end.vector), 1.0, step=1e-3
    )
    assert np.linalg.norm(back.points[-1] - start.base) <= 1e-6


# ---------------------------------------------------------------------------
# exponential map


def test_exp_zero_vector_is_base():
    metric = RandersMetric.constant_wind([0.5, 0.0])
    assert np.allclose(exp_map(metric, TangentVector([0.2, 0.3], [0.0, 0.0])), [0.2, 0.3])


def test_exp_translates_in_minkowski():
    metric = RandersMetric.constant_wind([0.5, 0.0])
    assert np.allclose(
        exp_map(metric, TangentVector([0.2, 0.3], [0.5, -0.1])), [0.7, 0.2], atol=1e-12
    )
    assert np.allclose(
        exp_map(euclidean_metric(2), TangentVector([1.0, 1.0], [0.3, 0.4])),
        [1.3, 1.4],
        atol=1e-12,
    )


# ---------------------------------------------------------------------------
# orthogonality


def test_gradient_orthogonal_to_level_sets(disc_scenario, rng):
    chart = disc_scenario.chart
    for _ in range(10):
        p = rng.uniform(-0.5, 0.5, size=2)
        if np.linalg.norm(p) < 0.1:
            continue
        res = finsler_gradient(chart.metric, chart.field, p)
        basis = tangent_basis_from_differential(chart.field.differential(p))
        defect = orthogonality_defect(chart.metric, res.gradient, basis)
        assert defect <= 1e-8


def test_euclidean_orthogonality_sanity():
    metric = euclidean_metric(2)
    # f linear in x: level sets are vertical lines with tangent e_y
    v = TangentVector(ORIGIN, [1.0, 0.0])
    assert orthogonality_defect(metric, v, [[0.0, 1.0]]) == 0.0


def test_minkowski_reversal_breaks_orthogonality(minkowski_scenario):
    chart = minkowski_scenario.chart
    p = np.array([0.5, 1.0])  # on the unit level, off the wind axis
    res = finsler_gradient(chart.metric, chart.field, p)
    basis = tangent_basis_from_differential(chart.field.differential(p))
    fwd = orthogonality_defect(chart.metric, res.gradient, basis)
    rev = orthogonality_defect(
        chart.metric, TangentVector(p, -res.gradient.vector), basis
    )
    assert fwd <= 1e-8
    assert rev >= 0.05


# ---------------------------------------------------------------------------
# level crossings


def test_crossing_disc_gradient_geodesic(disc_scenario):
    chart = disc_scenario.chart
    p = np.array([0.2, 0.0])
    res = finsler_gradient(chart.metric, chart.field, p)
    ray = TangentVector(p, res.gradient.vector / res.finsler_norm)
    event = integrate_to_level(
        chart.metric, ray, chart.field, 0.25, step=1e-3, domain=chart.domain
    )
    assert abs(chart.field.value(event.point) - 0.25) <= 1e-10
    assert event.arc_length == pytest.approx(math.log(1.25), abs=1e-4)
    assert event.orthogonality_defect <= 1e-8


def test_crossing_minkowski_unit_spacing(minkowski_scenario):
    chart = minkowski_scenario.chart
    p = np.array([0.5, 1.0])
    res = finsler_gradient(chart.metric, chart.field, p)
    ray = TangentVector(p, res.gradient.vector / res.finsler_norm)
    event = integrate_to_level(
        chart.metric, ray, chart.field, 2.0, step=1e-3, domain=chart.domain
    )
    assert event.arc_length == pytest.approx(1.0, abs=1e-6)


def test_crossing_never_reached(disc_scenario):
    chart = disc_scenario.chart
    p = np.array([0.2, 0.0])
    res = finsler_gradient(chart.metric, chart.field, p)
    ray = TangentVector(p, res.gradient.vector / res.finsler_norm)
    with pytest.raises(NeverReached):
        integrate_to_level(
            chart.metric, ray, chart.field, 0.01, step=1e-3,
            domain=chart.domain, t_max=1.5,
        )


# ---------------------------------------------------------------------------
# local minimization


def test_gradient_geodesic_locally_minimizes(disc_scenario, rng):
    chart = disc_scenario.chart
    p = np.array([0.2, 0.0])
    res = finsler_gradient(chart.metric, chart.field, p)
    ray = TangentVector(p, res.gradient.vector / res.finsler_norm)
    event = integrate_to_level(
        chart.metric, ray, chart.field, 0.25, step=1e-3, domain=chart.domain
    )
    geo_len = event.arc_length
    for _ in range(20):
        mids = np.linspace(p, event.point, 6)[1:-1] + rng.normal(scale=0.03, size=(4, 2))
        path = np.vstack([p, mids, event.point])
        assert polyline_length(chart.metric, path, 64) >= geo_len - 1e-6
