import math

import numpy as np
import pytest

from finsler_lab.calculus import ScalarField
from finsler_lab.domains import DiscDomain
from finsler_lab.errors import LevelNotFound
from finsler_lab.expressions import parse_expression
from finsler_lab.foliation import (
    build_cylinder,
    check_finsler_partition,
    check_parallel,
    end_point_map,
    extract_level_set,
    orthogonal_cone,
)
from finsler_lab.geodesics import (
    exp_map,
    integrate_geodesic,
    orthogonality_defect,
    tangent_basis_from_differential,
)
from finsler_lab.metrics import RandersMetric, TangentVector, euclidean_metric

LN125 = math.log(1.25)


@pytest.fixture(scope="module")
def circle_field():
    return ScalarField.from_expression(parse_expression("x^2 + y^2"), 2)


@pytest.fixture(scope="module")
def shear_metric():
    return RandersMetric(
        lambda x: np.eye(2), lambda x: np.array([0.8 * x[1], 0.0]), 2,
        dh=lambda x: np.zeros((2, 2, 2)),
        dwind=lambda x: np.array([[0.0, 0.0], [0.8, 0.0]]),
    )


# ---------------------------------------------------------------------------
# level-set extraction


def test_extract_circle_level(circle_field):
    sample = extract_level_set(circle_field, 0.25, DiscDomain(0.9), 64)
    assert len(sample.points) == 64
    for p, basis in zip(sample.points, sample.tangent_bases):
        assert abs(circle_field.value(p) - 0.25) <= 1e-10
        df = circle_field.differential(p)
        for u in basis:
            assert abs(float(df @ u)) <= 1e-8
    assert np.allclose(np.linalg.norm(sample.points, axis=1), 0.5, atol=1e-9)


def test_extract_sphere_parallel(sphere_scenario):
    band = sphere_scenario.charts["band"]
    sample = extract_level_set(
        band.field, 0.5, band.domain, 16,
        parametrization=sphere_scenario.level_parametrization("band"),
    )
    assert np.allclose(sample.points[:, 0], math.acos(0.5), atol=1e-12)


def test_level_not_found(circle_field):
    with pytest.raises(LevelNotFound):
        extract_level_set(circle_field, 5.0, DiscDomain(0.9), 8)


# ---------------------------------------------------------------------------
# orthogonal cone


def test_cone_riemannian_is_a_line(circle_field):
    cone = orthogonal_cone(euclidean_metric(2), circle_field, np.array([0.5, 0.2]))
    assert np.allclose(cone.forward_ray.vector, -cone.backward_ray.vector, atol=1e-10)
    assert cone.forward_defect <= 1e-8
    assert cone.backward_defect <= 1e-8


def test_cone_minkowski_rays_not_antiparallel(minkowski_scenario):
    chart = minkowski_scenario.chart
    # off the wind axis the two rays bend differently
    cone = orthogonal_cone(chart.metric, chart.field, np.array([0.5, 1.0]))
    fwd = cone.forward_ray.vector
    bwd = cone.backward_ray.vector
    cos_angle = -float(fwd @ bwd) / (np.linalg.norm(fwd) * np.linalg.norm(bwd))
    angle_defect = math.acos(np.clip(cos_angle, -1.0, 1.0))
    assert angle_defect >= 0.05
    assert cone.forward_defect <= 1e-8
    assert cone.backward_defect <= 1e-8
    # F-unit rays with signed pairings against df
    df = chart.field.differential(np.array([0.5, 1.0]))
    assert chart.metric.norm(cone.at, fwd) == pytest.approx(1.0, abs=1e-10)
    assert chart.metric.norm(cone.at, bwd) == pytest.approx(1.0, abs=1e-10)
    assert float(df @ fwd) > 0.0 > float(df @ bwd)


def test_cone_rays_parallel_defect_shrinks_with_radius(minkowski_scenario):
    # at vanishing travel distance the odd ray is trivially "parallel";
    # the arrival defect must decrease as the radius shrinks
    chart = minkowski_scenario.chart
    cone = orthogonal_cone(chart.metric, chart.field, np.array([0.5, 1.0]))
    defects = []
    for r in (1e-2, 1e-3):
        endpoint = exp_map(chart.metric, TangentVector(cone.at, r * cone.backward_ray.vector))
        df = chart.field.differential(endpoint)
        basis = tangent_basis_from_differential(df)
        vel = cone.backward_ray.vector  # straight-line geodesics keep velocity
        defects.append(orthogonality_defect(chart.metric, TangentVector(endpoint, vel), basis))
    assert defects[1] < defects[0]


# ---------------------------------------------------------------------------
# parallelism


def test_minkowski_forward_parallel(minkowski_scenario):
    chart = minkowski_scenario.chart
    report = check_parallel(
        chart.metric, chart.field, 1.0, 2.0, "forward", 32, chart.domain,
        level_parametrization=minkowski_scenario.level_parametrization(),
    )
    assert report.verdict
    assert report.max_defect <= 1e-6
    assert report.unreached == 0


def test_minkowski_backward_parallel_fails(minkowski_scenario):
    chart = minkowski_scenario.chart
    report = check_parallel(
        chart.metric, chart.field, 1.0, 2.0, "backward", 32, chart.domain,
        level_parametrization=minkowski_scenario.level_parametrization(), t_max=4.0,
    )
    assert not report.verdict
    assert report.max_defect >= 0.05


def test_sphere_parallel_both_directions(sphere_scenario):
    band = sphere_scenario.charts["band"]
    for direction in ("forward", "backward"):
        report = check_parallel(
            band.metric, band.field, 0.0, 0.5, direction, 8, band.domain,
            level_parametrization=sphere_scenario.level_parametrization("band"),
        )
        assert report.verdict, (direction, report.max_defect)
        assert report.max_defect <= 1e-4


# ---------------------------------------------------------------------------
# cylinders and end-point maps


def test_disc_cylinder_lands_on_level(disc_scenario):
    chart = disc_scenario.chart
    source = extract_level_set(
        chart.field, 0.04, chart.domain, 12,
        parametrization=disc_scenario.level_parametrization(),
    )
    images, failures = build_cylinder(
        chart.metric, chart.field, source, LN125, "forward",
        step=1e-3, domain=chart.domain,
    )
    assert failures == 0
    for p in images:
        assert abs(chart.field.value(p) - 0.25) <= 1e-4


def test_minkowski_cylinder_unit_radius(minkowski_scenario):
    chart = minkowski_scenario.chart
    source = extract_level_set(
        chart.field, 1.0, chart.domain, 12,
        parametrization=minkowski_scenario.level_parametrization(),
    )
    images, _ = build_cylinder(
        chart.metric, chart.field, source, 1.0, "forward", step=1e-3, domain=chart.domain
    )
    for p in images:
        assert abs(chart.field.value(p) - 2.0) <= 1e-6


def test_cylinder_zero_radius_is_identity(minkowski_scenario):
    chart = minkowski_scenario.chart
    source = extract_level_set(
        chart.field, 1.0, chart.domain, 8,
        parametrization=minkowski_scenario.level_parametrization(),
    )
    images, failures = build_cylinder(chart.metric, chart.field, source, 0.0)
    assert failures == 0
    assert np.allclose(images, source.points)


def test_end_point_map_disc(disc_scenario):
    chart = disc_scenario.chart
    source = extract_level_set(
        chart.field, 0.04, chart.domain, 12,
        parametrization=disc_scenario.level_parametrization(),
    )
    result = end_point_map(
        chart.metric, chart.field, source, LN125, step=1e-3, domain=chart.domain
    )
    assert result.f_spread <= 1e-6
    assert result.min_pairwise_distance > 0.0


def test_end_point_map_identity_at_zero(disc_scenario):
    chart = disc_scenario.chart
    source = extract_level_set(
        chart.field, 0.04, chart.domain, 8,
        parametrization=disc_scenario.level_parametrization(),
    )
    result = end_point_map(chart.metric, chart.field, source, 0.0)
    assert np.allclose(result.images, source.points)
    assert result.f_spread <= 1e-12


def test_end_point_map_degenerates_at_pole(sphere_scenario):
    # in the polar cap chart the flow lines converge on the pole, so the
    # injectivity proxy collapses as the images approach the critical level
    north = sphere_scenario.charts["north-cap"]
    source = extract_level_set(
        north.field, 0.7, north.domain, 8,
        parametrization=sphere_scenario.level_parametrization("north-cap"),
    )
    t_pole = math.pi / 2 - math.asin(0.7)
    near = end_point_map(
        north.metric, north.field, source, t_pole - 0.02, step=1e-3, domain=north.domain
    )
    far = end_point_map(
        north.metric, north.field, source, t_pole / 3, step=1e-3, domain=north.domain
    )
    assert near.min_pairwise_distance < 0.2 * far.min_pairwise_distance
    assert near.f_spread <= 1e-6


def test_sphere_cylinder_over_pole(sphere_scenario):
    # the forward cylinder of radius r over a singular leaf (the pole) must
    # coincide with the level set whose profile integral inverts to r
    south = sphere_scenario.charts["south-cap"]
    pole = np.zeros(2)
    r = 0.5
    expected_level = -math.cos(r)  # inverts integral of 1/sqrt(1 - s^2) from -1
    for angle in np.linspace(0.0, 2.0 * math.pi, 12, endpoint=False):
        direction = np.array([math.cos(angle), math.sin(angle)])
        unit = direction / south.metric.norm(pole, direction)
        traj = integrate_geodesic(
            south.metric, TangentVector(pole, unit), r, step=1e-3, domain=south.domain
        )
        value = south.field.value(traj.points[-1])
        assert abs(value - expected_level) <= 1e-4, (angle, value, expected_level)


# ---------------------------------------------------------------------------
# partition verdicts


def test_minkowski_partition_fails(minkowski_scenario):
    chart = minkowski_scenario.chart
    report = check_finsler_partition(
        chart.metric, chart.field, [1.0, 1.5, 2.0], 12, chart.domain,
        level_parametrization=minkowski_scenario.level_parametrization(), t_max=4.0,
    )
    assert not report.finsler_partition_verdict
    assert all(r.verdict for r in report.forward)
    assert any(not r.verdict for r in report.backward)
    # structural coherence: verdict is the conjunction of its sub-checks
    expected = all(r.verdict for r in report.forward + report.backward) and all(
        v <= report.cylinder_tolerance for v in report.cylinder_match_defects
    )
    assert report.finsler_partition_verdict == expected


def test_disc_partition_passes(disc_scenario):
    chart = disc_scenario.chart
    report = check_finsler_partition(
        chart.metric, chart.field, [0.04, 0.16, 0.36], 12, chart.domain,
        level_parametrization=disc_scenario.level_parametrization(), t_max=4.0,
    )
    assert report.finsler_partition_verdict
    assert max(report.cylinder_match_defects) <= 1e-4


def test_euclidean_circles_partition_passes(circle_field):
    report = check_finsler_partition(
        euclidean_metric(2), circle_field, [0.04, 0.16, 0.36], 10, DiscDomain(0.9),
        t_max=4.0,
    )
    assert report.finsler_partition_verdict


def test_shear_wind_partition_fails(shear_metric, linear_scenario):
    # non-foliated wind over vertical lines: defects split cleanly across
    # the pass/fail decision band
    field = linear_scenario.chart.field
    report = check_finsler_partition(
        shear_metric, field, [-0.3, 0.0, 0.3], 10, DiscDomain(0.9), t_max=4.0
    )
    worst = max(r.max_defect for r in report.forward + report.backward)
    assert not report.finsler_partition_verdict
    assert worst >= 0.05


def test_foliated_radial_wind_with_linear_field_passes(disc_scenario, linear_scenario):
    # the radial wind projects along vertical lines (its x-component is
    # constant on each line), so this partition is genuinely Finsler
    field = linear_scenario.chart.field
    report = check_finsler_partition(
        disc_scenario.chart.metric, field, [-0.3, 0.0, 0.3], 10, DiscDomain(0.9),
        t_max=4.0,
    )
    assert report.finsler_partition_verdict
