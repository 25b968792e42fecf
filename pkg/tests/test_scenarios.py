import numpy as np
import pytest

from finsler_lab import numdiff
from finsler_lab.calculus import finsler_gradient
from finsler_lab.errors import ParseError, ValidationError
from finsler_lab.scenarios import (
    build_scenario,
    example_texts,
    list_examples,
    load_example,
    minkowski_randers_distance,
    parse_scenario,
    render_scenario,
)

DISC_TEXT = example_texts("disc-radial")["main"]


def test_registry_completeness():
    names = list_examples()
    for required in (
        "minkowski-randers-distance",
        "disc-radial",
        "randers-sphere-height",
        "euclidean-linear",
    ):
        assert required in names


@pytest.mark.parametrize("name", list_examples())
def test_registry_files_parse_validate_roundtrip(name):
    for chart_name, text in example_texts(name).items():
        config = parse_scenario(text)
        rendered = render_scenario(config)
        config2 = parse_scenario(rendered)
        assert render_scenario(config2) == rendered
        assert config2.field_expr == config.field_expr
        assert config2.h_entries == config.h_entries
        assert config2.wind_entries == config.wind_entries
        assert config2.domain_kind == config.domain_kind
        # a parsed file must build into a working chart
        scenario = build_scenario(config2)
        assert scenario.chart.metric.dim == config.dimension


def test_disc_file_reproduces_radial_wind_example():
    scenario = build_scenario(parse_scenario(DISC_TEXT))
    chart = scenario.chart
    res = finsler_gradient(chart.metric, chart.field, np.array([0.3, 0.0]))
    assert res.finsler_norm == pytest.approx(0.78, abs=1e-12)


def test_wind_norm_validation_rejected():
    bad = DISC_TEXT.replace("wind = x, y", "wind = 2 * x, 0").replace(
        "radius = 0.9", "radius = 1.0"
    )
    with pytest.raises(ValidationError, match="wind norm"):
        parse_scenario(bad)


def test_dangling_operator_parse_error():
    bad = DISC_TEXT.replace("f = x^2 + y^2", "f = x^2 +")
    with pytest.raises(ParseError) as err:
        parse_scenario(bad)
    assert err.value.line is not None


@pytest.mark.parametrize(
    "mutation,exc",
    [
        (("dimension = 2", "dimension = 5"), ValidationError),
        (("kind = disc", "kind = torus"), ValidationError),
        (("h = 1, 0 ; 0, 1", "h = 1, 0 ; 0, 1 ; 0, 0"), ValidationError),
        (("f = x^2 + y^2", "f = x^2 + z^2"), ValidationError),
        (("wind = x, y", "wind = x"), ValidationError),
        (("[metric]", "[metrics]"), ParseError),
    ],
)
def test_config_validation_errors(mutation, exc):
    old, new = mutation
    with pytest.raises(exc):
        parse_scenario(DISC_TEXT.replace(old, new))


def test_asymmetric_h_rejected():
    bad = DISC_TEXT.replace("h = 1, 0 ; 0, 1", "h = 1, x ; 0, 1")
    with pytest.raises(ValidationError, match="symmetric"):
        parse_scenario(bad)


def test_symbolic_gradients_match_finite_differences(rng):
    from finsler_lab.errors import EvalError

    for name in list_examples():
        scenario = load_example(name)
        for chart in scenario.charts.values():
            pts = chart.domain.sample_grid(9)
            idx = rng.choice(len(pts), size=min(100, len(pts)), replace=False)
            for p in pts[idx]:
                try:
                    an = chart.field.differential(p)
                except EvalError:
                    # distance fields are not differentiable at their center
                    continue
                fd = numdiff.gradient(chart.field.value, p, step=1e-5)
                assert np.max(np.abs(fd - an)) <= 1e-8 * (1.0 + np.max(np.abs(an)))


def test_minkowski_wind_variants():
    for w in (0.3, 0.5, 0.8):
        scenario = minkowski_randers_distance(w)
        chart = scenario.chart
        p = np.array([1.3, -0.4])
        res = finsler_gradient(chart.metric, chart.field, p)
        assert res.finsler_norm == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValidationError):
        minkowski_randers_distance(1.0)


def test_sphere_chart_overlap_consistency(sphere_scenario):
    # the same geometric point in two charts must agree on every scalar
    # invariant: f itself and the transnormality profile value
    for chart_a, chart_b, mapping in sphere_scenario.chart_maps:
        ca = sphere_scenario.charts[chart_a]
        cb = sphere_scenario.charts[chart_b]
        thetas = (0.35, 0.6, 0.85) if chart_b == "north-cap" else (2.3, 2.55, 2.8)
        for theta in thetas:
            for phi in (0.0, 1.3, 4.1):
                pa = np.array([theta, phi])
                pb = mapping(pa)
                assert cb.domain.contains(pb)
                assert ca.field.value(pa) == pytest.approx(cb.field.value(pb), abs=1e-12)
                ra = finsler_gradient(ca.metric, ca.field, pa)
                rb = finsler_gradient(cb.metric, cb.field, pb)
                assert ra.finsler_norm == pytest.approx(rb.finsler_norm, abs=1e-11)


def test_known_profiles(disc_scenario, sphere_scenario, minkowski_scenario):
    assert disc_scenario.known_b(0.09) == pytest.approx(0.78**2)
    assert sphere_scenario.known_b(0.5) == pytest.approx(0.75)
    assert minkowski_scenario.known_b(1.7) == 1.0


def test_level_parametrizations_live_on_levels(disc_scenario, minkowski_scenario, sphere_scenario):
    for scenario, level in (
        (disc_scenario, 0.25),
        (minkowski_scenario, 1.5),
        (sphere_scenario, 0.5),
    ):
        chart = scenario.chart
        param = scenario.level_parametrization()
        for s in np.linspace(0.0, 0.9, 7):
            p = param(level, s)
            assert chart.field.value(p) == pytest.approx(level, abs=1e-10)
