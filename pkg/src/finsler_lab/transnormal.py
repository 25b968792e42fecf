"""Transnormality checks, f-segments, distance formula, Hessian identities.

A function f is transnormal when F(grad f)^2 depends on position only
through f; the checker bins samples of F(grad f)^2 by f-value, measures the
within-level spread, and fits the one-variable profile b by monotone
piecewise-cubic interpolation of the bin medians. The fitted profile closes
the loop for the distance formula (integral of 1/sqrt(b) between levels)
and the gradient-direction Hessian identity (half b' b).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import PchipInterpolator

from .calculus import (
    REGULAR_POINT_NORM,
    ScalarField,
    coordinate_hessian_at_critical,
    finsler_gradient,
    hessian_along_gradient,
)
from .domains import Domain
from .errors import (
    CriticalPoint,
    EmptySample,
    IntervalContainsCriticalValue,
    LeftDomain,
    NeverReached,
    NoCriticalPoint,
)
from .foliation import extract_level_set
from .geodesics import CrossingEvent, GeodesicTrajectory, integrate_geodesic, spray_coefficients
from .geodesics import tangent_basis_from_differential, orthogonality_defect
from .metrics import Metric, RiemannianMetric, TangentVector

B_CRITICAL_THRESHOLD = 1e-10
NEAR_CRITICAL_B = 1e-3
CRITICAL_GUARD = 1e-6


@dataclass(frozen=True, eq=False)
class BFit:
    """Monotone piecewise-cubic interpolant of the transnormality profile."""

    nodes: np.ndarray
    values: np.ndarray
    _interp: PchipInterpolator
    _deriv: Callable

    @classmethod
    def from_table(cls, nodes, values):
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if nodes.size == 1:
            # degenerate single-level table: constant profile
            const = float(values[0])
            interp = PchipInterpolator(
                np.array([nodes[0] - 0.5, nodes[0] + 0.5]), np.array([const, const])
            )
        else:
            interp = PchipInterpolator(nodes, values, extrapolate=True)
        return cls(nodes=nodes, values=values, _interp=interp, _deriv=interp.derivative())

    def __call__(self, t):
        return float(self._interp(t))

    def derivative(self, t):
        return float(self._deriv(t))

    @property
    def t_min(self):
        return float(self.nodes[0])

    @property
    def t_max(self):
        return float(self.nodes[-1])


@dataclass(frozen=True, eq=False)
class TransnormalityReport:
    sample_count: int
    b_table: List[Tuple[float, List[float]]]
    spread_per_level: float
    b_fit: BFit
    tolerance: float
    verdict: bool

    def to_dict(self):
        return {
            "sample_count": self.sample_count,
            "b_table": [
                {"level": lvl, "values": list(vals)} for lvl, vals in self.b_table
            ],
            "spread_per_level": self.spread_per_level,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
        }


@dataclass(frozen=True, eq=False)
class FSegment:
    trajectory: GeodesicTrajectory
    direction: str
    level_crossings: List[CrossingEvent]
    reparametrization_residual: float
    geodesic_residual: float
    monotone: bool


@dataclass(frozen=True, eq=False)
class DistanceCheck:
    geodesic_distance: float
    quadrature_distance: float
    defect: float
    c_requested: float
    d_requested: float
    c_effective: float
    d_effective: float
    tail_lower: float
    tail_upper: float
    per_probe_lengths: List[float]

    def to_dict(self):
        return {
            "geodesic_distance": self.geodesic_distance,
            "quadrature_distance": self.quadrature_distance,
            "defect": self.defect,
            "c_requested": self.c_requested,
            "d_requested": self.d_requested,
            "c_effective": self.c_effective,
            "d_effective": self.d_effective,
            "tail_lower": self.tail_lower,
            "tail_upper": self.tail_upper,
            "per_probe_lengths": list(self.per_probe_lengths),
        }


@dataclass(frozen=True, eq=False)
class HatReductionCheck:
    gradient_defect: float
    norm_defect: float


@dataclass(frozen=True, eq=False)
class HessianIdentityReport:
    max_defect: float
    samples: List[Dict[str, float]]
    tolerance: float
    verdict: bool

    def to_dict(self):
        return {
            "max_defect": self.max_defect,
            "samples": self.samples,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
        }


@dataclass(frozen=True, eq=False)
class MorseBottReport:
    critical_points: List[np.ndarray]
    critical_values: List[float]
    hessians: List[np.ndarray]
    kernel_dims: List[int]
    tangent_dims: List[int]
    codimensions: List[int]
    transversal_nondegenerate: bool
    b_prime_at_end: List[float]
    hess_unit_values: List[float]
    hess_vs_half_bprime_defect: float
    verdict: bool

    def to_dict(self):
        return {
            "critical_points": [list(map(float, p)) for p in self.critical_points],
            "critical_values": list(self.critical_values),
            "hessians": [[list(map(float, row)) for row in h] for h in self.hessians],
            "kernel_dims": list(self.kernel_dims),
            "tangent_dims": list(self.tangent_dims),
            "codimensions": list(self.codimensions),
            "transversal_nondegenerate": self.transversal_nondegenerate,
            "b_prime_at_end": list(self.b_prime_at_end),
            "hess_unit_values": list(self.hess_unit_values),
            "hess_vs_half_bprime_defect": self.hess_vs_half_bprime_defect,
            "verdict": self.verdict,
        }


# ---------------------------------------------------------------------------
# sampling helpers


def regular_sampler(domain: Domain, field: ScalarField, n_target: int = 250,
                    threshold: float = REGULAR_POINT_NORM):
    """Deterministic grid points of the domain with |df| above threshold."""
    per_axis = max(6, int(np.ceil(np.sqrt(n_target * 1.3))))
    pts = domain.sample_grid(per_axis)
    keep = [
        p for p in pts
        if float(np.linalg.norm(np.asarray(field.differential(p)))) >= threshold
    ]
    if not keep:
        raise EmptySample("no regular sample points on the domain grid")
    return np.array(keep)


def pointwise_b(metric: Metric, field: ScalarField, p) -> float:
    """F(grad f)^2 at a single regular point."""
    return finsler_gradient(metric, field, p).finsler_norm ** 2


# ---------------------------------------------------------------------------
# transnormality


def check_transnormal(
    metric: Metric,
    field: ScalarField,
    points,
    tolerance: float = 1e-6,
    bin_width: Optional[float] = None,
    threshold: float = REGULAR_POINT_NORM,
) -> TransnormalityReport:
    """Bin F(grad f)^2 by f-value and measure the within-level spread."""
    samples = []
    for p in np.asarray(points, dtype=float):
        df = np.asarray(field.differential(p), dtype=float)
        if float(np.linalg.norm(df)) < threshold:
            continue
        samples.append((field.value(p), pointwise_b(metric, field, p)))
    if not samples:
        raise EmptySample("no regular points to sample the transnormality profile")
    samples.sort()
    ts = np.array([s[0] for s in samples])
    bs = np.array([s[1] for s in samples])
    t_range = float(ts[-1] - ts[0])
    if bin_width is None:
        bin_width = max(1e-3, t_range / 200.0) if t_range > 0 else 1e-3
    indices = np.floor((ts - ts[0]) / bin_width).astype(int)
    table: List[Tuple[float, List[float]]] = []
    max_spread = 0.0
    for k in np.unique(indices):
        mask = indices == k
        level = float(np.median(ts[mask]))
        values = [float(v) for v in bs[mask]]
        table.append((level, values))
        max_spread = max(max_spread, max(values) - min(values))
    nodes = np.array([lvl for lvl, _ in table])
    medians = np.array([float(np.median(vals)) for _, vals in table])
    # defensive dedupe: PCHIP needs strictly increasing nodes
    keep = np.concatenate(([True], np.diff(nodes) > 1e-12))
    fit = BFit.from_table(nodes[keep], medians[keep])
    return TransnormalityReport(
        sample_count=len(samples),
        b_table=table,
        spread_per_level=float(max_spread),
        b_fit=fit,
        tolerance=tolerance,
        verdict=bool(max_spread <= tolerance),
    )


def level_grid_b_report(
    metric: Metric,
    field: ScalarField,
    domain: Domain,
    c: float,
    d: float,
    n_levels: int = 64,
    probes_per_level: int = 3,
    parametrization=None,
    tolerance: float = 1e-6,
) -> TransnormalityReport:
    """Transnormality report with b sampled on a level grid spanning [c, d].

    The grid is uniform plus a geometric ladder toward both endpoints so the
    fitted profile stays accurate where 1/sqrt(b) develops its integrable
    singularity.
    """
    levels = set(np.linspace(c, d, n_levels))
    span = d - c
    for k in range(1, 13):
        levels.add(c + span * 0.25**k)
        levels.add(d - span * 0.25**k)
    points = []
    for lvl in sorted(levels):
        try:
            sample = extract_level_set(
                field, lvl, domain, probes_per_level, parametrization=parametrization
            )
        except Exception:
            continue
        points.extend(sample.points)
    if not points:
        raise EmptySample(f"no level-set points found in [{c}, {d}]")
    return check_transnormal(
        metric, field, np.array(points), tolerance=tolerance,
        bin_width=max(1e-9, span / (8.0 * n_levels)),
    )


# ---------------------------------------------------------------------------
# f-segments


def trace_f_segment(
    metric: Metric,
    field: ScalarField,
    start,
    direction: str = "forward",
    domain: Optional[Domain] = None,
    step: float = 1e-3,
    record_levels: Sequence[float] = (),
    f_stop: Optional[float] = None,
    t_max: float = 10.0,
    residual_samples: int = 40,
) -> FSegment:
    """Arc-length gradient flow of f; forward ascends, backward descends.

    The backward segment is the time reversal of the forward one (the
    descending ray is unit for the reverse metric), and the traced curve is
    checked a posteriori against the spray equation of the appropriate
    metric.
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    sign = 1.0 if direction == "forward" else -1.0
    metric_eff = metric if direction == "forward" else metric.reverse()

    def flow(x):
        res = finsler_gradient(metric, field, x)
        return sign * res.gradient.vector / res.finsler_norm

    start = np.asarray(start, dtype=float)
    if domain is not None and not domain.contains(start):
        raise LeftDomain(f"start point {start} outside the domain", point=start)
    x = start.copy()
    t = 0.0
    times = [0.0]
    points = [x.copy()]
    velocities = [flow(x)]
    pending = sorted(set(float(v) for v in record_levels))
    crossings: List[CrossingEvent] = []
    f_prev = field.value(x)
    stop_reached = False
    n_steps = int(np.ceil(t_max / step))

    def rk4_flow(x0, h):
        k1 = flow(x0)
        k2 = flow(x0 + 0.5 * h * k1)
        k3 = flow(x0 + 0.5 * h * k2)
        k4 = flow(x0 + h * k3)
        return x0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def refine_crossing(x0, t0, h, target):
        lo, hi = 0.0, h
        x_hi = rk4_flow(x0, h)
        phi0 = field.value(x0) - target
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            x_mid = rk4_flow(x0, mid)
            phi_mid = field.value(x_mid) - target
            if phi_mid == 0.0:
                hi, x_hi = mid, x_mid
                break
            if (phi_mid > 0.0) == (phi0 > 0.0):
                lo = mid
            else:
                hi, x_hi = mid, x_mid
        vel = flow(x_hi)
        df = np.asarray(field.differential(x_hi), dtype=float)
        basis = tangent_basis_from_differential(df)
        defect = orthogonality_defect(metric_eff, TangentVector(x_hi, vel), basis)
        return CrossingEvent(
            time=float(t0 + hi),
            point=x_hi,
            velocity=vel,
            level_value=float(target),
            orthogonality_defect=float(defect),
            arc_length=float(t0 + hi),
        )

    for _ in range(n_steps):
        x_new = rk4_flow(x, step)
        t_new = t + step
        if domain is not None and not domain.contains(x_new):
            raise LeftDomain(
                f"gradient flow left the domain at t = {t_new}", point=x_new, time=t_new
            )
        f_new = field.value(x_new)
        for lvl in list(pending):
            if (f_prev - lvl) == 0.0 or ((f_new - lvl > 0.0) != (f_prev - lvl > 0.0)):
                crossings.append(refine_crossing(x, t, step, lvl))
                pending.remove(lvl)
        if f_stop is not None and ((f_new - f_stop > 0.0) != (f_prev - f_stop > 0.0)):
            ev = refine_crossing(x, t, step, f_stop)
            times.append(ev.time)
            points.append(ev.point)
            velocities.append(ev.velocity)
            stop_reached = True
            break
        x, t, f_prev = x_new, t_new, f_new
        times.append(t)
        points.append(x.copy())
        velocities.append(flow(x))
    if f_stop is not None and not stop_reached:
        raise NeverReached(f"gradient flow never reached f = {f_stop} within {t_max}")

    times_a = np.array(times)
    points_a = np.array(points)
    velocities_a = np.array(velocities)
    speeds = np.array([metric_eff.norm(p, v) for p, v in zip(points_a, velocities_a)])
    # unit-speed flow: arc length accumulates with time
    arcs = np.concatenate(
        ([0.0], np.cumsum(0.5 * (speeds[1:] + speeds[:-1]) * np.diff(times_a)))
    )
    traj = GeodesicTrajectory(
        times=times_a, points=points_a, velocities=velocities_a,
        arc_lengths=arcs, metric=metric_eff,
    )
    reparam = float(np.max(np.abs(speeds - 1.0)))
    # spray residual at interior samples: measured acceleration from the
    # velocity samples vs. the geodesic spray of the effective metric
    m = len(points_a)
    geo_res = 0.0
    if m >= 3:
        stride = max(1, (m - 2) // residual_samples)
        for i in range(1, m - 1, stride):
            dt_local = times_a[i + 1] - times_a[i - 1]
            a_meas = (velocities_a[i + 1] - velocities_a[i - 1]) / dt_local
            a_spray = spray_coefficients(
                metric_eff, TangentVector(points_a[i], velocities_a[i])
            )
            geo_res = max(geo_res, float(np.max(np.abs(a_meas - a_spray))))
    fvals = np.array([field.value(p) for p in points_a])
    diffs = np.diff(fvals)
    monotone = bool(np.all(diffs > 0.0)) if direction == "forward" else bool(
        np.all(diffs < 0.0)
    )
    return FSegment(
        trajectory=traj,
        direction=direction,
        level_crossings=crossings,
        reparametrization_residual=reparam,
        geodesic_residual=geo_res,
        monotone=monotone,
    )


# ---------------------------------------------------------------------------
# distance formula


def _guard_upper(fit: BFit, e: float, guard: float, near_b: float):
    b_end = max(fit(e), 0.0)
    if b_end >= near_b:
        return e, 0.0
    slope = fit.derivative(e)
    if slope >= 0.0:
        return e, 0.0
    t_star = e + b_end / (-slope)
    e_eff = min(e, t_star - guard)
    gap = t_star - e_eff
    slope_eff = abs(fit.derivative(e_eff))
    tail = 2.0 * np.sqrt(gap / slope_eff) if slope_eff > 0 else 0.0
    return e_eff, float(tail)


def _guard_lower(fit: BFit, e: float, guard: float, near_b: float):
    b_end = max(fit(e), 0.0)
    if b_end >= near_b:
        return e, 0.0
    slope = fit.derivative(e)
    if slope <= 0.0:
        return e, 0.0
    t_star = e - b_end / slope
    e_eff = max(e, t_star + guard)
    gap = e_eff - t_star
    slope_eff = abs(fit.derivative(e_eff))
    tail = 2.0 * np.sqrt(gap / slope_eff) if slope_eff > 0 else 0.0
    return e_eff, float(tail)


def verify_distance_formula(
    metric: Metric,
    field: ScalarField,
    c: float,
    d: float,
    probes: int = 8,
    domain: Optional[Domain] = None,
    b_report: Optional[TransnormalityReport] = None,
    level_parametrization=None,
    step: float = 1e-3,
    guard: float = CRITICAL_GUARD,
    t_max: float = 10.0,
) -> DistanceCheck:
    """Compare min gradient-segment arc length with the profile quadrature.

    Both sides receive the same square-root tail correction when an
    endpoint sits inside the near-critical band, so the reported values
    approximate the limiting distance to the critical level while the
    defect stays a pure geodesic-vs-quadrature comparison.
    """
    if not c < d:
        raise ValueError("need c < d")
    if domain is None:
        raise ValueError("a chart domain is required")
    if b_report is None:
        b_report = level_grid_b_report(
            metric, field, domain, c, d, parametrization=level_parametrization
        )
    fit = b_report.b_fit

    d_eff, tail_upper = _guard_upper(fit, d, guard, NEAR_CRITICAL_B)
    c_eff, tail_lower = _guard_lower(fit, c, guard, NEAR_CRITICAL_B)
    # interior critical values invalidate the formula outright; scan the fit
    # plus its own nodes (where interpolation minima live)
    margin = 0.05 * (d_eff - c_eff)
    scan = list(np.linspace(c_eff, d_eff, 513)[1:-1])
    scan += [t for t in fit.nodes if c_eff < t < d_eff]
    for t in scan:
        if c_eff + margin < t < d_eff - margin and fit(t) <= B_CRITICAL_THRESHOLD:
            raise IntervalContainsCriticalValue(
                f"fitted b vanishes near t = {t} inside ({c}, {d})"
            )

    source = extract_level_set(
        field, c_eff, domain, probes, parametrization=level_parametrization
    )
    lengths = []
    for p in source.points:
        seg = trace_f_segment(
            metric, field, p, "forward", domain=domain, step=step,
            f_stop=d_eff, t_max=t_max,
        )
        lengths.append(float(seg.trajectory.arc_lengths[-1]))
    geo = float(np.min(lengths)) + tail_lower + tail_upper

    integrand = lambda s: 1.0 / np.sqrt(max(fit(s), B_CRITICAL_THRESHOLD))
    with warnings.catch_warnings():
        # near-critical endpoints push the integrand toward its integrable
        # singularity; quad flags roundoff long before the 1e-4 budget cares
        warnings.simplefilter("ignore", IntegrationWarning)
        quad_val, _ = quad(integrand, c_eff, d_eff, limit=500, epsabs=1e-10, epsrel=1e-10)
    quadrature = float(quad_val) + tail_lower + tail_upper

    return DistanceCheck(
        geodesic_distance=geo,
        quadrature_distance=quadrature,
        defect=abs(geo - quadrature),
        c_requested=float(c),
        d_requested=float(d),
        c_effective=float(c_eff),
        d_effective=float(d_eff),
        tail_lower=tail_lower,
        tail_upper=tail_upper,
        per_probe_lengths=lengths,
    )


# ---------------------------------------------------------------------------
# hat-metric reduction


def hat_metric(metric: Metric, field: ScalarField, fd_step: float = 1e-4) -> RiemannianMetric:
    """Riemannian metric field g_{grad f}; derivatives by differencing."""

    def matrix_field(x):
        res = finsler_gradient(metric, field, x)
        return metric.fundamental_matrix(x, res.gradient.vector)

    return RiemannianMetric(matrix_field, metric.dim, fd_step=fd_step)


def check_hat_metric_reduction(metric: Metric, field: ScalarField, p) -> HatReductionCheck:
    """Gradient and gradient-norm agreement between F and g_{grad f}."""
    p = np.asarray(p, dtype=float)
    res = finsler_gradient(metric, field, p)
    ghat = metric.fundamental_matrix(p, res.gradient.vector)
    df = np.asarray(field.differential(p), dtype=float)
    grad_hat = np.linalg.solve(ghat, df)
    norm_hat = float(np.sqrt(grad_hat @ ghat @ grad_hat))
    return HatReductionCheck(
        gradient_defect=float(np.linalg.norm(res.gradient.vector - grad_hat)),
        norm_defect=abs(res.finsler_norm - norm_hat),
    )


def gradient_geodesic_deviation(
    metric: Metric,
    field: ScalarField,
    p,
    t_end: float = 1.0,
    step: float = 1e-3,
    domain: Optional[Domain] = None,
) -> float:
    """Max separation of the F-geodesic and the hat-metric geodesic.

    Both start with the gradient vector at p; for a transnormal function
    they traverse the same gradient curve at the same constant speed, so
    the separation isolates integrator-plus-reduction error.
    """
    p = np.asarray(p, dtype=float)
    v0 = finsler_gradient(metric, field, p).gradient.vector
    start = TangentVector(p, v0)
    finsler_traj = integrate_geodesic(metric, start, t_end, step=step, domain=domain)
    hat = hat_metric(metric, field)
    hat_traj = integrate_geodesic(hat, start, t_end, step=step, domain=domain)
    return float(np.max(np.linalg.norm(finsler_traj.points - hat_traj.points, axis=1)))


# ---------------------------------------------------------------------------
# Hessian identity


def check_hessian_identity(
    metric: Metric,
    field: ScalarField,
    points,
    b_report: Optional[TransnormalityReport] = None,
    domain: Optional[Domain] = None,
    tolerance: float = 1e-3,
) -> HessianIdentityReport:
    """Normalized defect of Hess f(grad f, grad f) = (1/2) b'(f) b(f)."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise EmptySample("no sample points for the Hessian identity")
    if b_report is None:
        ts = [field.value(p) for p in pts]
        if domain is None:
            raise ValueError("need a domain or a precomputed profile report")
        b_report = level_grid_b_report(
            metric, field, domain, float(np.min(ts)), float(np.max(ts))
        )
    fit = b_report.b_fit
    samples = []
    max_defect = 0.0
    for p in pts:
        try:
            measured = hessian_along_gradient(metric, field, p)
        except CriticalPoint:
            continue
        t = field.value(p)
        b_t = fit(t)
        bp_t = fit.derivative(t)
        if b_t <= B_CRITICAL_THRESHOLD:
            continue
        defect = abs(2.0 * measured / b_t - bp_t) / (1.0 + abs(bp_t))
        samples.append(
            {
                "t": float(t),
                "hess_grad_grad": float(measured),
                "b": float(b_t),
                "b_prime": float(bp_t),
                "defect": float(defect),
            }
        )
        max_defect = max(max_defect, defect)
    if not samples:
        raise EmptySample("all Hessian-identity samples were critical")
    return HessianIdentityReport(
        max_defect=float(max_defect),
        samples=samples,
        tolerance=tolerance,
        verdict=bool(max_defect <= tolerance),
    )


# ---------------------------------------------------------------------------
# Morse-Bott hypotheses


def _newton_critical_point(field: ScalarField, seed, domain=None, budget=60):
    x = np.array(seed, dtype=float)
    for _ in range(budget):
        df = np.asarray(field.differential(x), dtype=float)
        if float(np.linalg.norm(df)) <= 1e-12:
            if domain is None or domain.contains(x):
                return x
            return None
        if field.hessian is not None:
            H = np.asarray(field.hessian(x), dtype=float)
        else:
            from . import numdiff

            H = numdiff.hessian(field.value, x)
        try:
            delta = np.linalg.solve(H, -df)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(delta)) or float(np.linalg.norm(delta)) > 1e3:
            return None
        x = x + delta
    return None


def check_morse_bott(
    metric: Metric,
    field: ScalarField,
    seeds,
    domain: Optional[Domain] = None,
    kernel_threshold: float = 1e-6,
    probe_eps: float = 1e-5,
) -> MorseBottReport:
    """Locate critical points and test the Morse-Bott hypotheses.

    Kernel dimensions come from coordinate Hessian eigenvalues, tangent
    dimensions from the spread of converged Newton iterates, and the
    profile slope at the critical value from one-sided differencing of
    pointwise F(grad f)^2 along transversal eigendirections.
    """
    found: List[np.ndarray] = []
    for seed in np.atleast_2d(np.asarray(seeds, dtype=float)):
        x = _newton_critical_point(field, seed, domain=domain)
        if x is not None:
            found.append(x)
    if not found:
        raise NoCriticalPoint("Newton found no critical point from any seed")
    # cluster converged iterates; isolated points collapse to singletons
    reps: List[List[np.ndarray]] = []
    for x in found:
        for group in reps:
            if np.linalg.norm(group[0] - x) < 1e-4:
                group.append(x)
                break
        else:
            reps.append([x])

    critical_points = []
    critical_values = []
    hessians = []
    kernel_dims = []
    tangent_dims = []
    codims = []
    b_primes = []
    hess_units = []
    worst_pair_defect = 0.0
    nondegenerate = True
    dim = metric.dim
    for group in reps:
        members = np.array(group)
        p_star = members[0]
        # tangent dimension from the scatter of distinct converged iterates
        distinct = _spread_distinct(members)
        if len(distinct) > 1:
            centered = distinct - distinct.mean(axis=0)
            svals = np.linalg.svd(centered, compute_uv=False)
            tangent_dim = int(np.sum(svals > 1e-6 * (1.0 + np.linalg.norm(p_star))))
        else:
            tangent_dim = 0
        H = coordinate_hessian_at_critical(field, p_star)
        eigvals, eigvecs = np.linalg.eigh(H)
        kernel = np.abs(eigvals) <= kernel_threshold
        kernel_dim = int(np.sum(kernel))
        if np.any(~kernel) and np.min(np.abs(eigvals[~kernel])) <= kernel_threshold:
            nondegenerate = False
        if kernel_dim == dim:
            nondegenerate = False
        t_star = field.value(p_star)
        # transversal probe of the profile slope: b vanishes at the critical
        # value, so a one-sided quotient recovers b' there
        slopes = []
        unit_vals = []
        scale = 1.0 + float(np.linalg.norm(p_star))
        for idx in np.where(~kernel)[0]:
            e = eigvecs[:, idx]
            for s in (1.0, -1.0):
                q = p_star + s * probe_eps * scale * e
                try:
                    b_q = pointwise_b(metric, field, q)
                except CriticalPoint:
                    continue
                t_q = field.value(q)
                if t_q != t_star:
                    slopes.append(b_q / (t_q - t_star))
            f_unit = metric.norm(p_star, e)
            if f_unit > 0:
                u = e / f_unit
                unit_vals.append(float(u @ H @ u))
            f_unit_neg = metric.norm(p_star, -e)
            if f_unit_neg > 0:
                u = -e / f_unit_neg
                unit_vals.append(float(u @ H @ u))
        b_prime = float(np.mean(slopes)) if slopes else float("nan")
        critical_points.append(p_star)
        critical_values.append(float(t_star))
        hessians.append(H)
        kernel_dims.append(kernel_dim)
        tangent_dims.append(tangent_dim)
        codims.append(dim - tangent_dim)
        b_primes.append(b_prime)
        hess_units.extend(unit_vals)
        if slopes and unit_vals:
            half_bp = 0.5 * b_prime
            for v in unit_vals:
                worst_pair_defect = max(
                    worst_pair_defect, abs(v - half_bp) / (1.0 + abs(half_bp))
                )
    verdict = nondegenerate and all(
        k == t for k, t in zip(kernel_dims, tangent_dims)
    )
    return MorseBottReport(
        critical_points=critical_points,
        critical_values=critical_values,
        hessians=hessians,
        kernel_dims=kernel_dims,
        tangent_dims=tangent_dims,
        codimensions=codims,
        transversal_nondegenerate=bool(nondegenerate),
        b_prime_at_end=b_primes,
        hess_unit_values=hess_units,
        hess_vs_half_bprime_defect=float(worst_pair_defect),
        verdict=bool(verdict),
    )


def _spread_distinct(members, radius: float = 1e-8):
    chosen: List[np.ndarray] = []
    for x in members:
        if all(np.linalg.norm(x - y) > radius for y in chosen):
            chosen.append(x)
    return np.array(chosen)
