"""Geodesic spray, fixed-step integration, exponential map, level crossings.

Geodesics solve the Euler-Lagrange system of the energy (1/2)F^2: with
M[i,k] = d^2F^2/dy^i dx^k the acceleration a satisfies

    g_y a = (1/2) dF2_dx - (1/2) M ydot,

a dense symmetric solve at the desk-scale dimensions used here. Integration
is classical fixed-step 4th order with the running arc length carried as an
extra state component, so the length converges at the same order as the
trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .calculus import ScalarField
from .domains import Domain
from .errors import LeftDomain, NeverReached, SingularTensor, ZeroVector
from .metrics import Metric, TangentVector

DEFAULT_STEP = 1e-3
DEFAULT_TIME_BUDGET = 10.0
BISECTION_STEPS = 80


@dataclass(frozen=True, eq=False)
class GeodesicTrajectory:
    """Time-stamped geodesic samples with cumulative metric length."""

    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    arc_lengths: np.ndarray
    metric: Metric

    @property
    def endpoint(self) -> TangentVector:
        return TangentVector(base=self.points[-1], vector=self.velocities[-1])

    def speeds(self):
        return np.array(
            [self.metric.norm(x, v) for x, v in zip(self.points, self.velocities)]
        )

    def speed_drift(self):
        s = self.speeds()
        return float(np.max(np.abs(s - s[0])) / s[0])


@dataclass(frozen=True, eq=False)
class CrossingEvent:
    """A refined level-set crossing along an integrated geodesic."""

    time: float
    point: np.ndarray
    velocity: np.ndarray
    level_value: float
    orthogonality_defect: float
    arc_length: float


def spray_coefficients(metric: Metric, v: TangentVector) -> np.ndarray:
    """Acceleration a(x, xdot) making solutions of xddot = a geodesics."""
    x, y = v.base, v.vector
    if float(y @ y) == 0.0:
        raise ZeroVector("spray undefined on the zero section")
    try:
        a, _ = metric.geodesic_stage(x, y)
    except np.linalg.LinAlgError as exc:
        raise SingularTensor(f"fundamental tensor singular at {x}: {exc}") from exc
    return a


def _rk4_step(metric, x, y, dt):
    """One classical step of (x, y, arclen); returns new (x, y, dlen)."""
    stage = metric.geodesic_stage
    try:
        k1y, k1l = stage(x, y)
        y2 = y + 0.5 * dt * k1y
        x2 = x + 0.5 * dt * y
        k2y, k2l = stage(x2, y2)
        y3 = y + 0.5 * dt * k2y
        x3 = x + 0.5 * dt * y2
        k3y, k3l = stage(x3, y3)
        y4 = y + dt * k3y
        x4 = x + dt * y3
        k4y, k4l = stage(x4, y4)
    except np.linalg.LinAlgError as exc:
        raise SingularTensor(f"fundamental tensor singular near {x}: {exc}") from exc
    new_x = x + dt / 6.0 * (y + 2.0 * y2 + 2.0 * y3 + y4)
    new_y = y + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    dlen = dt / 6.0 * (k1l + 2.0 * k2l + 2.0 * k3l + k4l)
    return new_x, new_y, dlen


def integrate_geodesic(
    metric: Metric,
    v0: TangentVector,
    t_end: float,
    step: float = DEFAULT_STEP,
    domain: Optional[Domain] = None,
) -> GeodesicTrajectory:
    """Fixed-step 4th-order integration of the spray ODE up to t_end."""
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    if step <= 0.0:
        raise ValueError("step must be positive")
    if metric.norm(v0.base, v0.vector) <= 0.0:
        raise ZeroVector("cannot integrate a geodesic with zero initial velocity")
    n_steps = max(1, int(np.ceil(t_end / step - 1e-12)))
    dt = t_end / n_steps
    x = v0.base.copy()
    y = v0.vector.copy()
    if domain is not None and not domain.contains(x):
        raise LeftDomain(f"initial point {x} outside the chart domain", point=x, time=0.0)
    times = [0.0]
    points = [x.copy()]
    velocities = [y.copy()]
    lengths = [0.0]
    arclen = 0.0
    for k in range(n_steps):
        x, y, dlen = _rk4_step(metric, x, y, dt)
        arclen += dlen
        t = (k + 1) * dt
        if domain is not None and not domain.contains(x):
            raise LeftDomain(
                f"geodesic left the chart domain at t = {t}", point=x, time=t
            )
        times.append(t)
        points.append(x.copy())
        velocities.append(y.copy())
        lengths.append(arclen)
    return GeodesicTrajectory(
        times=np.array(times),
        points=np.array(points),
        velocities=np.array(velocities),
        arc_lengths=np.array(lengths),
        metric=metric,
    )


def exp_map(
    metric: Metric,
    v: TangentVector,
    step: float = DEFAULT_STEP,
    domain: Optional[Domain] = None,
) -> np.ndarray:
    """Endpoint of the unit-time geodesic with initial vector v."""
    if float(v.vector @ v.vector) == 0.0:
        return v.base.copy()
    traj = integrate_geodesic(metric, v, 1.0, step=step, domain=domain)
    return traj.points[-1]


def tangent_basis_from_differential(df) -> np.ndarray:
    """Orthonormal basis of ker(df), rows are basis vectors."""
    df = np.asarray(df, dtype=float)
    n = df.size
    q, _ = np.linalg.qr(np.column_stack([df] + [e for e in np.eye(n)]))
    # first column spans df; remaining n-1 columns span the kernel
    return q[:, 1:n].T.copy()


def orthogonality_defect(metric: Metric, gamma_dot: TangentVector, tangent_basis) -> float:
    """Worst normalized g_v pairing of the velocity against tangent vectors.

    Normalization is Cauchy-Schwarz in g_v, so the defect lies in [0, 1]
    and vanishes exactly at orthogonality.
    """
    x, v = gamma_dot.base, gamma_dot.vector
    if float(v @ v) == 0.0:
        raise ZeroVector("orthogonality defect needs a nonzero velocity")
    g = metric.fundamental_matrix(x, v)
    fv = metric.norm(x, v)
    worst = 0.0
    for u in np.atleast_2d(np.asarray(tangent_basis, dtype=float)):
        denom = fv * float(np.sqrt(u @ g @ u))
        worst = max(worst, abs(float(v @ g @ u)) / denom)
    return worst


def integrate_to_level(
    metric: Metric,
    v0: TangentVector,
    field: ScalarField,
    target: float,
    step: float = DEFAULT_STEP,
    domain: Optional[Domain] = None,
    t_max: float = DEFAULT_TIME_BUDGET,
    bisections: int = BISECTION_STEPS,
) -> CrossingEvent:
    """March the geodesic until f crosses the target level, then bisect.

    The sign change is bracketed inside one integrator step and refined by
    bisection on the sub-step length; each probe redoes a single 4th-order
    step from the bracket's left state, so refinement inherits the
    integrator's accuracy.
    """
    if metric.norm(v0.base, v0.vector) <= 0.0:
        raise ZeroVector("cannot integrate a geodesic with zero initial velocity")
    x = v0.base.copy()
    y = v0.vector.copy()
    if domain is not None and not domain.contains(x):
        raise NeverReached(f"start point {x} outside the chart domain")
    arclen = 0.0
    t = 0.0
    phi = field.value(x) - target
    n_steps = int(np.ceil(t_max / step))
    for _ in range(n_steps):
        x_new, y_new, dlen = _rk4_step(metric, x, y, step)
        t_new = t + step
        if domain is not None and not domain.contains(x_new):
            raise NeverReached(
                f"geodesic left the chart domain at t = {t_new} before reaching f = {target}"
            )
        phi_new = field.value(x_new) - target
        if phi_new == 0.0 or (phi_new > 0.0) != (phi > 0.0):
            # crossing inside (t, t_new]; bisect the sub-step length
            lo, hi = 0.0, step
            x_hi, y_hi, dlen_hi = x_new, y_new, dlen
            for _ in range(bisections):
                mid = 0.5 * (lo + hi)
                if mid == lo or mid == hi:
                    break
                x_mid, y_mid, dlen_mid = _rk4_step(metric, x, y, mid)
                phi_mid = field.value(x_mid) - target
                if phi_mid == 0.0:
                    x_hi, y_hi, dlen_hi = x_mid, y_mid, dlen_mid
                    hi = mid
                    break
                if (phi_mid > 0.0) == (phi > 0.0):
                    lo = mid
                else:
                    hi = mid
                    x_hi, y_hi, dlen_hi = x_mid, y_mid, dlen_mid
            cross_x, cross_y = x_hi, y_hi
            cross_t = t + hi
            cross_len = arclen + dlen_hi
            df = np.asarray(field.differential(cross_x), dtype=float)
            basis = tangent_basis_from_differential(df)
            defect = orthogonality_defect(
                metric, TangentVector(base=cross_x, vector=cross_y), basis
            )
            return CrossingEvent(
                time=float(cross_t),
                point=cross_x,
                velocity=cross_y,
                level_value=target,
                orthogonality_defect=defect,
                arc_length=float(cross_len),
            )
        x, y, t, phi = x_new, y_new, t_new, phi_new
        arclen += dlen
    raise NeverReached(
        f"f never reached {target} within time budget {t_max} (last f = {phi + target})"
    )


def polyline_length(metric: Metric, points, samples_per_segment: int = 32) -> float:
    """Metric length of a piecewise-linear path by per-segment Simpson rule."""
    pts = np.asarray(points, dtype=float)
    if samples_per_segment % 2 == 1:
        samples_per_segment += 1
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        delta = b - a
        ss = np.linspace(0.0, 1.0, samples_per_segment + 1)
        vals = np.array([metric.norm(a + s * delta, delta) for s in ss])
        weights = np.ones_like(ss)
        weights[1:-1:2] = 4.0
        weights[2:-1:2] = 2.0
        total += float(np.sum(weights * vals)) / (3.0 * samples_per_segment)
    return total
