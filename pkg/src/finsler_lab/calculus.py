"""Legendre transform, Finsler gradients and gradient-direction Hessians.

The Legendre map L(v) = g_v(v, .) equals half the vertical gradient of F^2,
and its Jacobian in v is exactly g_v (the Cartan correction term dies
against the reference vector), so inversion is a plain damped Newton on a
symmetric positive-definite system.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import numdiff
from .errors import CriticalPoint, NoConvergence, NotCritical, ZeroVector
from .expressions import VARIABLES, compile_expression
from .metrics import Covector, Metric, RandersMetric, ReverseMetric, RiemannianMetric, TangentVector

# band below which a differential counts as critical for gradient solves
GRADIENT_CRITICAL_NORM = 1e-12
# band used by samplers / hessian checks that must stay clear of criticals
REGULAR_POINT_NORM = 1e-8

NEWTON_BUDGET = 50
NEWTON_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Scalar function with evaluation and derivative oracles."""

    value: Callable[[np.ndarray], float]
    differential: Callable[[np.ndarray], np.ndarray]
    name: str = "f"
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @classmethod
    def from_callable(cls, value, differential=None, hessian=None, name="f", fd_step=1e-6):
        if differential is None:
            differential = lambda p: numdiff.gradient(value, p, step=fd_step)
        return cls(value=value, differential=differential, hessian=hessian, name=name)

    @classmethod
    def from_expression(cls, expr, dim, name="f"):
        """Build value/differential/hessian callables by symbolic derivation."""
        value = compile_expression(expr, dim)
        grads = [expr.diff(VARIABLES[i]) for i in range(dim)]
        grad_fns = [compile_expression(g, dim) for g in grads]
        hess_fns = [
            [compile_expression(grads[i].diff(VARIABLES[j]), dim) for j in range(dim)]
            for i in range(dim)
        ]

        def differential(p):
            return np.array([fn(p) for fn in grad_fns])

        def hessian(p):
            H = np.array([[hess_fns[i][j](p) for j in range(dim)] for i in range(dim)])
            return 0.5 * (H + H.T)

        return cls(value=value, differential=differential, hessian=hessian, name=name)


@dataclass(frozen=True, eq=False)
class GradientResult:
    gradient: TangentVector
    finsler_norm: float
    newton_iterations: int
    riemannian_gradient: Optional[TangentVector] = None


def legendre(metric: Metric, v: TangentVector) -> Covector:
    """L(v) = g_v(v, .) as a covector at v.base."""
    comps = 0.5 * metric.dF2_dy(v.base, v.vector)
    return Covector(base=v.base, components=comps)


def _initial_guess(metric, x, w):
    if isinstance(metric, (RandersMetric, RiemannianMetric)):
        return np.linalg.solve(metric.h_matrix(x), w)
    if isinstance(metric, ReverseMetric):
        return -_initial_guess(metric.inner, x, -w)
    return np.array(w, dtype=float)


def _legendre_inverse(metric, x, w, tol=None, budget=NEWTON_BUDGET):
    """Damped Newton for L(v) = w; returns (v, iterations)."""
    if tol is None:
        tol = getattr(metric, "newton_tolerance", NEWTON_TOL)
    wnorm = float(np.linalg.norm(w))
    if wnorm == 0.0:
        raise ZeroVector("Legendre inverse undefined for the zero covector")
    v = _initial_guess(metric, x, w)
    if float(np.linalg.norm(v)) == 0.0:
        v = np.array(w, dtype=float)

    def residual(vec):
        return 0.5 * metric.dF2_dy(x, vec) - w

    r = residual(v)
    rnorm = float(np.linalg.norm(r))
    target = tol * (1.0 + wnorm)
    for it in range(budget):
        if rnorm <= target:
            return v, it
        g = metric.fundamental_matrix(x, v)
        try:
            delta = np.linalg.solve(g, -r)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"fundamental tensor singular during Newton: {exc}") from exc
        step = 1.0
        while step > 1e-6:
            cand = v + step * delta
            if float(cand @ cand) > 0.0:
                r_cand = residual(cand)
                r_cand_norm = float(np.linalg.norm(r_cand))
                if r_cand_norm <= (1.0 - 0.5 * step) * rnorm + target:
                    v, r, rnorm = cand, r_cand, r_cand_norm
                    break
            step *= 0.5
        else:
            raise NoConvergence("line search stalled inverting the Legendre map")
    if rnorm <= target:
        return v, budget
    raise NoConvergence(
        f"Legendre inversion did not reach tolerance {target} in {budget} iterations"
    )


def legendre_inverse(metric: Metric, omega: Covector) -> TangentVector:
    """Unique v with g_v(v, .) = omega; damped Newton, budget 50 iterations."""
    v, _ = _legendre_inverse(metric, omega.base, omega.components)
    return TangentVector(base=omega.base, vector=v)


def finsler_gradient(
    metric: Metric, field: ScalarField, p, threshold=GRADIENT_CRITICAL_NORM
) -> GradientResult:
    """Gradient as the Legendre preimage of df at p."""
    p = np.asarray(p, dtype=float)
    df = np.asarray(field.differential(p), dtype=float)
    if float(np.linalg.norm(df)) < threshold:
        raise CriticalPoint(f"|df| = {np.linalg.norm(df)} below {threshold} at {p}")
    v, iterations = _legendre_inverse(metric, p, df)
    grad = TangentVector(base=p, vector=v)
    riem = None
    if isinstance(metric, RandersMetric):
        riem = TangentVector(base=p, vector=np.linalg.solve(metric.h_matrix(p), df))
    return GradientResult(
        gradient=grad,
        finsler_norm=metric.norm(p, v),
        newton_iterations=iterations,
        riemannian_gradient=riem,
    )


def check_randers_gradient_lemma(metric: RandersMetric, field: ScalarField, p):
    """Defects of the two Zermelo gradient identities at a regular point.

    Returns (vector identity defect in the h-norm, scalar identity defect):
    the wind-corrected rescaling of the Finsler gradient must reproduce the
    h-gradient, and the Finsler norm of the gradient must equal the
    h-gradient norm plus df(W).
    """
    if not isinstance(metric, RandersMetric):
        raise TypeError("gradient lemma applies to Randers metrics only")
    p = np.asarray(p, dtype=float)
    res = finsler_gradient(metric, field, p)
    df = np.asarray(field.differential(p), dtype=float)
    H = metric.h_matrix(p)
    W = metric.wind_at(p)
    grad = res.gradient.vector
    zn = res.finsler_norm
    riem = res.riemannian_gradient.vector
    riem_norm = float(np.sqrt(riem @ H @ riem))
    lhs = (riem_norm / zn) * (grad - zn * W)
    diff = lhs - riem
    vec_defect = float(np.sqrt(diff @ H @ diff))
    scalar_defect = abs(zn - (riem_norm + float(df @ W)))
    return vec_defect, scalar_defect


def hessian_along_gradient(metric: Metric, field: ScalarField, p, step_scale=1e-3):
    """(1/2) directional derivative of F^2(grad f) along grad f at p.

    For a transnormal function this is Hess f(grad f, grad f) and equals
    (1/2) b'(f) b(f); the connection never enters because the derivative is
    taken in the gradient direction itself.
    """
    p = np.asarray(p, dtype=float)
    base = finsler_gradient(metric, field, p)
    u = base.gradient.vector
    unorm = float(np.linalg.norm(u))
    direction = u / unorm

    def b_along(s):
        q = p + s * direction
        res = finsler_gradient(metric, field, q)
        return res.finsler_norm**2

    step = step_scale * (1.0 + float(np.linalg.norm(p)))
    derivative = numdiff.five_point_derivative(b_along, 0.0, step)
    return 0.5 * unorm * derivative


def coordinate_hessian_at_critical(field: ScalarField, p, threshold=REGULAR_POINT_NORM):
    """Symmetric matrix of second partials, valid only where df vanishes."""
    p = np.asarray(p, dtype=float)
    df_norm = float(np.linalg.norm(field.differential(p)))
    if df_norm > threshold:
        raise NotCritical(f"|df| = {df_norm} at {p}; not a critical point")
    if field.hessian is not None:
        H = np.asarray(field.hessian(p), dtype=float)
    else:
        H = numdiff.hessian(field.value, p, step=1e-4 * (1.0 + float(np.linalg.norm(p))))
    return 0.5 * (H + H.T)
