"""Finsler metric structures on a coordinate chart.

Supported metrics: Riemannian (matrix field h), Randers built from Zermelo
data (h, W) with h(W,W) < 1, the reverse of any metric, and a
finite-difference fallback for custom norms. The Randers norm is the
solution Z of h(v/Z - W, v/Z - W) = 1; internally everything is computed
through the equivalent alpha+beta representation

    a_ij = h_ij / lam + (HW)_i (HW)_j / lam^2,   b_i = -(HW)_i / lam,
    lam = 1 - h(W,W),

whose y-derivatives (fundamental tensor, Cartan tensor, spray right-hand
sides) have closed forms. All operations are pure functions of their
inputs; instances carry only immutable field callables plus a one-slot
memo for the last queried base point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numdiff
from .errors import DimensionMismatch, NonConvexWind, ZeroVector

# reject winds this close to unit norm; conditioning of g_v degrades as
# 1/(1 - h(W,W)) and the Zermelo solution blows up
WIND_NORM_MARGIN = 1e-6


def as_point(coords) -> np.ndarray:
    p = np.atleast_1d(np.asarray(coords, dtype=float))
    if p.ndim != 1 or p.size < 1:
        raise DimensionMismatch(f"point must be a 1-d coordinate array, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DimensionMismatch(f"point has non-finite coordinates: {p}")
    return p


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A vector attached to a chart point."""

    base: np.ndarray
    vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", as_point(self.base))
        object.__setattr__(self, "vector", as_point(self.vector))
        if self.base.size != self.vector.size:
            raise DimensionMismatch(
                f"vector dimension {self.vector.size} != base dimension {self.base.size}"
            )

    @property
    def dim(self):
        return self.base.size


@dataclass(frozen=True, eq=False)
class Covector:
    """A differential (row vector) attached to a chart point."""

    base: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", as_point(self.base))
        object.__setattr__(self, "components", as_point(self.components))
        if self.base.size != self.components.size:
            raise DimensionMismatch(
                f"covector dimension {self.components.size} != base dimension {self.base.size}"
            )


@dataclass(frozen=True, eq=False)
class FundamentalTensorValue:
    """The direction-dependent inner product g_v at a reference vector."""

    at: TangentVector
    matrix: np.ndarray

    def inner(self, u, w):
        return float(np.asarray(u) @ self.matrix @ np.asarray(w))


class Metric:
    """Base interface; subclasses provide F and its y/x derivatives."""

    dim: int
    kind = "abstract"
    # achievable Legendre-inversion residual; differencing-based metrics
    # cannot reach the closed-form floor
    newton_tolerance = 1e-12

    # -- norm and vertical derivatives -------------------------------------

    def norm(self, x, y) -> float:
        """F at base point x and vector y; 0 on the zero vector."""
        raise NotImplementedError

    def fundamental_matrix(self, x, y) -> np.ndarray:
        """Matrix of g_y = (1/2) d^2 F^2 in the vector slot; needs y != 0."""
        raise NotImplementedError

    def cartan(self, x, y, w1, w2, w3) -> float:
        """Cartan tensor (1/4) third vertical derivative of F^2, contracted."""
        raise NotImplementedError

    def dF2_dy(self, x, y) -> np.ndarray:
        """Vertical gradient of F^2; equals twice the Legendre image of y."""
        raise NotImplementedError

    # -- horizontal derivatives (geodesic spray inputs) ---------------------

    def dF2_dx(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def d2F2_dydx(self, x, y) -> np.ndarray:
        """Mixed derivative M[i, k] = d^2 F^2 / dy^i dx^k."""
        raise NotImplementedError

    def reverse(self) -> "Metric":
        return ReverseMetric(self)

    def geodesic_stage(self, x, y):
        """(acceleration, speed) in one call; overridden with fused kernels.

        The generic path composes the public derivative methods and is what
        fallback metrics use.
        """
        g = self.fundamental_matrix(x, y)
        rhs = 0.5 * self.dF2_dx(x, y) - 0.5 * (self.d2F2_dydx(x, y) @ y)
        return _solve_spd(g, rhs), self.norm(x, y)

    # -- helpers -------------------------------------------------------------

    def _require_nonzero(self, y):
        y = np.asarray(y, dtype=float)
        if y.size != self.dim:
            raise DimensionMismatch(f"vector dimension {y.size} != metric dimension {self.dim}")
        if float(y @ y) == 0.0:
            raise ZeroVector("tensor undefined on the zero section")
        return y

    def _check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.size != self.dim:
            raise DimensionMismatch(f"point dimension {x.size} != metric dimension {self.dim}")
        return x


class RiemannianMetric(Metric):
    """Riemannian structure from a symmetric positive-definite matrix field."""

    kind = "riemannian"

    def __init__(self, matrix_field, dim, d_matrix_field=None, fd_step=1e-6):
        self.dim = dim
        self._h = matrix_field
        if d_matrix_field is None:
            d_matrix_field = _fd_matrix_derivative(matrix_field, dim, fd_step)
        self._dh = d_matrix_field
        self._memo_key = None
        self._memo = None

    @classmethod
    def constant(cls, matrix):
        matrix = np.asarray(matrix, dtype=float)
        dim = matrix.shape[0]
        zero = np.zeros((dim, dim, dim))
        return cls(lambda x: matrix, dim, lambda x: zero)

    def h_matrix(self, x):
        x = self._check_point(x)
        key = x.tobytes()
        if key != self._memo_key:
            H = np.asarray(self._h(x), dtype=float)
            if not np.allclose(H, H.T, atol=0.0):
                raise DimensionMismatch("metric matrix field is not symmetric")
            self._memo = H
            self._memo_key = key
        return self._memo

    def norm(self, x, y):
        y = np.asarray(y, dtype=float)
        H = self.h_matrix(x)
        q = float(y @ H @ y)
        if q < 0.0:
            raise NonConvexWind("matrix field is not positive definite at this point")
        return float(np.sqrt(q))

    def fundamental_matrix(self, x, y):
        self._require_nonzero(y)
        return self.h_matrix(x).copy()

    def cartan(self, x, y, w1, w2, w3):
        self._require_nonzero(y)
        return 0.0

    def dF2_dy(self, x, y):
        y = np.asarray(y, dtype=float)
        return 2.0 * self.h_matrix(x) @ y

    def dF2_dx(self, x, y):
        x = self._check_point(x)
        y = np.asarray(y, dtype=float)
        dH = np.asarray(self._dh(x), dtype=float)
        return np.einsum("kij,i,j->k", dH, y, y)

    def d2F2_dydx(self, x, y):
        x = self._check_point(x)
        y = np.asarray(y, dtype=float)
        dH = np.asarray(self._dh(x), dtype=float)
        return 2.0 * np.einsum("kij,j->ik", dH, y)

    def geodesic_stage(self, x, y):
        H = self.h_matrix(x)
        dH = np.asarray(self._dh(x), dtype=float)
        hy = H @ y
        f2 = float(y @ hy)
        if f2 < 0.0:
            raise NonConvexWind("matrix field is not positive definite at this point")
        q = dH @ y  # q[k, i] = (dH[k] y)_i
        rhs = 0.5 * (q @ y) - y @ q
        return _solve_spd(H, rhs), float(np.sqrt(f2))

    def reverse(self):
        return self


class RandersMetric(Metric):
    """Randers metric with Zermelo data (h, W), h(W, W) < 1."""

    kind = "randers"

    def __init__(self, h, wind, dim, dh=None, dwind=None, fd_step=1e-6):
        self.dim = dim
        self._h = h
        self._wind = wind
        if dh is None:
            dh = _fd_matrix_derivative(h, dim, fd_step)
        if dwind is None:
            dwind = _fd_vector_derivative(wind, dim, fd_step)
        self._dh = dh
        self._dwind = dwind
        self._memo0 = (None, None)
        self._memo1 = (None, None)
        self._memo2 = (None, None)

    @classmethod
    def constant_wind(cls, wind):
        """Minkowski Randers space: Euclidean h and a constant wind."""
        wind = np.asarray(wind, dtype=float)
        dim = wind.size
        eye = np.eye(dim)
        zero3 = np.zeros((dim, dim, dim))
        zero2 = np.zeros((dim, dim))
        return cls(
            lambda x: eye, lambda x: wind, dim, dh=lambda x: zero3, dwind=lambda x: zero2
        )

    def h_matrix(self, x):
        return self._alpha_beta(x).H

    def wind_at(self, x):
        return self._alpha_beta(x).W

    def _alpha_beta(self, x):
        x = self._check_point(x)
        key = x.tobytes()
        if key == self._memo0[0]:
            return self._memo0[1]
        H = np.asarray(self._h(x), dtype=float)
        W = np.asarray(self._wind(x), dtype=float)
        Wl = H @ W
        s = float(W @ Wl)
        if s >= 1.0 - WIND_NORM_MARGIN:
            raise NonConvexWind(f"h(W,W) = {s} at {x}; wind too strong for a Randers norm")
        lam = 1.0 - s
        A = H / lam + np.outer(Wl, Wl) / lam**2
        b = -Wl / lam
        data = _RandersPointData(H=H, W=W, Wl=Wl, lam=lam, A=A, b=b)
        self._memo0 = (key, data)
        return data

    def _alpha_beta_derivatives(self, x):
        x = self._check_point(x)
        key = x.tobytes()
        if key == self._memo1[0]:
            return self._memo1[1]
        pd = self._alpha_beta(x)
        dH = np.asarray(self._dh(x), dtype=float)
        dW = np.asarray(self._dwind(x), dtype=float)
        lam, Wl, H = pd.lam, pd.Wl, pd.H
        dWl = np.einsum("kij,j->ki", dH, pd.W) + dW @ H
        dlam = -(np.einsum("kij,i,j->k", dH, pd.W, pd.W) + 2.0 * (dW @ Wl))
        c1 = dlam / lam**2
        dA = (
            dH / lam
            - H[None, :, :] * c1[:, None, None]
            + (dWl[:, :, None] * Wl[None, None, :] + Wl[None, :, None] * dWl[:, None, :])
            / lam**2
            - np.outer(Wl, Wl)[None, :, :] * (2.0 * dlam / lam**3)[:, None, None]
        )
        db = -dWl / lam + Wl[None, :] * c1[:, None]
        out = (dA, db)
        self._memo1 = (key, out)
        return out

    def _at(self, x, y):
        """alpha/beta quantities of a nonzero vector at a point."""
        pd = self._alpha_beta(x)
        y = np.asarray(y, dtype=float)
        ay = pd.A @ y
        alpha2 = float(y @ ay)
        if alpha2 <= 0.0:
            raise ZeroVector("tensor undefined on the zero section")
        alpha = np.sqrt(alpha2)
        beta = float(pd.b @ y)
        ell = ay / alpha
        return pd, alpha, beta, ell

    def norm(self, x, y):
        pd = self._alpha_beta(x)
        y = np.asarray(y, dtype=float)
        alpha2 = float(y @ pd.A @ y)
        if alpha2 == 0.0:
            return 0.0
        return float(np.sqrt(alpha2) + pd.b @ y)

    def fundamental_matrix(self, x, y):
        y = self._require_nonzero(y)
        pd, alpha, beta, ell = self._at(x, y)
        m = ell + pd.b
        F = alpha + beta
        return np.outer(m, m) + (F / alpha) * (pd.A - np.outer(ell, ell))

    def cartan(self, x, y, w1, w2, w3):
        y = self._require_nonzero(y)
        pd, alpha, beta, ell = self._at(x, y)
        h_ang = pd.A - np.outer(ell, ell)
        rho = pd.b - (beta / alpha) * ell
        w1 = np.asarray(w1, dtype=float)
        w2 = np.asarray(w2, dtype=float)
        w3 = np.asarray(w3, dtype=float)
        return (
            float(w1 @ h_ang @ w2) * float(rho @ w3)
            + float(w1 @ h_ang @ w3) * float(rho @ w2)
            + float(w2 @ h_ang @ w3) * float(rho @ w1)
        ) / (2.0 * alpha)

    def dF2_dy(self, x, y):
        y = self._require_nonzero(y)
        pd, alpha, beta, ell = self._at(x, y)
        return 2.0 * (alpha + beta) * (ell + pd.b)

    def dF2_dx(self, x, y):
        y = np.asarray(y, dtype=float)
        pd, alpha, beta, ell = self._at(x, y)
        dA, db = self._alpha_beta_derivatives(x)
        dalpha = np.einsum("kij,i,j->k", dA, y, y) / (2.0 * alpha)
        dbeta = db @ y
        return 2.0 * (alpha + beta) * (dalpha + dbeta)

    def d2F2_dydx(self, x, y):
        y = np.asarray(y, dtype=float)
        pd, alpha, beta, ell = self._at(x, y)
        dA, db = self._alpha_beta_derivatives(x)
        F = alpha + beta
        m = ell + pd.b
        dalpha = np.einsum("kij,i,j->k", dA, y, y) / (2.0 * alpha)
        dbeta = db @ y
        dF = dalpha + dbeta
        # dl[k] = dA[k] y / alpha - l dalpha[k] / alpha
        dl = np.einsum("kij,j->ki", dA, y) / alpha - np.outer(dalpha, ell) / alpha
        dm = dl + db
        return 2.0 * np.outer(m, dF) + 2.0 * F * dm.T

    def _spray_data(self, x):
        """Memoized per-point pieces for the fused stage; avoids the dA tensor."""
        x = self._check_point(x)
        key = x.tobytes()
        if key == self._memo2[0]:
            return self._memo2[1]
        pd = self._alpha_beta(x)
        dH = np.asarray(self._dh(x), dtype=float)
        dW = np.asarray(self._dwind(x), dtype=float)
        dWl = dH @ pd.W + dW @ pd.H
        dlam = -((dH @ pd.W) @ pd.W + 2.0 * (dW @ pd.Wl))
        data = (pd, dH if dH.any() else None, dWl, dlam)
        self._memo2 = (key, data)
        return data

    def geodesic_stage(self, x, y):
        pd, dH, dWl, dlam = self._spray_data(x)
        A, b, Wl, H, lam = pd.A, pd.b, pd.Wl, pd.H, pd.lam
        ay = A @ y
        alpha2 = float(y @ ay)
        if alpha2 <= 0.0:
            raise ZeroVector("spray undefined on the zero section")
        alpha = np.sqrt(alpha2)
        beta = float(b @ y)
        F = alpha + beta
        ell = ay / alpha
        m = ell + b
        g = m[:, None] * m[None, :] + (F / alpha) * (A - ell[:, None] * ell[None, :])
        # q[k] = dA[k] @ y assembled from the Zermelo chain rule without
        # materializing the dA tensor
        c1 = dlam / lam**2
        wly = float(Wl @ y)
        dwly = dWl @ y
        q = (
            Wl[None, :] * (dwly / lam**2 - (2.0 * wly / lam**3) * dlam)[:, None]
            + dWl * (wly / lam**2)
        )
        Hy = H @ y
        q -= Hy[None, :] * c1[:, None]
        if dH is not None:
            q += (dH @ y) / lam
        dalpha = (q @ y) / (2.0 * alpha)
        dby = -dwly / lam + wly * c1
        dF = dalpha + dby
        sum_dl = (y @ q) / alpha - ell * (float(dalpha @ y) / alpha)
        sum_dm = sum_dl - (y @ dWl) / lam + Wl * float(y @ c1)
        rhs = F * dF - m * float(dF @ y) - F * sum_dm
        return _solve_spd(g, rhs), F

    def reverse(self):
        dwind = self._dwind
        return RandersMetric(
            self._h,
            _negated_field(self._wind),
            self.dim,
            dh=self._dh,
            dwind=(lambda x, _d=dwind: -np.asarray(_d(x), dtype=float)),
        )


class ReverseMetric(Metric):
    """Generic reverse F^-(v) = F(-v), delegating with sign flips."""

    kind = "reverse"

    def __init__(self, inner):
        self.inner = inner
        self.dim = inner.dim

    def norm(self, x, y):
        return self.inner.norm(x, -np.asarray(y, dtype=float))

    def fundamental_matrix(self, x, y):
        y = self._require_nonzero(y)
        return self.inner.fundamental_matrix(x, -y)

    def cartan(self, x, y, w1, w2, w3):
        y = self._require_nonzero(y)
        return -self.inner.cartan(x, -y, w1, w2, w3)

    def dF2_dy(self, x, y):
        y = self._require_nonzero(y)
        return -self.inner.dF2_dy(x, -y)

    def dF2_dx(self, x, y):
        return self.inner.dF2_dx(x, -np.asarray(y, dtype=float))

    def d2F2_dydx(self, x, y):
        return -self.inner.d2F2_dydx(x, -np.asarray(y, dtype=float))

    def geodesic_stage(self, x, y):
        # reverse geodesics are time-reversed originals: same acceleration
        # field evaluated at the flipped velocity
        return self.inner.geodesic_stage(x, -np.asarray(y, dtype=float))

    def reverse(self):
        return self.inner


class CustomMetric(Metric):
    """Metric defined only by a norm callable; derivatives by differencing.

    Exists for validation runs and user-supplied norms; roughly four digits
    cheaper in accuracy than the closed-form classes.
    """

    kind = "custom"
    newton_tolerance = 1e-8

    def __init__(self, norm_fn, dim, step=1e-4):
        self.dim = dim
        self._norm = norm_fn
        self._step = step

    def norm(self, x, y):
        x = self._check_point(x)
        return float(self._norm(x, np.asarray(y, dtype=float)))

    def _f2_y(self, x):
        return lambda y: self._norm(x, y) ** 2

    def norm_squared(self, x, y):
        return self.norm(x, y) ** 2

    def fundamental_matrix(self, x, y):
        y = self._require_nonzero(y)
        x = self._check_point(x)
        f2 = self._f2_y(x)
        n = self.dim
        scale = float(np.linalg.norm(y))
        step = self._step * scale
        g = np.empty((n, n))
        eye = np.eye(n)
        for i in range(n):
            for j in range(i, n):
                val = 0.5 * numdiff.second_directional(f2, y, eye[i], eye[j], step=step)
                g[i, j] = val
                g[j, i] = val
        return g

    def cartan(self, x, y, w1, w2, w3):
        y = self._require_nonzero(y)
        x = self._check_point(x)
        f2 = self._f2_y(x)
        step = 1e-3 * float(np.linalg.norm(y))
        return 0.25 * numdiff.third_directional(f2, y, w1, w2, w3, step=step)

    def dF2_dy(self, x, y):
        y = self._require_nonzero(y)
        x = self._check_point(x)
        f2 = self._f2_y(x)
        return numdiff.gradient(f2, y, step=self._step * float(np.linalg.norm(y)))

    def dF2_dx(self, x, y):
        x = self._check_point(x)
        y = np.asarray(y, dtype=float)
        scale = 1.0 + float(np.linalg.norm(x))
        return numdiff.gradient(lambda q: self._norm(q, y) ** 2, x, step=self._step * scale)

    def d2F2_dydx(self, x, y):
        x = self._check_point(x)
        y = np.asarray(y, dtype=float)
        scale = 1.0 + float(np.linalg.norm(x))
        return numdiff.jacobian(lambda q: self.dF2_dy(q, y), x, step=self._step * scale)


@dataclass(frozen=True)
class _RandersPointData:
    H: np.ndarray
    W: np.ndarray
    Wl: np.ndarray
    lam: float
    A: np.ndarray
    b: np.ndarray


def _solve_spd(g, rhs):
    """Solve g a = rhs for the small symmetric positive-definite systems here."""
    n = rhs.size
    if n == 2:
        det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
        if det == 0.0:
            raise np.linalg.LinAlgError("singular 2x2 system")
        return np.array(
            [
                (g[1, 1] * rhs[0] - g[0, 1] * rhs[1]) / det,
                (g[0, 0] * rhs[1] - g[1, 0] * rhs[0]) / det,
            ]
        )
    return np.linalg.solve(g, rhs)


def _negated_field(field):
    return lambda x: -np.asarray(field(x), dtype=float)


def _fd_matrix_derivative(field, dim, step):
    def d(x):
        x = np.asarray(x, dtype=float)
        out = np.empty((dim, dim, dim))
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = step
            out[k] = (np.asarray(field(x + e)) - np.asarray(field(x - e))) / (2.0 * step)
        return out

    return d


def _fd_vector_derivative(field, dim, step):
    def d(x):
        x = np.asarray(x, dtype=float)
        out = np.empty((dim, dim))
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = step
            out[k] = (np.asarray(field(x + e)) - np.asarray(field(x - e))) / (2.0 * step)
        return out

    return d


def euclidean_metric(dim) -> RiemannianMetric:
    return RiemannianMetric.constant(np.eye(dim))


# ---------------------------------------------------------------------------
# operation surface


def eval_metric(metric: Metric, v: TangentVector) -> float:
    """Norm F(v); positively homogeneous, 0 exactly on the zero vector."""
    _check_compat(metric, v)
    return metric.norm(v.base, v.vector)


def fundamental_tensor(metric: Metric, v: TangentVector) -> FundamentalTensorValue:
    """g_v as a symmetric positive-definite matrix; raises ZeroVector at v=0."""
    _check_compat(metric, v)
    matrix = metric.fundamental_matrix(v.base, v.vector)
    return FundamentalTensorValue(at=v, matrix=matrix)


def cartan_tensor(metric: Metric, v: TangentVector, w1, w2, w3) -> float:
    """Totally symmetric third vertical derivative contraction; C_v(v,..)=0."""
    _check_compat(metric, v)
    for w in (w1, w2, w3):
        if np.asarray(w).size != metric.dim:
            raise DimensionMismatch("Cartan argument dimension mismatch")
    return metric.cartan(v.base, v.vector, w1, w2, w3)


def reverse_metric(metric: Metric) -> Metric:
    """The metric v -> F(-v); an involution."""
    return metric.reverse()


def _check_compat(metric, v):
    if v.dim != metric.dim:
        raise DimensionMismatch(f"vector dimension {v.dim} != metric dimension {metric.dim}")
