"""Level-set extraction, orthogonal cones, parallelism and partition checks.

The partition test operationalizes the defining property of a Finsler
partition: geodesics launched orthogonally from a leaf must arrive
orthogonally at every leaf they meet, in both the ascending (forward rays)
and descending (backward rays) polarities. Orthogonality defects are the
normalized g_v pairings measured at refined level crossings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .calculus import ScalarField, finsler_gradient, _legendre_inverse
from .domains import Domain
from .errors import LeftDomain, LevelNotFound, NeverReached
from .geodesics import (
    integrate_geodesic,
    integrate_to_level,
    orthogonality_defect,
    tangent_basis_from_differential,
)
from .metrics import Metric, TangentVector

LEVEL_PROJECTION_TOL = 1e-10
NEWTON_PROJECTION_TOL = 1e-12
NEWTON_PROJECTION_BUDGET = 25
PARALLEL_PASS_TOL = 1e-4
PARALLEL_FAIL_SEPARATION = 0.05


@dataclass(frozen=True, eq=False)
class LevelSetSample:
    level: float
    points: np.ndarray  # (n, dim)
    tangent_bases: Tuple[np.ndarray, ...]  # per point, rows span ker df

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class OrthogonalCone:
    at: np.ndarray
    forward_ray: TangentVector
    backward_ray: TangentVector
    forward_defect: float
    backward_defect: float


@dataclass(frozen=True, eq=False)
class ParallelismReport:
    direction: str
    source_level: float
    target_level: float
    per_probe_defects: List[float]
    arc_lengths: List[float]
    unreached: int
    max_defect: float
    tolerance: float
    verdict: bool

    def to_dict(self):
        return {
            "direction": self.direction,
            "source_level": self.source_level,
            "target_level": self.target_level,
            "per_probe_defects": list(self.per_probe_defects),
            "arc_lengths": list(self.arc_lengths),
            "unreached": self.unreached,
            "max_defect": self.max_defect,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
        }


@dataclass(frozen=True, eq=False)
class EndPointMapResult:
    images: np.ndarray
    f_spread: float
    min_pairwise_distance: float
    failures: int


@dataclass(frozen=True, eq=False)
class PartitionReport:
    levels: List[float]
    forward: List[ParallelismReport]
    backward: List[ParallelismReport]
    cylinder_match_defects: List[float]
    cylinder_tolerance: float
    finsler_partition_verdict: bool

    def to_dict(self):
        return {
            "levels": list(self.levels),
            "forward": [r.to_dict() for r in self.forward],
            "backward": [r.to_dict() for r in self.backward],
            "cylinder_match_defects": list(self.cylinder_match_defects),
            "cylinder_tolerance": self.cylinder_tolerance,
            "finsler_partition_verdict": self.finsler_partition_verdict,
        }


# ---------------------------------------------------------------------------
# level sets


def _newton_project(field: ScalarField, p, c, domain=None):
    x = np.array(p, dtype=float)
    for _ in range(NEWTON_PROJECTION_BUDGET):
        r = field.value(x) - c
        if abs(r) <= NEWTON_PROJECTION_TOL:
            if domain is None or domain.contains(x):
                return x
            return None
        df = np.asarray(field.differential(x), dtype=float)
        dd = float(df @ df)
        if dd < 1e-18:
            return None
        x = x - (r / dd) * df
    return None


def extract_level_set(
    field: ScalarField,
    c: float,
    domain: Domain,
    n: int,
    parametrization=None,
) -> LevelSetSample:
    """n points with |f - c| <= 1e-10 plus tangent bases from ker df.

    Built-in scenarios supply an analytic parametrization; otherwise seeds
    come from a domain grid and are Newton-projected onto the level.
    """
    points: List[np.ndarray] = []
    if parametrization is not None:
        for i in range(n):
            s = i / n
            p = np.asarray(parametrization(c, s), dtype=float)
            if abs(field.value(p) - c) > LEVEL_PROJECTION_TOL:
                proj = _newton_project(field, p, c, domain)
                if proj is None:
                    continue
                p = proj
            if domain.contains(p):
                points.append(p)
        if not points:
            raise LevelNotFound(f"parametrized level {c} lies outside the domain")
    else:
        per_axis = max(12, int(np.ceil(2.0 * np.sqrt(n))))
        grid = domain.sample_grid(per_axis)
        values = np.array([field.value(p) for p in grid])
        if np.all(values > c) or np.all(values < c):
            raise LevelNotFound(
                f"level {c} not bracketed on the domain grid "
                f"(f range [{values.min()}, {values.max()}])"
            )
        order = np.argsort(np.abs(values - c))
        candidates = []
        for idx in order[: max(8 * n, 64)]:
            proj = _newton_project(field, grid[idx], c, domain)
            if proj is not None:
                candidates.append(proj)
        if not candidates:
            raise LevelNotFound(f"Newton projection found no points on level {c}")
        points = _spread_selection(candidates, n)
    bases = tuple(
        tangent_basis_from_differential(np.asarray(field.differential(p), dtype=float))
        for p in points
    )
    return LevelSetSample(level=float(c), points=np.array(points), tangent_bases=bases)


def _spread_selection(candidates, n):
    """Greedy farthest-point subset for even coverage of the level set."""
    pts = np.array(candidates)
    if len(pts) <= n:
        return list(pts)
    chosen = [0]
    dists = np.linalg.norm(pts - pts[0], axis=1)
    while len(chosen) < n:
        idx = int(np.argmax(dists))
        chosen.append(idx)
        dists = np.minimum(dists, np.linalg.norm(pts - pts[idx], axis=1))
    return [pts[i] for i in chosen]


# ---------------------------------------------------------------------------
# cones and parallelism


def orthogonal_cone(metric: Metric, field: ScalarField, p) -> OrthogonalCone:
    """F-unit forward/backward rays of the two-ray orthogonal cone at p."""
    p = np.asarray(p, dtype=float)
    res = finsler_gradient(metric, field, p)
    forward = res.gradient.vector / res.finsler_norm
    df = np.asarray(field.differential(p), dtype=float)
    w, _ = _legendre_inverse(metric, p, -df)
    backward = w / metric.norm(p, w)
    basis = tangent_basis_from_differential(df)
    fwd_vec = TangentVector(base=p, vector=forward)
    bwd_vec = TangentVector(base=p, vector=backward)
    return OrthogonalCone(
        at=p,
        forward_ray=fwd_vec,
        backward_ray=bwd_vec,
        forward_defect=orthogonality_defect(metric, fwd_vec, basis),
        backward_defect=orthogonality_defect(metric, bwd_vec, basis),
    )


def _probe_rays(metric, field, sample: LevelSetSample, direction: str):
    rays = []
    for p in sample.points:
        cone = orthogonal_cone(metric, field, p)
        rays.append(cone.forward_ray if direction == "forward" else cone.backward_ray)
    return rays


def check_parallel(
    metric: Metric,
    field: ScalarField,
    c: float,
    d: float,
    direction: str,
    probes: int,
    domain: Domain,
    level_parametrization=None,
    step: float = 1e-3,
    tolerance: float = PARALLEL_PASS_TOL,
    t_max: float = 10.0,
) -> ParallelismReport:
    """Launch orthogonal geodesics between two levels, record arrival defects.

    Forward runs ascend from the lower level along forward rays; backward
    runs descend from the upper level along backward rays. A probe that
    never attains the target is recorded, and only fatal if no probe
    arrives.
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    lo, hi = (c, d) if c < d else (d, c)
    source, target = (lo, hi) if direction == "forward" else (hi, lo)
    sample = extract_level_set(
        field, source, domain, probes, parametrization=level_parametrization
    )
    rays = _probe_rays(metric, field, sample, direction)
    defects: List[float] = []
    lengths: List[float] = []
    unreached = 0
    first_error: Optional[Exception] = None
    for ray in rays:
        try:
            ev = integrate_to_level(
                metric, ray, field, target, step=step, domain=domain, t_max=t_max
            )
        except NeverReached as exc:
            unreached += 1
            if first_error is None:
                first_error = exc
            continue
        defects.append(ev.orthogonality_defect)
        lengths.append(ev.arc_length)
    if not defects:
        raise NeverReached(
            f"no probe reached level {target} from {source}: {first_error}"
        )
    max_defect = float(np.max(defects))
    return ParallelismReport(
        direction=direction,
        source_level=float(source),
        target_level=float(target),
        per_probe_defects=[float(v) for v in defects],
        arc_lengths=[float(v) for v in lengths],
        unreached=unreached,
        max_defect=max_defect,
        tolerance=tolerance,
        verdict=bool(max_defect <= tolerance),
    )


def build_cylinder(
    metric: Metric,
    field: ScalarField,
    source: LevelSetSample,
    r: float,
    direction: str = "forward",
    step: float = 1e-3,
    domain: Optional[Domain] = None,
):
    """Exponential image of r times the chosen cone ray over the source.

    Returns (points, failures); per-point domain exits are skipped and
    counted, and the call fails only if nothing survives.
    """
    if r < 0.0:
        raise ValueError("cylinder radius must be nonnegative")
    if r == 0.0:
        return np.array(source.points, copy=True), 0
    rays = _probe_rays(metric, field, source, direction)
    images = []
    failures = 0
    for ray in rays:
        try:
            traj = integrate_geodesic(metric, ray, r, step=step, domain=domain)
        except LeftDomain:
            failures += 1
            continue
        images.append(traj.points[-1])
    if not images:
        raise LeftDomain(f"all {len(rays)} cylinder probes left the domain")
    return np.array(images), failures


def end_point_map(
    metric: Metric,
    field: ScalarField,
    source: LevelSetSample,
    t: float,
    step: float = 1e-3,
    domain: Optional[Domain] = None,
) -> EndPointMapResult:
    """Flow the source level a fixed distance along unit gradient rays.

    Reports the f-spread of the images (leaf-synchronization check) and the
    minimum pairwise image distance as the injectivity proxy.
    """
    images, failures = build_cylinder(
        metric, field, source, t, direction="forward", step=step, domain=domain
    )
    fvals = np.array([field.value(p) for p in images])
    spread = float(fvals.max() - fvals.min()) if len(fvals) else float("nan")
    min_dist = float("inf")
    for i in range(len(images)):
        for j in range(i + 1, len(images)):
            min_dist = min(min_dist, float(np.linalg.norm(images[i] - images[j])))
    if len(images) < 2:
        min_dist = float("nan")
    return EndPointMapResult(
        images=images, f_spread=spread, min_pairwise_distance=min_dist, failures=failures
    )


def check_finsler_partition(
    metric: Metric,
    field: ScalarField,
    levels,
    probes: int,
    domain: Domain,
    level_parametrization=None,
    step: float = 1e-3,
    tolerance: float = PARALLEL_PASS_TOL,
    cylinder_probes: int = 12,
    t_max: float = 10.0,
) -> PartitionReport:
    """Both-direction parallelism over adjacent level pairs plus cylinders.

    The cylinder check flows a subsample of each lower (resp. upper) leaf by
    the median probe arc length and measures how far the image scatters from
    the adjacent level.
    """
    levels = sorted(float(v) for v in levels)
    if len(levels) < 2:
        raise ValueError("need at least two levels")
    forward_reports: List[ParallelismReport] = []
    backward_reports: List[ParallelismReport] = []
    cylinder_defects: List[float] = []
    for lo, hi in zip(levels[:-1], levels[1:]):
        fwd = check_parallel(
            metric, field, lo, hi, "forward", probes, domain,
            level_parametrization=level_parametrization, step=step,
            tolerance=tolerance, t_max=t_max,
        )
        bwd = check_parallel(
            metric, field, lo, hi, "backward", probes, domain,
            level_parametrization=level_parametrization, step=step,
            tolerance=tolerance, t_max=t_max,
        )
        forward_reports.append(fwd)
        backward_reports.append(bwd)
        n_cyl = min(cylinder_probes, probes)
        for report, direction in ((fwd, "forward"), (bwd, "backward")):
            source = extract_level_set(
                field, report.source_level, domain, n_cyl,
                parametrization=level_parametrization,
            )
            radius = float(np.median(report.arc_lengths))
            try:
                images, _ = build_cylinder(
                    metric, field, source, radius, direction=direction,
                    step=step, domain=domain,
                )
            except LeftDomain:
                cylinder_defects.append(float("inf"))
                continue
            fvals = np.array([field.value(p) for p in images])
            cylinder_defects.append(float(np.max(np.abs(fvals - report.target_level))))
    # cylinder defects are f-value mismatches; compare them on the tolerance
    # scale of the parallelism test
    all_parallel = all(r.verdict for r in forward_reports + backward_reports)
    cylinders_ok = all(v <= tolerance for v in cylinder_defects)
    return PartitionReport(
        levels=levels,
        forward=forward_reports,
        backward=backward_reports,
        cylinder_match_defects=cylinder_defects,
        cylinder_tolerance=tolerance,
        finsler_partition_verdict=bool(all_parallel and cylinders_ok),
    )
