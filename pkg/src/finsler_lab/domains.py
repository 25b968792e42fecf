"""Chart domains used as integration guards."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class Domain:
    kind = "abstract"

    def contains(self, x) -> bool:
        raise NotImplementedError

    def sample_grid(self, per_axis):
        """Deterministic grid of interior points, used by level extraction."""
        raise NotImplementedError


@dataclass(frozen=True)
class BoxDomain(Domain):
    lower: np.ndarray
    upper: np.ndarray
    kind = "box"

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))

    @property
    def dim(self):
        return self.lower.size

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def sample_grid(self, per_axis):
        axes = [
            np.linspace(lo, hi, per_axis + 2)[1:-1]
            for lo, hi in zip(self.lower, self.upper)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class DiscDomain(Domain):
    """Euclidean ball; ``sphere-chart`` domains reuse this with radius < 1."""

    radius: float
    center: np.ndarray = field(default=None)
    dim: int = 2
    kind = "disc"

    def __post_init__(self):
        center = self.center
        if center is None:
            center = np.zeros(self.dim)
        center = np.asarray(center, dtype=float)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "dim", center.size)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.linalg.norm(x - self.center) <= self.radius)

    def sample_grid(self, per_axis):
        lo = self.center - self.radius
        hi = self.center + self.radius
        axes = [np.linspace(lo[i], hi[i], per_axis + 2)[1:-1] for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        keep = np.linalg.norm(pts - self.center, axis=1) <= self.radius * (1.0 - 1e-9)
        return pts[keep]
