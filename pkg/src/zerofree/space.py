"""Metric-measure spaces, regions and quadrature rules.

Two families of spaces are supported: axis-aligned Euclidean boxes and the
interval-union space built from a hypergraph (see :mod:`zerofree.hypergraph`).
Points are numpy arrays whose last axis is the ambient dimension (1 for the
interval-union space); every vectorised method accepts arbitrary leading axes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterator

import numpy as np
from scipy.stats import qmc

from .errors import DomainError, ResourceError

if TYPE_CHECKING:
    from .hypergraph import Hypergraph

EUCLIDEAN_BOX = "euclidean_box"
HYPERGRAPH_INTERVALS = "hypergraph_intervals"


def as_points(points, dimension: int) -> np.ndarray:
    """Coerce scalars / sequences to an array whose last axis has length ``dimension``."""
    arr = np.asarray(points, dtype=float)
    if dimension == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        arr = arr[..., None]
    if arr.shape[-1] != dimension:
        raise DomainError(f"expected points of dimension {dimension}, got shape {arr.shape}")
    return arr


class MetricMeasureSpace:
    """Common interface of the computable spaces.

    Subclasses provide ``dimension``, ``ordering_base``, ``_dist`` (vectorised,
    unchecked), ``contains`` and ``carrier``.
    """

    kind: str
    dimension: int
    ordering_base: np.ndarray

    def _dist(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, points) -> np.ndarray:
        raise NotImplementedError

    def carrier(self) -> "Region":
        raise NotImplementedError

    def ball_volume(self, radius: float) -> float:
        raise NotImplementedError

    def _check(self, points) -> np.ndarray:
        arr = as_points(points, self.dimension)
        if not np.all(self.contains(arr)):
            raise DomainError("point outside the carrier set")
        return arr

    def distance(self, p, q) -> np.ndarray | float:
        """Metric distance between ``p`` and ``q`` (broadcast over leading axes)."""
        out = self._dist(self._check(p), self._check(q))
        return float(out) if np.ndim(out) == 0 else out

    def distance_to_base(self, points: np.ndarray) -> np.ndarray:
        return self._dist(self.ordering_base, points)

    def ordering(self, tuples: np.ndarray) -> np.ndarray:
        """The ordering functional: sum of distances from the base point.

        ``tuples`` has shape ``(..., k, dim)``; the result has shape ``(...)``.
        An empty tuple (``k == 0``) has value 0.
        """
        if tuples.shape[-2] == 0:
            return np.zeros(tuples.shape[:-2])
        return self.distance_to_base(tuples).sum(axis=-1)

    def ordering_D(self, points) -> float:
        """Checked scalar version of :meth:`ordering` for a single tuple."""
        arr = as_points(points, self.dimension).reshape(-1, self.dimension)
        if arr.shape[0] == 0:
            return 0.0
        self._check(arr)
        return float(self.ordering(arr))

    def diameter(self, tuples: np.ndarray) -> np.ndarray:
        """Largest pairwise distance within each tuple of shape ``(..., k, dim)``."""
        k = tuples.shape[-2]
        if k < 2:
            return np.zeros(tuples.shape[:-2])
        out = None
        for i in range(k):
            for j in range(i + 1, k):
                d = self._dist(tuples[..., i, :], tuples[..., j, :])
                out = d if out is None else np.maximum(out, d)
        return out


@dataclass(frozen=True, eq=False)
class EuclideanBox(MetricMeasureSpace):
    """The box ``[lower, upper]`` in R^n with the Euclidean metric and Lebesgue measure."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    base: tuple[float, ...] | None = None

    kind = EUCLIDEAN_BOX

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or not lo:
            raise DomainError("lower and upper bounds must have the same positive length")
        if any(b <= a for a, b in zip(lo, hi)):
            raise DomainError("box must have positive side lengths")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        base = lo if self.base is None else tuple(float(v) for v in np.atleast_1d(self.base))
        object.__setattr__(self, "base", base)
        if not self.contains(np.array(base)):
            raise DomainError("ordering base point must lie in the box")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def ordering_base(self) -> np.ndarray:
        return np.array(self.base)

    def _dist(self, p, q):
        diff = np.asarray(p) - np.asarray(q)
        if diff.shape[-1] == 1:
            return np.abs(diff[..., 0])
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def contains(self, points) -> np.ndarray:
        arr = np.asarray(points, dtype=float)
        return np.all((arr >= np.array(self.lower)) & (arr <= np.array(self.upper)), axis=-1)

    def carrier(self) -> "Region":
        return Region(self, ((self.lower, self.upper),))

    def box(self, lower, upper) -> "Region":
        return Region(self, ((tuple(np.atleast_1d(lower)), tuple(np.atleast_1d(upper))),))

    def ball_volume(self, radius: float) -> float:
        """Volume of a radius-``radius`` ball in the ambient space (never clipped by the box)."""
        if radius <= 0:
            raise DomainError("radius must be positive")
        n = self.dimension
        if n == 1:
            return 2.0 * radius
        return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * radius**n


@dataclass(frozen=True, eq=False)
class HypergraphIntervals(MetricMeasureSpace):
    """Union of the unit intervals ``[2j, 2j+1]``, one per vertex ``j`` of a hypergraph.

    Points in one interval are ``R/10`` times their Euclidean distance apart; points
    in different intervals are separated by ``R/10 * (8 * hops + offsets / 10)``.
    """

    graph: "Hypergraph"
    R: float
    base: float | None = None
    _hops: np.ndarray = field(init=False, repr=False)

    kind = HYPERGRAPH_INTERVALS
    dimension = 1

    def __post_init__(self):
        if self.R <= 0:
            raise DomainError("R must be positive")
        hops = self.graph.hop_matrix()
        if np.any(hops < 0):
            raise DomainError("hop distance is undefined on a disconnected hypergraph")
        object.__setattr__(self, "_hops", hops)
        base = 2.0 if self.base is None else float(self.base)
        object.__setattr__(self, "base", base)
        if not self.contains(np.array([base])):
            raise DomainError("ordering base point must lie in the carrier")

    @property
    def ordering_base(self) -> np.ndarray:
        return np.array([self.base])

    @staticmethod
    def vertex_of(x: np.ndarray) -> np.ndarray:
        # right endpoint 2j+1 belongs to vertex j
        return np.floor(np.asarray(x) / 2.0).astype(np.int64)

    def _dist(self, p, q):
        x = np.asarray(p, dtype=float)[..., 0]
        y = np.asarray(q, dtype=float)[..., 0]
        vx, vy = self.vertex_of(x), self.vertex_of(y)
        ox, oy = x - 2 * vx, y - 2 * vy
        hops = self._hops[np.clip(vx - 1, 0, None), np.clip(vy - 1, 0, None)]
        scale = self.R / 10.0
        # grouped so the result is exactly symmetric in (p, q)
        far = scale * (8.0 * hops + 0.1 * (ox + oy))
        return np.where(vx == vy, scale * np.abs(x - y), far)

    def contains(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=float)[..., 0]
        v = self.vertex_of(x)
        return (v >= 1) & (v <= self.graph.n_vertices) & (x - 2 * v <= 1.0)

    def carrier(self) -> "Region":
        return self.vertices(range(1, self.graph.n_vertices + 1))

    def vertices(self, labels) -> "Region":
        """Region made of the intervals belonging to the given vertex labels."""
        return Region(self, tuple(((2.0 * j,), (2.0 * j + 1.0,)) for j in sorted(set(labels))))

    def ball_volume(self, radius: float) -> float:
        """Exact supremum over centres of the volume of a closed ball.

        The volume is piecewise linear in the centre's offset inside its interval,
        so the supremum is attained at one of finitely many breakpoints.
        """
        if radius <= 0:
            raise DomainError("radius must be positive")
        rho = 10.0 * radius / self.R
        hops = self._hops
        best = 0.0
        for v in range(hops.shape[0]):
            row = hops[v]
            others = [h for u, h in enumerate(row) if u != v and h > 0]
            cands = {0.0, 1.0, rho, 1.0 - rho}
            for h in set(others):
                reach = 10.0 * (rho - 8.0 * h)
                cands.update({reach, reach - 1.0})
            for a in cands:
                if not 0.0 <= a <= 1.0:
                    continue
                vol = min(1.0, a + rho) - max(0.0, a - rho)
                for h in others:
                    vol += min(1.0, max(0.0, 10.0 * (rho - 8.0 * h) - a))
                best = max(best, vol)
        return best


@dataclass(frozen=True, eq=False)
class Region:
    """A finite disjoint union of axis-aligned boxes inside a space."""

    space: MetricMeasureSpace
    boxes: tuple

    def __post_init__(self):
        boxes = tuple((tuple(float(v) for v in lo), tuple(float(v) for v in hi)) for lo, hi in self.boxes)
        for lo, hi in boxes:
            if len(lo) != self.space.dimension or len(hi) != self.space.dimension:
                raise DomainError("box dimension does not match the space")
            if any(b < a for a, b in zip(lo, hi)):
                raise DomainError("box bounds are reversed")
            if not (self.space.contains(np.array(lo)) and self.space.contains(np.array(hi))):
                raise DomainError("region must lie inside the space")
        object.__setattr__(self, "boxes", boxes)

    @property
    def volume(self) -> float:
        return math.fsum(math.prod(b - a for a, b in zip(lo, hi)) for lo, hi in self.boxes)

    def contains(self, points) -> np.ndarray:
        arr = np.asarray(points, dtype=float)
        out = np.zeros(arr.shape[:-1], dtype=bool)
        for lo, hi in self.boxes:
            out |= np.all((arr >= np.array(lo)) & (arr <= np.array(hi)), axis=-1)
        return out

    def union(self, other: "Region") -> "Region":
        if other.space is not self.space:
            raise DomainError("regions live in different spaces")
        return Region(self.space, self.boxes + other.boxes)


@dataclass(frozen=True, eq=False)
class OpenBall:
    """The set ``{y : d(centre, y) < radius}``; ``radius`` may be an array (batched)."""

    space: MetricMeasureSpace
    centre: np.ndarray
    radius: np.ndarray | float

    def contains(self, points) -> np.ndarray:
        return self.space._dist(self.centre, points) < self.radius


@dataclass(frozen=True)
class QuadratureSpec:
    """How to discretise integrals over ``Region^k``.

    ``tensor_midpoint``: ``resolution`` midpoint nodes per axis of every box.
    ``quasi_random``: ``resolution`` scrambled Sobol points in total, seeded by ``seed``.
    ``max_nodes`` caps the number of k-tuples any single rule may contain.
    """

    scheme: str = "tensor_midpoint"
    resolution: int = 64
    seed: int = 0
    max_nodes: int = 2**25
    chunk_size: int = 2**15

    def __post_init__(self):
        if self.scheme not in ("tensor_midpoint", "quasi_random"):
            raise DomainError(f"unknown quadrature scheme {self.scheme!r}")
        if self.resolution < 1:
            raise DomainError("resolution must be positive")

    def with_resolution(self, resolution: int) -> "QuadratureSpec":
        return QuadratureSpec(self.scheme, resolution, self.seed, self.max_nodes, self.chunk_size)


def _midpoint_points(region: Region, n: int) -> tuple[np.ndarray, np.ndarray]:
    pts, wts = [], []
    for lo, hi in region.boxes:
        axes = [a + (np.arange(n) + 0.5) * (b - a) / n for a, b in zip(lo, hi)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
        vol = math.prod(b - a for a, b in zip(lo, hi))
        pts.append(grid)
        wts.append(np.full(grid.shape[0], vol / grid.shape[0]))
    return np.concatenate(pts), np.concatenate(wts)


def _unit_to_region(region: Region, u: np.ndarray) -> np.ndarray:
    """Measure-preserving map from the unit cube onto the region (first axis picks the box)."""
    vols = np.array([math.prod(b - a for a, b in zip(lo, hi)) for lo, hi in region.boxes])
    cum = np.concatenate([[0.0], np.cumsum(vols)]) / vols.sum()
    which = np.clip(np.searchsorted(cum, u[..., 0], side="right") - 1, 0, len(vols) - 1)
    local = u.copy()
    local[..., 0] = (u[..., 0] - cum[which]) / (cum[which + 1] - cum[which])
    lo = np.array([b[0] for b in region.boxes])[which]
    hi = np.array([b[1] for b in region.boxes])[which]
    return lo + np.clip(local, 0.0, 1.0) * (hi - lo)


def rule_size(region: Region, spec: QuadratureSpec, k: int) -> int:
    if spec.scheme == "quasi_random":
        return spec.resolution
    base = len(region.boxes) * spec.resolution**region.space.dimension
    return base**k


def iter_quadrature(region: Region, spec: QuadratureSpec, k: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(points, weights)`` chunks of the k-fold rule in a fixed order.

    ``points`` has shape ``(c, k, dim)``. Chunks are contiguous index ranges of
    ``spec.chunk_size`` tuples, independent of any parallelism downstream.
    """
    if k < 1:
        raise DomainError("k must be at least 1")
    size = rule_size(region, spec, k)
    if size > spec.max_nodes:
        raise ResourceError(
            f"quadrature rule needs {size} nodes for k={k}, cap is {spec.max_nodes}",
            required=size,
            limit=spec.max_nodes,
        )
    dim = region.space.dimension
    if spec.scheme == "tensor_midpoint":
        base_pts, base_w = _midpoint_points(region, spec.resolution)
        nb = base_pts.shape[0]
        for start in range(0, size, spec.chunk_size):
            flat = np.arange(start, min(start + spec.chunk_size, size))
            idx = np.stack(np.unravel_index(flat, (nb,) * k), axis=-1)
            yield base_pts[idx], np.prod(base_w[idx], axis=-1)
    else:
        sampler = qmc.Sobol(d=k * dim, scramble=True, seed=spec.seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            u = sampler.random(size)
        pts = _unit_to_region(region, u.reshape(size, k, dim))
        w = np.full(size, region.volume**k / size)
        for start in range(0, size, spec.chunk_size):
            stop = min(start + spec.chunk_size, size)
            yield pts[start:stop], w[start:stop]


def quadrature_nodes(region: Region, spec: QuadratureSpec, k: int) -> tuple[np.ndarray, np.ndarray]:
    """The whole k-fold rule: points of shape ``(M, k, dim)`` and weights of shape ``(M,)``."""
    chunks = list(iter_quadrature(region, spec, k))
    return np.concatenate([c[0] for c in chunks]), np.concatenate([c[1] for c in chunks])
