"""Repulsive finite-range multi-body potentials and their decorations.

A :class:`Potential` is a family of symmetric kernels indexed by arity plus an
ordered list of decorations (pinning, partial pinning, exclusion) applied left
to right. Kernels and decorations are vectorised: a kernel maps an array of
tuples of shape ``(..., k, dim)`` to values of shape ``(...)`` in ``[0, inf]``.

Decoration parameters may themselves carry leading axes; they broadcast against
the tuples they are evaluated on, which is how a whole batch of decorated
potentials is evaluated in one pass.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Mapping

import numpy as np

from .errors import DomainError, ResourceError
from .space import EuclideanBox, MetricMeasureSpace, as_points

Kernel = Callable[[np.ndarray], np.ndarray]

DEFAULT_MAX_ARITY = 8


@dataclass(frozen=True, eq=False)
class Pin:
    """Pin the tuple ``points`` (shape ``(..., q, dim)``)."""

    points: np.ndarray


@dataclass(frozen=True, eq=False)
class PartialPin:
    """Pin ``point`` only for argument tuples whose ordering value is below ``threshold``."""

    point: np.ndarray
    threshold: np.ndarray | float


@dataclass(frozen=True, eq=False)
class Exclude:
    """Send the one-body value to infinity on ``region`` (anything with ``contains``)."""

    region: object


def _join(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    lead = np.broadcast_shapes(x.shape[:-2], p.shape[:-2])
    return np.concatenate(
        [np.broadcast_to(x, lead + x.shape[-2:]), np.broadcast_to(p, lead + p.shape[-2:])], axis=-2
    )


@dataclass(frozen=True, eq=False)
class Potential:
    """Arity-indexed repulsive kernels with range ``range`` and a decoration list.

    ``tail``, when given as ``(m0, kernel)``, supplies the kernel for every arity
    ``>= m0`` not listed in ``kernels``. ``max_arity`` caps the size of tuples on
    which the Hamiltonian may be evaluated.
    """

    space: MetricMeasureSpace
    kernels: Mapping[int, Kernel] = field(default_factory=dict)
    range: float = 0.0
    tail: tuple[int, Kernel] | None = None
    decorations: tuple = ()
    max_arity: int = DEFAULT_MAX_ARITY
    name: str = "potential"
    _active_cache: dict = field(default_factory=dict, init=False, repr=False)

    # --- structure ---------------------------------------------------------

    def _base_kernel(self, m: int) -> Kernel | None:
        if m in self.kernels:
            return self.kernels[m]
        if self.tail is not None and m >= self.tail[0]:
            return self.tail[1]
        return None

    def _active(self, level: int, m: int) -> bool:
        """Whether the level-``level`` decorated kernel of arity ``m`` can be nonzero."""
        if m < 1:
            return False
        key = (level, m)
        hit = self._active_cache.get(key)
        if hit is not None:
            return hit
        if level == 0:
            out = self._base_kernel(m) is not None
        else:
            dec = self.decorations[level - 1]
            if isinstance(dec, Pin):
                q = dec.points.shape[-2]
                out = any(self._active(level - 1, m + j) for j in range(q + 1))
            elif isinstance(dec, PartialPin):
                out = self._active(level - 1, m) or self._active(level - 1, m + 1)
            else:
                out = m == 1 or self._active(level - 1, m)
        self._active_cache[key] = out
        return out

    def active_arities(self, limit: int) -> list[int]:
        """Arities ``<= limit`` whose decorated kernel is not identically zero."""
        return [m for m in range(1, limit + 1) if self._active(len(self.decorations), m)]

    # --- evaluation --------------------------------------------------------

    def _eval(self, x: np.ndarray, level: int) -> np.ndarray:
        m = x.shape[-2]
        if not self._active(level, m):
            return np.zeros(x.shape[:-2])
        if level == 0:
            return np.asarray(self._base_kernel(m)(x), dtype=float)
        dec = self.decorations[level - 1]
        val = self._eval(x, level - 1)
        if isinstance(dec, Pin):
            q = dec.points.shape[-2]
            for size in range(1, q + 1):
                if not self._active(level - 1, m + size):
                    continue
                for sub in combinations(range(q), size):
                    val = val + self._eval(_join(x, dec.points[..., list(sub), :]), level - 1)
        elif isinstance(dec, PartialPin):
            if self._active(level - 1, m + 1):
                below = self.space.ordering(x) < dec.threshold
                extra = self._eval(_join(x, dec.point[..., None, :]), level - 1)
                val = val + np.where(below, extra, 0.0)
        elif m == 1:
            val = np.where(dec.region.contains(x[..., 0, :]), np.inf, val)
        return val

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Decorated kernel value on tuples of shape ``(..., m, dim)`` (unchecked)."""
        return self._eval(x, len(self.decorations))

    def phi(self, points) -> float | np.ndarray:
        """Checked evaluation on a single tuple or a batch of tuples."""
        x = as_points(points, self.space.dimension)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[-2] == 0:
            raise DomainError("tuple must be nonempty")
        self.space._check(x)
        out = self.evaluate(x)
        return float(out) if np.ndim(out) == 0 else out

    def energy(self, x: np.ndarray) -> np.ndarray:
        """Hamiltonian: sum of the decorated kernel over nonempty sub-tuples (unchecked)."""
        m = x.shape[-2]
        if m > self.max_arity:
            raise ResourceError(
                f"tuple of size {m} exceeds the arity cap {self.max_arity}", required=m, limit=self.max_arity
            )
        level = len(self.decorations)
        if m > 1:
            # canonical point order makes the float summation exactly permutation invariant
            keys = np.moveaxis(x[..., ::-1], -1, 0)
            idx = np.lexsort(keys, axis=-1)
            x = np.take_along_axis(x, idx[..., None], axis=-2)
        total = np.zeros(x.shape[:-2])
        for size in range(1, m + 1):
            if not self._active(level, size):
                continue
            for sub in combinations(range(m), size):
                total = total + self._eval(x[..., list(sub), :], level)
        return total

    def hamiltonian(self, points) -> float | np.ndarray:
        """Checked Hamiltonian on a single tuple ``(m, dim)`` or a batch ``(..., m, dim)``."""
        x = as_points(points, self.space.dimension)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[-2] == 0:
            raise DomainError("tuple must be nonempty")
        self.space._check(x)
        out = self.energy(x)
        return float(out) if np.ndim(out) == 0 else out

    # --- decorations -------------------------------------------------------

    def _decorated(self, dec) -> "Potential":
        return dataclasses.replace(self, decorations=self.decorations + (dec,))

    def pin(self, points) -> "Potential":
        """Pin a tuple of points; leading axes of ``points`` batch the result."""
        p = as_points(points, self.space.dimension)
        if p.ndim == 1:
            p = p[None, :]
        if p.shape[-2] == 0:
            return self
        return self._decorated(Pin(p))

    def partial_pin(self, point, threshold) -> "Potential":
        """Pin ``point`` for argument tuples ``x`` with ordering value ``D(x) < threshold``."""
        y = as_points(point, self.space.dimension)
        t = np.asarray(threshold, dtype=float)
        if np.any(t < 0):
            raise DomainError("threshold must lie in [0, inf]")
        return self._decorated(PartialPin(y, t))

    def exclude(self, region) -> "Potential":
        return self._decorated(Exclude(region))


def pin(potential: Potential, points) -> Potential:
    return potential.pin(points)


def partial_pin(potential: Potential, point, threshold) -> Potential:
    return potential.partial_pin(point, threshold)


def exclude(potential: Potential, region) -> Potential:
    return potential.exclude(region)


# --- ball containment -----------------------------------------------------


def enclosing_radius(x: np.ndarray) -> np.ndarray:
    """Radius of the minimum enclosing ball of each tuple in ``x`` (shape ``(..., k, d)``).

    The minimum ball is the circumscribed ball of some affinely independent support
    subset of at most ``d + 1`` points, so we take the smallest circumscribed ball,
    over all such subsets, that contains every point.
    """
    k, d = x.shape[-2], x.shape[-1]
    lead = x.shape[:-2]
    if k == 1:
        return np.zeros(lead)
    if d == 1:
        return np.ptp(x[..., 0], axis=-1) / 2.0
    if k == 2:
        diff = x[..., 0, :] - x[..., 1, :]
        return np.sqrt(np.sum(diff * diff, axis=-1)) / 2.0
    pts = x.reshape(-1, k, d)
    best = np.full(pts.shape[0], np.inf)
    scale = 1.0 + np.max(np.abs(pts))
    for size in range(2, min(k, d + 1) + 1):
        for sub in combinations(range(k), size):
            sup = pts[:, list(sub), :]
            edges = sup[:, 1:, :] - sup[:, :1, :]
            gram = 2.0 * edges @ np.swapaxes(edges, 1, 2)
            rhs = np.sum(edges * edges, axis=-1)
            det = np.linalg.det(gram)
            ok = np.abs(det) > 1e-14 * scale ** (2 * (size - 1))
            safe = np.where(ok[:, None, None], gram, np.eye(size - 1))
            coef = np.linalg.solve(safe, rhs[..., None])[..., 0]
            centre = sup[:, 0, :] + np.einsum("ms,msd->md", coef, edges)
            rad = np.sqrt(np.sum((centre - sup[:, 0, :]) ** 2, axis=-1))
            reach = np.sqrt(np.sum((pts - centre[:, None, :]) ** 2, axis=-1)).max(axis=-1)
            ok &= reach <= rad * (1 + 1e-12) + 1e-15
            best = np.where(ok, np.minimum(best, rad), best)
    return best.reshape(lead)


def fits_in_ball(x: np.ndarray, r: float) -> np.ndarray:
    """Whether the points of each tuple lie in some closed ball of radius ``r``."""
    if x.shape[-1] == 1:
        return np.ptp(x[..., 0], axis=-1) <= 2.0 * r
    return enclosing_radius(x) <= r * (1 + 1e-12)


# --- constructors ---------------------------------------------------------


def zero_potential(space: MetricMeasureSpace, max_arity: int = DEFAULT_MAX_ARITY) -> Potential:
    return Potential(space, {}, 0.0, max_arity=max_arity, name="zero")


def _ball_kernel(k: int, r: float, value: float) -> Kernel:
    if k < 2:
        raise DomainError("k must be at least 2")
    if r <= 0:
        raise DomainError("r must be positive")

    def kernel(x: np.ndarray) -> np.ndarray:
        return np.where(fits_in_ball(x, r), value, 0.0)

    return kernel


def hard_sphere_k(space: MetricMeasureSpace, k: int, r: float, max_arity: int = DEFAULT_MAX_ARITY) -> Potential:
    """Pure k-body hard spheres: infinite energy whenever k points fit in a radius-``r`` ball."""
    if not isinstance(space, EuclideanBox):
        raise DomainError("hard spheres are defined on Euclidean boxes")
    return Potential(space, {k: _ball_kernel(k, r, np.inf)}, 2.0 * r, max_arity=max_arity, name=f"hard_sphere_{k}")


def soft_sphere_k(
    space: MetricMeasureSpace, k: int, r: float, alpha: float, max_arity: int = DEFAULT_MAX_ARITY
) -> Potential:
    """Pure k-body soft spheres: energy ``alpha`` whenever k points fit in a radius-``r`` ball."""
    if not isinstance(space, EuclideanBox):
        raise DomainError("soft spheres are defined on Euclidean boxes")
    if not 0 < alpha < np.inf:
        raise DomainError("alpha must lie in (0, inf)")
    return Potential(space, {k: _ball_kernel(k, r, alpha)}, 2.0 * r, max_arity=max_arity, name=f"soft_sphere_{k}")


def hat_potential(potential: Potential, N: int, R: float) -> Potential:
    """Keep the (decorated) kernels up to arity ``N``; above it, a hard wall on tuples of diameter ``<= R``."""
    if N < 1:
        raise DomainError("N must be at least 1")
    space = potential.space

    def low(x: np.ndarray) -> np.ndarray:
        return potential.evaluate(x)

    def wall(x: np.ndarray) -> np.ndarray:
        return np.where(space.diameter(x) <= R, np.inf, 0.0)

    kernels = {m: low for m in potential.active_arities(N)}
    return Potential(
        space, kernels, max(R, potential.range), tail=(N + 1, wall), max_arity=potential.max_arity, name="hat"
    )
