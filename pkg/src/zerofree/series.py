"""Truncated grand-canonical partition functions and modified point densities."""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from .errors import DomainError, ZeroFreenessError
from .potential import Potential
from .space import MetricMeasureSpace, QuadratureSpec, Region, as_points, iter_quadrature

DEFAULT_TAIL = 1e-8
DEFAULT_DELTA_FLOOR = 1e-6


def exp_tail(x: float, K: int) -> float:
    """``sum_{k > K} x^k / k!`` for ``x >= 0``, via the regularised incomplete gamma function."""
    if x < 0:
        raise DomainError("x must be nonnegative")
    if x == 0:
        return 0.0
    return float(math.exp(x) * gammainc(K + 1, x))


def default_truncation(x: float, tol: float = DEFAULT_TAIL) -> int:
    """Smallest ``K`` with ``exp_tail(x, K) <= tol``."""
    K = 0
    while exp_tail(x, K) > tol:
        K += 1
    return K


def _ordered_map(fn, items, threads: int):
    """Map ``fn`` over ``items`` keeping input order and at most ``2 * threads`` tasks in flight."""
    if threads <= 1:
        for item in items:
            yield fn(item)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        pending = deque()
        for item in items:
            pending.append(pool.submit(fn, item))
            if len(pending) >= 2 * threads:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()


def configuration_integrals(
    region: Region, potential: Potential, K: int, quad: QuadratureSpec, threads: int = 1
) -> np.ndarray:
    """Quadrature values of ``int_{region^k} exp(-H)`` for ``k = 0..K``.

    The last axis of the result indexes ``k``. If the potential carries batched
    decorations whose leading shape ends in a singleton axis, that axis is the
    one summed over the nodes and the remaining leading axes are kept.

    Interaction-free potentials give exactly ``volume**k``; potentials with only
    one-body terms factorise, so ``I_k = I_1**k``.
    """
    if K < 0:
        raise DomainError("K must be nonnegative")
    active = potential.active_arities(max(K, 1))
    vol = region.volume

    def order(k: int) -> np.ndarray:
        def work(chunk):
            pts, w = chunk
            return np.sum(w * np.exp(-potential.energy(pts)), axis=-1)

        acc = 0.0
        for part in _ordered_map(work, iter_quadrature(region, quad, k), threads):
            acc = acc + part
        return np.asarray(acc)

    if K == 0:
        return np.ones(1)
    if not active:
        return np.array([vol**k for k in range(K + 1)])
    first = order(1)
    if active == [1]:
        return np.stack([first**k for k in range(K + 1)], axis=-1)
    values = [np.ones_like(first), first] + [order(k) for k in range(2, K + 1)]
    values = np.broadcast_arrays(*values)
    return np.stack(values, axis=-1)


def evaluate_series(integrals: np.ndarray, lam) -> np.ndarray:
    """``sum_k lam^k / k! * I_k`` for each activity in ``lam`` (broadcast against the batch axes)."""
    lam = np.asarray(lam, dtype=complex)
    K = integrals.shape[-1] - 1
    coeffs = integrals / np.array([math.factorial(k) for k in range(K + 1)], dtype=float)
    out = np.zeros(np.broadcast_shapes(lam.shape, integrals.shape[:-1]), dtype=complex)
    for k in range(K, -1, -1):
        out = out * lam + coeffs[..., k]
    return out


@dataclass(frozen=True)
class SeriesResult:
    """A truncated partition function value with its analytic truncation bound.

    ``tail_bound`` bounds the neglected orders ``k > K``; ``quad_error`` is an
    empirical (non-rigorous) estimate from a coarser rule, present only when requested.
    """

    value: complex
    tail_bound: float
    truncation_order: int
    quadrature: QuadratureSpec
    activity: complex
    volume: float
    integrals: np.ndarray
    quad_error: float | None = None

    @property
    def lower_modulus(self) -> float:
        return abs(self.value) - self.tail_bound


def resolve_truncation(potential: Potential, lam_abs: float, volume: float, K: int | None) -> int:
    if K is not None:
        if K < 0:
            raise DomainError("K must be nonnegative")
        return K
    K = default_truncation(lam_abs * volume)
    if potential.active_arities(K) not in ([], [1]):
        K = min(K, potential.max_arity)
    return K


def _check_region(space: MetricMeasureSpace, region: Region, potential: Potential):
    if region.space is not space or potential.space is not space:
        raise DomainError("region and potential must belong to the given space")


def partition_function(
    space: MetricMeasureSpace,
    region: Region,
    potential: Potential,
    lam,
    K: int | None = None,
    quad: QuadratureSpec | None = None,
    estimate_error: bool = False,
    threads: int = 1,
) -> SeriesResult:
    """Truncated partition function ``sum_{k<=K} lam^k/k! int exp(-H)`` on ``region``."""
    _check_region(space, region, potential)
    quad = quad or QuadratureSpec()
    lam = complex(lam)
    vol = region.volume
    K = resolve_truncation(potential, abs(lam), vol, K)
    integrals = configuration_integrals(region, potential, K, quad, threads)
    value = complex(evaluate_series(integrals, lam))
    quad_error = None
    if estimate_error:
        coarse = quad.with_resolution(max(1, quad.resolution // 2))
        other = complex(evaluate_series(configuration_integrals(region, potential, K, coarse, threads), lam))
        quad_error = abs(value - other)
    return SeriesResult(value, exp_tail(abs(lam) * vol, K), K, quad, lam, vol, integrals, quad_error)


@dataclass(frozen=True)
class Ratio:
    """A ratio of two truncated series with a propagated truncation bound."""

    value: complex
    bound: float
    denominator: complex


def _guarded_ratio(num: complex, den: complex, tail: float, delta_floor: float) -> Ratio:
    lower = abs(den) - tail
    if lower <= delta_floor:
        raise ZeroFreenessError(
            f"|Z| - tail = {lower:.3e} is not above the floor {delta_floor:.1e}", abs(den), tail, delta_floor
        )
    value = num / den
    return Ratio(value, (tail + abs(value) * tail) / lower, den)


def density_ratio(
    region: Region,
    potential: Potential,
    lam: complex,
    points: np.ndarray,
    K: int,
    quad: QuadratureSpec,
    delta_floor: float = DEFAULT_DELTA_FLOOR,
    threads: int = 1,
) -> Ratio:
    """``lam^k Z(lam | x) / Z(lam)`` with the truncation error of both series propagated."""
    k = points.shape[-2]
    vol = region.volume
    tail = exp_tail(abs(lam) * vol, K)
    den = complex(evaluate_series(configuration_integrals(region, potential, K, quad, threads), lam))
    num = complex(evaluate_series(configuration_integrals(region, potential.pin(points), K, quad, threads), lam))
    r = _guarded_ratio(num, den, tail, delta_floor)
    scale = lam**k
    return Ratio(scale * r.value, abs(scale) * r.bound, den)


def _prepare(space, region, potential, lam, x, K):
    _check_region(space, region, potential)
    pts = as_points(x, space.dimension)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[0] == 0:
        raise DomainError("tuple must be nonempty")
    space._check(pts)
    lam = complex(lam)
    return pts, lam, resolve_truncation(potential, abs(lam), region.volume, K)


def modified_density(
    space: MetricMeasureSpace,
    region: Region,
    potential: Potential,
    lam,
    x,
    K: int | None = None,
    quad: QuadratureSpec | None = None,
    delta_floor: float = DEFAULT_DELTA_FLOOR,
    threads: int = 1,
) -> complex:
    """Modified k-point density ``lam^k Z(lam | x) / Z(lam)``.

    Raises :class:`ZeroFreenessError` when ``|Z| - tail`` is not above ``delta_floor``.
    """
    pts, lam, K = _prepare(space, region, potential, lam, x, K)
    return density_ratio(region, potential, lam, pts, K, quad or QuadratureSpec(), delta_floor, threads).value


def telescoped_density(
    space: MetricMeasureSpace,
    region: Region,
    potential: Potential,
    lam,
    x,
    K: int | None = None,
    quad: QuadratureSpec | None = None,
    delta_floor: float = DEFAULT_DELTA_FLOOR,
    threads: int = 1,
) -> complex:
    """Product of one-point densities, each under the potential pinned at the preceding points."""
    pts, lam, K = _prepare(space, region, potential, lam, x, K)
    quad = quad or QuadratureSpec()
    out = 1.0 + 0.0j
    current = potential
    for j in range(pts.shape[0]):
        out *= density_ratio(region, current, lam, pts[j : j + 1], K, quad, delta_floor, threads).value
        current = current.pin(pts[j])
    return out


def classical_density(
    space: MetricMeasureSpace,
    region: Region,
    potential: Potential,
    lam,
    x,
    K: int | None = None,
    quad: QuadratureSpec | None = None,
    delta_floor: float = DEFAULT_DELTA_FLOOR,
    threads: int = 1,
) -> complex:
    """``exp(-H(x)) * kappa(x)``; zero without further work when ``H(x)`` is infinite."""
    pts, lam, K = _prepare(space, region, potential, lam, x, K)
    boltzmann = math.exp(-float(potential.energy(pts)))
    if boltzmann == 0.0:
        return 0j
    return boltzmann * modified_density(space, region, potential, lam, pts, K, quad, delta_floor, threads)
