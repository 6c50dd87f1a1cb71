"""Numerical checks of the recursive identities satisfied by modified densities.

Every check returns an :class:`IdentityReport` whose budget is the sum of the
analytic truncation bounds of all series involved plus an explicit allowance
``atol`` for quadrature error, which is never rigorously bounded.

The outer integrals share one discretisation: for each order ``k`` the integrand
``(1 - exp(-phi(y, w))) * exp(-H(w | y partially pinned below D(w)))`` is
evaluated on the k-fold rule, nodes where it vanishes are dropped, and the inner
partition functions are computed once per distinct threshold ``D(w)`` and once
per distinct unordered tuple ``w``.

Only the denominators actually evaluated are guarded against small modulus; no
claim is made about other members of the family of decorated potentials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ZeroFreenessError
from .potential import PartialPin, Pin, Potential, _join
from .series import (
    DEFAULT_DELTA_FLOOR,
    configuration_integrals,
    evaluate_series,
    exp_tail,
    resolve_truncation,
)
from .space import MetricMeasureSpace, OpenBall, QuadratureSpec, Region, as_points, quadrature_nodes

DEFAULT_ATOL = 5e-3
_BATCH = 64
_CHUNK = 2**14


@dataclass(frozen=True)
class IdentityReport:
    """Both sides of an identity, their distance and the budget it is judged against."""

    name: str
    lhs: complex
    rhs: complex
    residual: float
    tolerance_budget: float
    truncation: int
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.tolerance_budget)


def _report(name, lhs, rhs, budget, truncation, **details) -> IdentityReport:
    lhs, rhs = complex(lhs), complex(rhs)
    return IdentityReport(name, lhs, rhs, abs(lhs - rhs), float(budget), int(truncation), details)


def _single_point(space: MetricMeasureSpace, y) -> np.ndarray:
    pt = as_points(y, space.dimension).reshape(-1, space.dimension)
    if pt.shape[0] != 1:
        raise DomainError("expected a single point")
    space._check(pt)
    return pt[0]


def _series_batch(region, potentials, lam, K, quad, threads, size):
    """Series values for a batched potential, broadcast to ``size`` entries."""
    ints = configuration_integrals(region, potentials, K, quad, threads)
    vals = evaluate_series(ints, lam)
    return np.broadcast_to(vals, (size,)).astype(complex)


def _batched(values: np.ndarray):
    for start in range(0, len(values), _BATCH):
        yield slice(start, min(start + _BATCH, len(values)))


def _inner_quad(quad: QuadratureSpec) -> QuadratureSpec:
    return QuadratureSpec(quad.scheme, quad.resolution, quad.seed, quad.max_nodes, _CHUNK)


def _vanishing_beyond(potential: Potential, k: int) -> bool:
    """Whether ``phi(y, w)`` is identically zero for every tuple ``w`` of size ``> k``."""
    if potential.tail is not None:
        return False
    # each pinned point lowers the arity at which a kernel can act by one
    top = max(potential.kernels, default=0)
    for dec in potential.decorations:
        if isinstance(dec, Pin):
            top += dec.points.shape[-2]
        elif isinstance(dec, PartialPin):
            top += 1
    return all(not potential._active(len(potential.decorations), m + 1) for m in range(k + 1, top))


@dataclass
class _OuterOrder:
    """Order-``k`` outer nodes with a nonzero weight factor, plus their inner series."""

    k: int
    nodes: np.ndarray
    weights: np.ndarray
    factor: np.ndarray
    thresholds: np.ndarray
    pinned: np.ndarray | None = None
    base: np.ndarray | None = None


def _outer_order(space, region, potential, y, k, quad) -> _OuterOrder | None:
    if not potential._active(len(potential.decorations), k + 1):
        return None
    w, wt = quadrature_nodes(region, quad, k)
    hit = 1.0 - np.exp(-potential.evaluate(_join(w, y[None, :])))
    keep = hit > 0
    w, wt, hit = w[keep], wt[keep], hit[keep]
    t = space.ordering(w)
    boltz = np.exp(-potential.partial_pin(y, t).energy(w))
    keep = boltz > 0
    return _OuterOrder(k, w[keep], wt[keep], (hit * boltz)[keep], t[keep])


def _canonical(w: np.ndarray) -> np.ndarray:
    if w.shape[-1] == 1:
        return np.sort(w, axis=-2)
    return w


def _attach_inner(order: _OuterOrder, region, potential, y, lam, K, quad, threads, want_base=True):
    """Fill ``Z(lam | y before w ; w)`` and, optionally, ``Z(lam | y before w)`` per node."""
    quad = _inner_quad(quad)
    n = len(order.factor)
    if n == 0:
        order.pinned = np.zeros(0, dtype=complex)
        order.base = np.zeros(0, dtype=complex)
        return order
    canon = _canonical(order.nodes)
    flat = canon.reshape(n, -1)
    keys, inverse = np.unique(flat, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    first = np.zeros(len(keys), dtype=np.int64)
    first[inverse[::-1]] = np.arange(n)[::-1]
    key_w = canon[first]
    key_t = order.thresholds[first]
    pinned = np.empty(len(keys), dtype=complex)
    for sl in _batched(key_t):
        pot = potential.partial_pin(y, key_t[sl, None]).pin(key_w[sl, None, :, :])
        pinned[sl] = _series_batch(region, pot, lam, K, quad, threads, sl.stop - sl.start)
    order.pinned = pinned[inverse]
    if want_base:
        tvals, tinv = np.unique(order.thresholds, return_inverse=True)
        base = np.empty(len(tvals), dtype=complex)
        for sl in _batched(tvals):
            pot = potential.partial_pin(y, tvals[sl, None])
            base[sl] = _series_batch(region, pot, lam, K, quad, threads, sl.stop - sl.start)
        order.base = base[tinv.reshape(-1)]
    return order


def _guard(values: np.ndarray, tail: float, delta_floor: float) -> float:
    """Smallest ``|Z| - tail`` among ``values``; raises when it is not above the floor."""
    if values.size == 0:
        return math.inf
    lower = float(np.min(np.abs(values))) - tail
    if lower <= delta_floor:
        worst = float(np.min(np.abs(values)))
        raise ZeroFreenessError(
            f"|Z| - tail = {lower:.3e} is not above the floor {delta_floor:.1e}", worst, tail, delta_floor
        )
    return lower


def _setup(space, region, potential, lam, y, K, quad):
    if region.space is not space or potential.space is not space:
        raise DomainError("region and potential must belong to the given space")
    lam = complex(lam)
    quad = quad or QuadratureSpec()
    K = resolve_truncation(potential, abs(lam), region.volume, K)
    pt = None if y is None else _single_point(space, y)
    return lam, quad, K, pt


def integral_identity_check(
    space: MetricMeasureSpace,
    region: Region,
    potential: Potential,
    lam,
    y,
    K_id: int,
    quad: QuadratureSpec | None = None,
    K: int | None = None,
    atol: float = DEFAULT_ATOL,
    delta_floor: float = DEFAULT_DELTA_FLOOR,
    threads: int = 1,
) -> IdentityReport:
    """Compare ``kappa(y)`` with ``lam * exp(-S)``, where ``S`` is the recursive integral.

    ``S = sum_{k <= K_id} 1/k! int (1 - e^{-phi(y, w)}) e^{-H(w | y<w)} kappa(w | y<w) dw``;
    ``kappa(w | y<w)`` is the k-point density of the potential partially pinned at
    ``y`` below ``D(w)`` and is evaluated as a direct ratio of truncated series.
    ``K`` truncates every inner partition function.
    """
    if K_id < 1:
        raise DomainError("K_id must be at least 1")
    lam, quad, K, y = _setup(space, region, potential, lam, y, K, quad)
    vol = region.volume
    tail = exp_tail(abs(lam) * vol, K)
    growth = math.exp(abs(lam) * vol)

    z_full = complex(evaluate_series(configuration_integrals(region, potential, K, quad, threads), lam))
    z_pin = complex(evaluate_series(configuration_integrals(region, potential.pin(y), K, quad, threads), lam))
    lower = _guard(np.array([z_full]), tail, delta_floor)
    lhs = lam * z_pin / z_full
    lhs_err = abs(lam) * (tail + abs(z_pin / z_full) * tail) / lower

    exponent = 0j
    exponent_err = 0.0
    lowest = lower
    for k in range(1, K_id + 1):
        order = _outer_order(space, region, potential, y, k, quad)
        if order is None or len(order.factor) == 0:
            continue
        _attach_inner(order, region, potential, y, lam, K, quad, threads)
        low = _guard(order.base, tail, delta_floor)
        lowest = min(lowest, low)
        ratio = order.pinned / order.base
        density = lam**k * ratio
        mass = order.weights * order.factor
        exponent += np.sum(mass * density) / math.factorial(k)
        err = abs(lam) ** k * (tail + np.abs(ratio) * tail) / (np.abs(order.base) - tail)
        exponent_err += float(np.sum(mass * err)) / math.factorial(k)
    if not _vanishing_beyond(potential, K_id):
        # |kappa(w)| <= |lam|^k e^{|lam| vol} / (|Z| - tail) bounds the dropped orders
        exponent_err += exp_tail(abs(lam) * vol, K_id) * growth / lowest
    rhs = lam * np.exp(-exponent)
    rhs_err = abs(rhs) * math.expm1(exponent_err)
    budget = lhs_err + rhs_err + atol
    return _report("integral_identity", lhs, rhs, budget, K_id, exponent=complex(exponent), inner_K=K)


def partition_identity_check(
    space: MetricMeasureSpace,
    region: Region,
    potential: Potential,
    lam,
    y,
    t: float,
    K_id: int,
    quad: QuadratureSpec | None = None,
    K: int | None = None,
    atol: float = DEFAULT_ATOL,
    threads: int = 1,
) -> IdentityReport:
    """Compare ``Z(lam | y<t)`` with ``Z(lam)`` minus the ordered correction integral.

    The correction is ``sum_{k <= K_id} lam^k/k! int 1{D(w) < t} (1 - e^{-phi(y, w)})
    e^{-H(w | y<w)} Z(lam | y<w; w) dw``; ``t`` may be ``inf``.
    """
    if K_id < 1:
        raise DomainError("K_id must be at least 1")
    if not t >= 0:
        raise DomainError("t must lie in [0, inf]")
    lam, quad, K, y = _setup(space, region, potential, lam, y, K, quad)
    vol = region.volume
    tail = exp_tail(abs(lam) * vol, K)
    growth = math.exp(abs(lam) * vol)

    lhs = complex(evaluate_series(configuration_integrals(region, potential.partial_pin(y, t), K, quad, threads), lam))
    z_full = complex(evaluate_series(configuration_integrals(region, potential, K, quad, threads), lam))
    correction = 0j
    for k in range(1, K_id + 1):
        order = _outer_order(space, region, potential, y, k, quad)
        if order is None:
            continue
        keep = order.thresholds < t
        order = _OuterOrder(k, order.nodes[keep], order.weights[keep], order.factor[keep], order.thresholds[keep])
        if len(order.factor) == 0:
            continue
        _attach_inner(order, region, potential, y, lam, K, quad, threads, want_base=False)
        correction += lam**k / math.factorial(k) * np.sum(order.weights * order.factor * order.pinned)
    rhs = z_full - correction
    # each inner series is off by at most `tail`; the outer weights sum to at most e^{|lam| vol} - 1
    budget = 2 * tail + tail * (growth - 1.0) + atol
    if not _vanishing_beyond(potential, K_id):
        budget += exp_tail(abs(lam) * vol, K_id) * growth
    return _report("partition_identity", lhs, rhs, budget, K_id, t=float(t), inner_K=K)


def log_partition_check(
    space: MetricMeasureSpace,
    region: Region,
    potential: Potential,
    lam,
    quad: QuadratureSpec | None = None,
    K: int | None = None,
    base=None,
    atol: float = 1e-3,
    delta_floor: float = DEFAULT_DELTA_FLOOR,
    threads: int = 1,
) -> IdentityReport:
    """Compare ``exp(int e^{-phi_1(x)} kappa_x(x) dx)`` with ``Z(lam)``.

    ``kappa_x`` is the one-point density of the potential whose one-body term is
    infinite on the open ball around ``base`` of radius ``d(base, x)``. The check
    is made on the scale of ``Z`` so no branch of the complex logarithm is chosen.
    """
    lam, quad, K, _ = _setup(space, region, potential, lam, None, K, quad)
    centre = space.ordering_base if base is None else _single_point(space, base)
    vol = region.volume
    tail = exp_tail(abs(lam) * vol, K)
    z_full = complex(evaluate_series(configuration_integrals(region, potential, K, quad, threads), lam))

    x, wt = quadrature_nodes(region, quad, 1)
    boltz = np.exp(-potential.evaluate(x))
    keep = boltz > 0
    x, wt, boltz = x[keep], wt[keep], boltz[keep]
    radius = space._dist(centre, x[:, 0, :])
    inner = _inner_quad(quad)
    num = np.empty(len(x), dtype=complex)
    den = np.empty(len(x), dtype=complex)
    for sl in _batched(radius):
        size = sl.stop - sl.start
        cut = potential.exclude(OpenBall(space, centre, radius[sl, None]))
        den[sl] = _series_batch(region, cut, lam, K, inner, threads, size)
        num[sl] = _series_batch(region, cut.pin(x[sl, None, :, :]), lam, K, inner, threads, size)
    lower = _guard(den, tail, delta_floor) if len(den) else math.inf
    density = lam * num / den
    integral = np.sum(wt * boltz * density)
    err = float(np.sum(wt * boltz * abs(lam) * (tail + np.abs(num / den) * tail) / (np.abs(den) - tail)))
    lhs = np.exp(integral)
    budget = tail + abs(lhs) * math.expm1(err) + atol
    if not math.isfinite(lower):
        budget = tail + atol
    return _report("log_partition", lhs, z_full, budget, K, log_integral=complex(integral))


def contraction_G(
    potential: Potential,
    region: Region,
    y,
    N: int,
    z,
    quad: QuadratureSpec | None = None,
) -> float | np.ndarray:
    """``G_N(z) = sum_{k <= N} z^k/k! int (1 - e^{-phi(y, x)}) e^{-H(x | y<x)} dx`` for real ``z >= 0``."""
    if N < 1:
        raise DomainError("N must be at least 1")
    if N > potential.max_arity:
        raise DomainError(f"N={N} exceeds the arity cap {potential.max_arity}")
    space = region.space
    if potential.space is not space:
        raise DomainError("region and potential must belong to the same space")
    zs = np.asarray(z, dtype=float)
    if np.any(zs < 0):
        raise DomainError("z must be nonnegative")
    pt = _single_point(space, y)
    quad = quad or QuadratureSpec()
    out = np.zeros(zs.shape)
    for k in range(1, N + 1):
        order = _outer_order(space, region, potential, pt, k, quad)
        if order is None:
            continue
        mass = math.fsum(order.weights * order.factor)
        out = out + zs**k / math.factorial(k) * mass
    return float(out) if out.ndim == 0 else out


def ftc_check(path_samples, derivative_samples, atol: float = 1e-6) -> IdentityReport:
    """Compare ``f(t)/f(0)`` with ``exp`` of the trapezoidal integral of ``f'/f``.

    ``path_samples`` is a sequence of ``(s, f(s))``; ``derivative_samples`` holds
    ``f'(s)`` on the same grid, either as values or as ``(s, f'(s))`` pairs.
    """
    path = list(path_samples)
    if len(path) < 2:
        raise DomainError("need at least two samples")
    s = np.array([p[0] for p in path], dtype=float)
    f = np.array([p[1] for p in path], dtype=complex)
    ds = list(derivative_samples)
    if len(ds) != len(path):
        raise DomainError("derivative samples must match the path grid")
    df = np.array([d[1] if isinstance(d, (tuple, list)) else d for d in ds], dtype=complex)
    if np.any(np.diff(s) <= 0):
        raise DomainError("sample points must be strictly increasing")
    if np.any(np.abs(f) == 0):
        raise DomainError("path touches zero")
    integral = np.trapezoid(df / f, s)
    return _report("ftc", np.exp(integral), f[-1] / f[0], atol, len(s), integral=complex(integral))


def order_product_check(values, order, atol: float = 1e-12) -> IdentityReport:
    """Expand ``prod_a (1 + x_a)`` by the largest element: ``1 + sum_b x_b prod_{a before b} (1 + x_a)``.

    ``order`` ranks the elements; ties are not allowed.
    """
    x = np.asarray(values, dtype=float)
    rank = np.asarray(order)
    if x.shape != rank.shape or x.ndim != 1:
        raise DomainError("values and order must be one-dimensional of equal length")
    if len(np.unique(rank)) != len(rank):
        raise DomainError("order must be strict")
    lhs = math.prod(1.0 + x)
    sorted_x = x[np.argsort(rank, kind="stable")]
    prefix = np.concatenate([[1.0], np.cumprod(1.0 + sorted_x)[:-1]])
    rhs = 1.0 + math.fsum(sorted_x * prefix)
    scale = max(1.0, abs(lhs))
    return _report("order_product", lhs, rhs, atol * scale, len(x))
