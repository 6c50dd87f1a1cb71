"""Uniform hypergraphs, independence polynomials and the interval-union embedding.

The embedding places one unit interval per vertex and a pure k-body hard-core
kernel on k points whose vertex set is an edge. Since the energy only depends on
which intervals the points occupy, the grand-canonical series of the embedding is
the independence polynomial evaluated at ``exp(lam) - 1``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, DomainError, ResourceError
from .potential import Potential
from .space import HypergraphIntervals, Region

ENUMERATION_CAP = 25
MAX_STIRLING = 64
MAX_ROOT_DEGREE = 64
BRANCH_WINDOW = 3


@dataclass(frozen=True)
class Hypergraph:
    """A k-uniform hypergraph on the vertices ``1..n_vertices``."""

    n_vertices: int
    edges: tuple
    k: int

    def __post_init__(self):
        if self.n_vertices < 1:
            raise DomainError("a hypergraph needs at least one vertex")
        if self.k < 2:
            raise DomainError("edges must have at least two vertices")
        seen = set()
        out = []
        for e in self.edges:
            edge = tuple(sorted(int(v) for v in e))
            if len(edge) != self.k or len(set(edge)) != self.k:
                raise DomainError(f"edge {e} does not have {self.k} distinct vertices")
            if edge[0] < 1 or edge[-1] > self.n_vertices:
                raise DomainError(f"edge {e} uses a vertex outside 1..{self.n_vertices}")
            if edge in seen:
                raise DomainError(f"duplicate edge {e}")
            seen.add(edge)
            out.append(edge)
        object.__setattr__(self, "edges", tuple(sorted(out)))

    @classmethod
    def parse(cls, text: str) -> "Hypergraph":
        """Parse the ``"N k"`` header followed by one edge per line (1-based labels)."""
        rows = [line.split("#", 1)[0].split() for line in text.splitlines()]
        rows = [r for r in rows if r]
        if not rows or len(rows[0]) != 2:
            raise DomainError("first line must be 'N k'")
        try:
            n, k = int(rows[0][0]), int(rows[0][1])
            edges = [tuple(int(v) for v in r) for r in rows[1:]]
        except ValueError as exc:
            raise DomainError(f"non-integer entry in hypergraph file: {exc}") from None
        return cls(n, tuple(edges), k)

    @classmethod
    def read(cls, path) -> "Hypergraph":
        return cls.parse(Path(path).read_text())

    def format(self) -> str:
        lines = [f"{self.n_vertices} {self.k}"] + [" ".join(map(str, e)) for e in self.edges]
        return "\n".join(lines) + "\n"

    def degree(self, v: int) -> int:
        return sum(v in e for e in self.edges)

    def max_degree(self) -> int:
        return max((self.degree(v) for v in range(1, self.n_vertices + 1)), default=0)

    def neighbours(self, v: int) -> set[int]:
        return {u for e in self.edges if v in e for u in e if u != v}

    def hop_matrix(self) -> np.ndarray:
        """Pairwise hop distances (0-based indices); ``-1`` marks unreachable pairs."""
        n = self.n_vertices
        adj = [sorted(self.neighbours(v)) for v in range(1, n + 1)]
        out = np.full((n, n), -1, dtype=np.int64)
        for s in range(n):
            out[s, s] = 0
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for w in adj[u]:
                    if out[s, w - 1] < 0:
                        out[s, w - 1] = out[s, u] + 1
                        queue.append(w - 1)
        return out

    def hop_distance(self, u: int, v: int) -> int:
        for w in (u, v):
            if not 1 <= w <= self.n_vertices:
                raise DomainError(f"vertex {w} outside 1..{self.n_vertices}")
        d = int(self.hop_matrix()[u - 1, v - 1])
        if d < 0:
            raise DomainError(f"vertices {u} and {v} are not connected")
        return d

    def is_connected(self) -> bool:
        return bool(np.all(self.hop_matrix()[0] >= 0))

    def is_independent(self, vertices) -> bool:
        chosen = set(vertices)
        return not any(chosen.issuperset(e) for e in self.edges)


# --- independent sets -------------------------------------------------------


def _poly_mul(a: list[int], b: list[int]) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _poly_add(a: list[int], b: list[int]) -> list[int]:
    if len(a) < len(b):
        a, b = b, a
    return [x + (b[i] if i < len(b) else 0) for i, x in enumerate(a)]


def _components(vertices: frozenset, edges: frozenset) -> list[tuple[frozenset, frozenset]]:
    parent = {v: v for v in vertices}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for e in edges:
        it = iter(e)
        root = find(next(it))
        for v in it:
            parent[find(v)] = root
    groups: dict = {}
    for v in vertices:
        groups.setdefault(find(v), set()).add(v)
    out = []
    for members in groups.values():
        m = frozenset(members)
        out.append((m, frozenset(e for e in edges if e <= m)))
    return out


def _minimal(edges) -> frozenset:
    """Drop edges that contain another edge; they can never be the first one violated."""
    ordered = sorted(set(edges), key=len)
    kept: list[frozenset] = []
    for e in ordered:
        if not any(f <= e for f in kept):
            kept.append(e)
    return frozenset(kept)


@lru_cache(maxsize=None)
def _count(vertices: frozenset, edges: frozenset) -> tuple[int, ...]:
    """Independent-set counts by size, for a hypergraph whose edges may have mixed sizes."""
    if not edges:
        return tuple(math.comb(len(vertices), j) for j in range(len(vertices) + 1))
    parts = _components(vertices, edges)
    if len(parts) > 1:
        out = [1]
        for verts, es in parts:
            out = _poly_mul(out, list(_count(verts, es)))
        return tuple(out)
    # branch on a vertex of maximum degree
    v = max(sorted(vertices), key=lambda u: sum(u in e for e in edges))
    # v left out: every edge through v can no longer be completed
    rest = vertices - {v}
    without = _count(rest, frozenset(e for e in edges if v not in e))
    # v chosen: edges through v shrink; a shrunk singleton forbids its vertex
    shrunk = [e - {v} if v in e else e for e in edges]
    banned = {next(iter(e)) for e in shrunk if len(e) == 1}
    verts = rest - banned
    kept = _minimal(e for e in shrunk if len(e) > 1 and not (e & banned))
    with_v = [0] + list(_count(verts, kept))
    return tuple(_poly_add(list(without), with_v))


def independent_set_counts(G: Hypergraph, cap: int = ENUMERATION_CAP) -> list[int]:
    """Number of independent sets of each size ``0, 1, ...`` (exact integers).

    Branch-and-prune over vertices: connected components are counted
    separately, and choosing a vertex removes it from its edges so that edges
    reduced to a single vertex exclude that vertex outright.
    """
    if G.n_vertices > cap:
        raise ResourceError(
            f"enumeration over {G.n_vertices} vertices exceeds the cap {cap}", required=G.n_vertices, limit=cap
        )
    counts = list(_count(frozenset(range(1, G.n_vertices + 1)), frozenset(frozenset(e) for e in G.edges)))
    while len(counts) > 1 and counts[-1] == 0:
        counts.pop()
    return counts


# --- polynomials ------------------------------------------------------------


@dataclass(frozen=True)
class Polynomial:
    """Dense polynomial ``sum_i coeffs[i] * z**i`` (lowest degree first)."""

    coeffs: tuple

    def __post_init__(self):
        c = list(self.coeffs)
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        if not c:
            raise DomainError("a polynomial needs at least one coefficient")
        object.__setattr__(self, "coeffs", tuple(c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for c in reversed(self.coeffs):
            out = out * z + complex(c)
        return complex(out) if out.ndim == 0 else out

    evaluate = __call__

    def roots(self) -> np.ndarray:
        return polynomial_roots(self)


def independence_polynomial(G: Hypergraph, cap: int = ENUMERATION_CAP) -> Polynomial:
    return Polynomial(tuple(independent_set_counts(G, cap)))


def _deflate_minus_one(coeffs: list) -> tuple[list, int]:
    """Divide out exact factors ``(1 + z)`` from integer coefficients."""
    mult = 0
    while len(coeffs) > 1 and all(isinstance(c, (int, np.integer)) for c in coeffs):
        # synthetic division, highest degree first
        high = coeffs[::-1]
        quot = [high[0]]
        for c in high[1:-1]:
            quot.append(c - quot[-1])
        if high[-1] - quot[-1] != 0:
            break
        coeffs = [int(c) for c in quot[::-1]]
        mult += 1
    return coeffs, mult


def polynomial_roots(p: Polynomial) -> np.ndarray:
    """All roots with multiplicity, from companion-matrix eigenvalues and one Newton step each.

    Exact ``(1 + z)`` factors of integer polynomials and roots at zero are split
    off before the eigenvalue solve. Raises :class:`ConvergenceError` when some
    root leaves ``|p(root)| > 1e-8 * max|coeff|``.
    """
    if p.degree < 1:
        raise DomainError("degree must be at least 1")
    if p.degree > MAX_ROOT_DEGREE:
        raise DomainError(f"degree {p.degree} exceeds {MAX_ROOT_DEGREE}")
    coeffs = list(p.coeffs)
    zeros = 0
    while coeffs[0] == 0:
        coeffs.pop(0)
        zeros += 1
    coeffs, minus_one = _deflate_minus_one(coeffs)
    c = np.array([complex(v) for v in coeffs])
    found = [np.zeros(zeros, dtype=complex), np.full(minus_one, -1.0 + 0j)]
    if len(c) > 1:
        eig = np.linalg.eigvals(np.polynomial.polynomial.polycompanion(c))
        deriv = Polynomial(tuple(c[1:] * np.arange(1, len(c))))
        reduced = Polynomial(tuple(c))
        value = reduced(eig)
        slope = deriv(eig)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(slope != 0, eig - value / slope, eig)
        better = np.isfinite(step) & (np.abs(reduced(step)) < np.abs(value))
        found.append(np.where(better, step, eig))
    roots = np.concatenate(found)
    scale = max(abs(complex(v)) for v in p.coeffs)
    residuals = np.abs(p(roots))
    if np.any(residuals > 1e-8 * scale):
        raise ConvergenceError(f"root residual {residuals.max():.3e} exceeds {1e-8 * scale:.3e}", residuals)
    return roots[np.lexsort((roots.imag, roots.real))]


# --- Stirling numbers -------------------------------------------------------


@lru_cache(maxsize=None)
def _stirling_row(m: int) -> tuple[int, ...]:
    if m == 0:
        return (1,)
    prev = _stirling_row(m - 1) + (0,)
    return tuple((l * prev[l] if l else 0) + (prev[l - 1] if l else 0) for l in range(m + 1))


def stirling2(m: int, l: int) -> int:
    """Stirling number of the second kind ``S(m, l)``; zero when ``l > m``."""
    if m < 0 or l < 0:
        raise DomainError("arguments must be nonnegative")
    if m > MAX_STIRLING:
        raise DomainError(f"m must not exceed {MAX_STIRLING}")
    return _stirling_row(m)[l] if l <= m else 0


def stirling_sum_check(x: float, l: int, M: int) -> float:
    """``|sum_{m <= M} x^m/m! S(m, l) - (e^x - 1)^l / l!|``."""
    if M > MAX_STIRLING:
        raise DomainError(f"M must not exceed {MAX_STIRLING}")
    terms = [float(Fraction(stirling2(m, l), math.factorial(m))) * x**m for m in range(l, M + 1)]
    return abs(math.fsum(terms) - math.expm1(x) ** l / math.factorial(l))


def embedding_integrals(counts, K: int) -> list[int]:
    """Exact ``int exp(-H)`` over the m-fold carrier, ``m = 0..K``: ``sum_l l! S(m, l) |I_l|``."""
    return [sum(math.factorial(l) * stirling2(m, l) * c for l, c in enumerate(counts)) for m in range(K + 1)]


def closed_form_Z(G: Hypergraph, lam) -> complex:
    """``1 + sum_l |I_l| (e^lam - 1)^l``."""
    counts = independent_set_counts(G)
    u = np.expm1(complex(lam))
    return complex(1 + sum(c * u**l for l, c in enumerate(counts) if l))


# --- embedding --------------------------------------------------------------


def _edge_kernel(G: Hypergraph):
    base = G.n_vertices + 1
    keys = np.array(sorted(sum(v * base**i for i, v in enumerate(e)) for e in G.edges), dtype=np.int64)

    def kernel(x: np.ndarray) -> np.ndarray:
        v = np.sort(HypergraphIntervals.vertex_of(x[..., 0]), axis=-1)
        distinct = np.all(np.diff(v, axis=-1) > 0, axis=-1)
        code = np.sum(v * base ** np.arange(v.shape[-1], dtype=np.int64), axis=-1)
        return np.where(distinct & np.isin(code, keys), np.inf, 0.0)

    return kernel


def build_embedding(G: Hypergraph, R: float, max_arity: int = 16) -> tuple[HypergraphIntervals, Potential, Region]:
    """Interval-union space, pure k-body edge potential of range ``R``, and the full carrier."""
    if not G.is_connected():
        raise DomainError("the embedding needs a connected hypergraph")
    space = HypergraphIntervals(G, float(R))
    kernels = {G.k: _edge_kernel(G)} if G.edges else {}
    potential = Potential(space, kernels, float(R), max_arity=max_arity, name=f"hypergraph_pure_{G.k}")
    return space, potential, space.carrier()


# --- zeros in the activity plane --------------------------------------------


@dataclass(frozen=True)
class ZeroReport:
    """Zeros of ``Z_G(e^lam - 1)`` against the disk ``|lam| < 1/(e (Delta + 1))``.

    ``ball_bound`` uses the supremal ball volume of the embedding, ``1 + max_v
    #neighbours(v)``, which equals ``Delta + 1`` for graphs and can exceed it for
    k >= 3; ``log_ratio`` is ``lambda_min_modulus / (log Delta / Delta)`` when
    ``Delta >= 2``. Neither enters ``passed``.
    """

    z_roots: np.ndarray
    lambda_min_modulus: float
    bound: float
    branches_considered: int
    max_degree: int
    ball_bound: float
    real_lambda_zeros: tuple = ()
    log_ratio: float | None = None
    coefficients: tuple = field(default=())

    @property
    def passed(self) -> bool:
        return self.lambda_min_modulus >= self.bound


def activity_zero_report(G: Hypergraph, branches: int = BRANCH_WINDOW) -> ZeroReport:
    """Locate the activity zeros ``lam = log(1 + z)`` over the branch window ``|m| <= branches``."""
    poly = independence_polynomial(G)
    roots = polynomial_roots(poly) if poly.degree >= 1 else np.zeros(0, dtype=complex)
    delta = G.max_degree()
    neighbours = max((len(G.neighbours(v)) for v in range(1, G.n_vertices + 1)), default=0)
    shifted = 1.0 + roots
    finite = shifted[np.abs(shifted) > 1e-12]
    best = math.inf
    real = []
    for w in finite:
        logs = math.log(abs(w)) + 1j * (np.angle(w) + 2 * np.pi * np.arange(-branches, branches + 1))
        best = min(best, float(np.min(np.abs(logs))))
        if abs(w.imag) <= 1e-12 * max(1.0, abs(w)) and w.real > 0:
            real.append(math.log(w.real))
    ratio = best / (math.log(delta) / delta) if delta >= 2 and math.isfinite(best) else None
    return ZeroReport(
        roots,
        best,
        1.0 / (math.e * (delta + 1)),
        branches,
        delta,
        1.0 / (math.e * (neighbours + 1)),
        tuple(sorted(real)),
        ratio,
        poly.coeffs,
    )
