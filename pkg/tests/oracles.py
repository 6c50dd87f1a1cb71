"""Reference computations that share no code with the package."""

import itertools
import math
from fractions import Fraction

import numpy as np


def tonks_integral(k, length, exclusion):
    """Volume of k points in [0, length] with all gaps above ``exclusion``: (L - (k-1) a)_+^k."""
    if k == 0:
        return 1.0
    return max(length - (k - 1) * exclusion, 0.0) ** k


def tonks_Z(lam, K, length=1.0, exclusion=0.5):
    return sum(lam**k / math.factorial(k) * tonks_integral(k, length, exclusion) for k in range(K + 1))


def midpoint_pair_count(n, exclusion):
    """Fraction of midpoint pairs on [0, 1] farther apart than ``exclusion``, in exact integers."""
    # |i - j| / n > exclusion  <=>  |i - j| > exclusion * n
    bound = Fraction(exclusion).limit_denominator(10**6) * n
    hits = sum(1 for i in range(n) for j in range(n) if abs(i - j) > bound)
    return Fraction(hits, n * n)


def brute_independent_counts(n, edges):
    counts = [0] * (n + 1)
    sets = [set(e) for e in edges]
    for mask in range(1 << n):
        chosen = {v + 1 for v in range(n) if mask >> v & 1}
        if not any(e <= chosen for e in sets):
            counts[len(chosen)] += 1
    while len(counts) > 1 and counts[-1] == 0:
        counts.pop()
    return counts


def stirling_explicit(m, l):
    """Inclusion-exclusion formula for S(m, l)."""
    total = sum((-1) ** j * math.comb(l, j) * (l - j) ** m for j in range(l + 1))
    return total // math.factorial(l)


def interval_cover_grid(points, r, grid=4001):
    """Whether some centre on a fine grid covers all points with a closed radius-r interval."""
    lo, hi = min(points) - r, max(points) + r
    centres = np.linspace(lo, hi, grid)
    return bool(np.any(np.all(np.abs(np.asarray(points)[None, :] - centres[:, None]) <= r + 1e-12, axis=1)))


def hop_oracle(n, edges, u, v):
    """Floyd-Warshall over edge co-membership."""
    inf = float("inf")
    d = [[0 if i == j else inf for j in range(n)] for i in range(n)]
    for e in edges:
        for a, b in itertools.permutations(e, 2):
            d[a - 1][b - 1] = 1
    for k in range(n):
        for i in range(n):
            for j in range(n):
                d[i][j] = min(d[i][j], d[i][k] + d[k][j])
    return d[u - 1][v - 1]
