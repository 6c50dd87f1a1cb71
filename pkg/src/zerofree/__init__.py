"""Truncated partition functions, modified densities and zero-free disks for repulsive point processes."""

from types import ModuleType as _Module

from .errors import ConvergenceError, DomainError, ResourceError, ZeroFreenessError
from .hypergraph import (
    Hypergraph,
    Polynomial,
    ZeroReport,
    activity_zero_report,
    build_embedding,
    closed_form_Z,
    embedding_integrals,
    independence_polynomial,
    independent_set_counts,
    polynomial_roots,
    stirling2,
    stirling_sum_check,
)
from .identity import (
    IdentityReport,
    contraction_G,
    ftc_check,
    integral_identity_check,
    log_partition_check,
    order_product_check,
    partition_identity_check,
)
from .potential import (
    Potential,
    exclude,
    hard_sphere_k,
    hat_potential,
    partial_pin,
    pin,
    soft_sphere_k,
    zero_potential,
)
from .series import (
    SeriesResult,
    classical_density,
    default_truncation,
    exp_tail,
    modified_density,
    partition_function,
    telescoped_density,
)
from .space import EuclideanBox, HypergraphIntervals, OpenBall, QuadratureSpec, Region, quadrature_nodes

__all__ = [n for n, v in list(globals().items()) if not n.startswith("_") and not isinstance(v, _Module)]
