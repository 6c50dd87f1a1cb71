"""Command-line front end: activity scans, identity checks, contraction and hypergraph reports.

Exit codes: 0 when every check passes, 1 when some check fails, 2 on any
configuration, input/output or resource problem.
"""

from __future__ import annotations

import argparse
import cmath
import csv
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import DomainError, ResourceError, ZeroFreenessError
from .hypergraph import Hypergraph, activity_zero_report, build_embedding, closed_form_Z
from .identity import contraction_G, integral_identity_check, log_partition_check, partition_identity_check
from .potential import Potential, hard_sphere_k, soft_sphere_k, zero_potential
from .series import configuration_integrals, evaluate_series, exp_tail, resolve_truncation
from .space import EuclideanBox, HypergraphIntervals, QuadratureSpec, Region, rule_size

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2
CROSSCHECK_MAX_VERTICES = 4


class ConfigError(ValueError):
    """The run configuration is malformed or inconsistent."""


@dataclass(frozen=True)
class Tolerances:
    zscan: float = 1e-3
    identity: float = 5e-3
    log_partition: float = 1e-3
    contraction: float = 1e-6
    hypergraph: float = 1e-2


@dataclass(frozen=True)
class RunConfig:
    """Everything a subcommand needs, validated at load time."""

    space: object
    region: Region
    potential: Potential
    fraction: float = 0.5
    radial: int = 8
    angular: int = 8
    K: int | None = None
    K_id: int = 2
    delta_floor: float = 1e-6
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    tolerances: Tolerances = field(default_factory=Tolerances)
    probes: tuple = ()
    identity_lambda: complex = 0.2
    identity_K: int | None = None
    t_values: tuple = (0.0, 0.5, math.inf)
    contraction_y: object = None
    contraction_N: int = 3
    z_points: int = 50
    hypergraph_lambdas: tuple = (0.1, 0.1 + 0.1j)
    graph: Hypergraph | None = None
    output_dir: Path = Path("out")

    @property
    def ball_volume(self) -> float:
        r = self.potential.range
        return self.space.ball_volume(r) if r > 0 else 0.0

    @property
    def disk_radius(self) -> float:
        b = self.ball_volume
        return math.inf if b == 0 else 1.0 / (math.e * b)


# --- config parsing ----------------------------------------------------------


def _table(doc: dict, name: str) -> dict:
    value = doc.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    return value


def _number(table: dict, key: str, default=None, kind=float, name="") -> float:
    if key not in table:
        if default is None:
            raise ConfigError(f"missing {name}.{key}")
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}.{key} must be a number")
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"{name}.{key} must be an integer")
        return int(value)
    return float(value)


def _complex(value, name: str) -> complex:
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be a number or [re, im]")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        return complex(value[0], value[1])
    raise ConfigError(f"{name} must be a number or [re, im]")


def _extended(value, name: str) -> float:
    if isinstance(value, str) and value.lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number or 'inf'")
    return float(value)


def _vector(table: dict, key: str, name: str, default=None) -> tuple[float, ...]:
    value = table.get(key, default)
    if value is None:
        raise ConfigError(f"missing {name}.{key}")
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list) or not value or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ConfigError(f"{name}.{key} must be a number or a list of numbers")
    return tuple(float(v) for v in value)


def _positive(value: float, name: str) -> float:
    if not value > 0 or not math.isfinite(value):
        raise ConfigError(f"{name} must be positive and finite")
    return value


def _build_space(doc: dict, root: Path):
    table = _table(doc, "space")
    kind = table.get("kind", "euclidean_box")
    if kind == "euclidean_box":
        lower = _vector(table, "lower", "space")
        upper = _vector(table, "upper", "space")
        base = _vector(table, "ordering_base", "space") if "ordering_base" in table else None
        return EuclideanBox(lower, upper, base), None
    if kind == "hypergraph_intervals":
        if "graph" not in table or not isinstance(table["graph"], str):
            raise ConfigError("space.graph must name a hypergraph file")
        graph = Hypergraph.read(root / table["graph"])
        R = _positive(_number(table, "R", name="space"), "space.R")
        base = _number(table, "ordering_base", 2.0, name="space") if "ordering_base" in table else None
        return HypergraphIntervals(graph, R, base), graph
    raise ConfigError(f"unknown space kind {kind!r}")


def _build_region(doc: dict, space) -> Region:
    table = _table(doc, "region")
    if isinstance(space, HypergraphIntervals):
        labels = table.get("vertices", list(range(1, space.graph.n_vertices + 1)))
        if not isinstance(labels, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in labels):
            raise ConfigError("region.vertices must be a list of vertex labels")
        return space.vertices(labels)
    if not table:
        return space.carrier()
    return space.box(_vector(table, "lower", "region"), _vector(table, "upper", "region"))


def _build_potential(doc: dict, space, graph) -> Potential:
    table = _table(doc, "potential")
    kind = table.get("kind", "zero")
    max_arity = _number(table, "max_arity", 8, int, "potential")
    if kind == "zero":
        pot = zero_potential(space, max_arity)
        rng = _number(table, "range", 0.0, name="potential")
        if rng < 0:
            raise ConfigError("potential.range must be nonnegative")
        return replace(pot, range=rng)
    if kind in ("hard_sphere", "soft_sphere"):
        if not isinstance(space, EuclideanBox):
            raise ConfigError(f"{kind} needs a euclidean_box space")
        k = _number(table, "k", kind=int, name="potential")
        r = _number(table, "r", name="potential")
        if kind == "hard_sphere":
            return hard_sphere_k(space, k, r, max_arity)
        return soft_sphere_k(space, k, r, _number(table, "alpha", name="potential"), max_arity)
    if kind == "hypergraph_pure_k":
        if not isinstance(space, HypergraphIntervals):
            raise ConfigError("hypergraph_pure_k needs a hypergraph_intervals space")
        _, pot, _ = build_embedding(graph, space.R, max(max_arity, 16))
        # reuse the configured space so that regions and potentials share it
        return replace(pot, space=space)
    raise ConfigError(f"unknown potential kind {kind!r}")


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read and validate a TOML run configuration."""
    path = Path(path)
    with path.open("rb") as fh:
        doc = tomllib.load(fh)
    overrides = overrides or {}
    space, graph = _build_space(doc, path.parent)
    region = _build_region(doc, space)
    potential = _build_potential(doc, space, graph)

    act = _table(doc, "activity")
    fraction = _number(act, "fraction", 0.5, name="activity")
    if not 0 < fraction < 1:
        raise ConfigError("activity.fraction must lie in (0, 1)")
    radial = _number(act, "radial", 8, int, "activity")
    angular = _number(act, "angular", 8, int, "activity")
    if radial < 1 or angular < 1:
        raise ConfigError("activity grid counts must be positive")

    ser = _table(doc, "series")
    K = _number(ser, "K", kind=int, name="series") if "K" in ser else None
    if K is not None and K < 0:
        raise ConfigError("series.K must be nonnegative")
    K_id = _number(ser, "K_id", 2, int, "series")
    if K_id < 1:
        raise ConfigError("series.K_id must be at least 1")
    delta_floor = _positive(_number(ser, "delta_floor", 1e-6, name="series"), "series.delta_floor")

    qt = _table(doc, "quadrature")
    seed = overrides.get("seed")
    quad = QuadratureSpec(
        scheme=qt.get("scheme", "tensor_midpoint"),
        resolution=_number(qt, "resolution", 64, int, "quadrature"),
        seed=_number(qt, "seed", 0, int, "quadrature") if seed is None else seed,
        max_nodes=_number(qt, "max_nodes", 2**25, int, "quadrature"),
    )

    tt = _table(doc, "tolerances")
    defaults = Tolerances()
    tolerances = Tolerances(
        **{
            key: _positive(_number(tt, key, getattr(defaults, key), name="tolerances"), f"tolerances.{key}")
            for key in Tolerances.__dataclass_fields__
        }
    )
    unknown = set(tt) - set(Tolerances.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown tolerances: {sorted(unknown)}")

    it = _table(doc, "identity")
    probes = it.get("probes", [])
    if not isinstance(probes, list):
        raise ConfigError("identity.probes must be a list")
    identity_lambda = _complex(it.get("lambda", 0.2), "identity.lambda")
    identity_K = _number(it, "K", kind=int, name="identity") if "K" in it else K
    if identity_K is not None and identity_K < 0:
        raise ConfigError("identity.K must be nonnegative")
    t_values = tuple(_extended(v, "identity.t_values") for v in it.get("t_values", [0, 0.5, "inf"]))
    if any(t < 0 for t in t_values):
        raise ConfigError("identity.t_values must be nonnegative")

    ct = _table(doc, "contraction")
    contraction_y = ct.get("y")
    contraction_N = _number(ct, "N", 3, int, "contraction")
    z_points = _number(ct, "z_points", 50, int, "contraction")
    if contraction_N < 1 or z_points < 2:
        raise ConfigError("contraction.N must be >= 1 and contraction.z_points >= 2")

    ht = _table(doc, "hypergraph")
    lambdas = tuple(_complex(v, "hypergraph.lambdas") for v in ht.get("lambdas", [0.1, [0.1, 0.1]]))

    out = _table(doc, "output")
    output_dir = overrides.get("out") or out.get("dir", "out")
    if not isinstance(output_dir, (str, Path)):
        raise ConfigError("output.dir must be a path")
    output_dir = Path(output_dir)
    if not output_dir.is_absolute() and overrides.get("out") is None:
        output_dir = path.parent / output_dir

    return RunConfig(
        space,
        region,
        potential,
        fraction,
        radial,
        angular,
        K,
        K_id,
        delta_floor,
        quad,
        tolerances,
        tuple(probes),
        identity_lambda,
        identity_K,
        t_values,
        contraction_y,
        contraction_N,
        z_points,
        lambdas,
        graph,
        output_dir,
    )


# --- output ------------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


# --- commands ----------------------------------------------------------------


def _continued_log(values: np.ndarray) -> np.ndarray:
    """Logarithms along a path from ``Z = 1``, with the phase kept continuous."""
    out = np.empty(len(values), dtype=complex)
    prev = 0.0
    for i, v in enumerate(values):
        principal = cmath.log(v)
        turns = round((prev - principal.imag) / (2 * math.pi))
        out[i] = complex(principal.real, principal.imag + 2 * math.pi * turns)
        prev = out[i].imag
    return out


def cmd_zscan(cfg: RunConfig, threads: int = 1) -> int:
    b = cfg.ball_volume
    if b == 0:
        raise ConfigError("zscan needs a potential with positive range")
    vol = cfg.region.volume
    top = cfg.fraction * cfg.disk_radius
    K = resolve_truncation(cfg.potential, top, vol, cfg.K)
    ints = configuration_integrals(cfg.region, cfg.potential, K, cfg.quad, threads)
    bound = vol / b
    radii = top * np.arange(1, cfg.radial + 1) / cfg.radial
    rows = []
    ok = True
    for j in range(cfg.angular):
        angle = 2 * math.pi * j / cfg.angular
        lams = radii * complex(math.cos(angle), math.sin(angle))
        values = np.atleast_1d(evaluate_series(ints, lams))
        logs = _continued_log(values)
        guarded = True
        for lam, z, lg in zip(lams, values, logs):
            tail = exp_tail(abs(lam) * vol, K)
            margin = abs(z) - tail
            # once the guard fails the phase continuation beyond it is meaningless
            guarded = guarded and margin > 0
            lg = lg if guarded else complex(math.nan, math.nan)
            passed = guarded and abs(lg) <= bound + cfg.tolerances.zscan
            ok &= passed
            rows.append(
                [lam.real, lam.imag, abs(z), tail, margin, lg.real, lg.imag, abs(lg), bound, passed]
            )
    header = [
        "lambda_re",
        "lambda_im",
        "abs_Z",
        "tail_bound",
        "abs_Z_minus_tail",
        "log_Z_re",
        "log_Z_im",
        "abs_log_Z",
        "bound",
        "pass",
    ]
    write_csv(cfg.output_dir / "zscan.csv", header, rows)
    print(f"zscan: {sum(r[-1] for r in rows)}/{len(rows)} rows pass (K={K}, bound={bound:.6g})")
    return EXIT_OK if ok else EXIT_FAIL


def _probe_list(cfg: RunConfig) -> list:
    if cfg.probes:
        return list(cfg.probes)
    return [cfg.space.ordering_base.tolist()]


def _probe_label(probe) -> str:
    vals = np.atleast_1d(np.asarray(probe, dtype=float)).ravel()
    return " ".join(f"{v:.17g}" for v in vals)


def cmd_identity(cfg: RunConfig, threads: int = 1) -> int:
    lam = cfg.identity_lambda
    rows = []
    args = dict(quad=cfg.quad, K=cfg.identity_K, threads=threads)

    def record(check, probe, t, run):
        try:
            rep = run()
            rows.append([check, probe, t, rep.lhs.real, rep.lhs.imag, rep.rhs.real, rep.rhs.imag,
                         rep.residual, rep.tolerance_budget, rep.passed])
        except ZeroFreenessError as exc:
            print(f"{check}: {exc}", file=sys.stderr)
            rows.append([check, probe, t, math.nan, math.nan, math.nan, math.nan, math.nan, math.nan, False])

    for y in _probe_list(cfg):
        label = _probe_label(y)
        record("integral_identity", label, "", lambda: integral_identity_check(
            cfg.space, cfg.region, cfg.potential, lam, y, cfg.K_id, atol=cfg.tolerances.identity,
            delta_floor=cfg.delta_floor, **args))
        for t in cfg.t_values:
            record("partition_identity", label, t, lambda: partition_identity_check(
                cfg.space, cfg.region, cfg.potential, lam, y, t, cfg.K_id, atol=cfg.tolerances.identity, **args))
    record("log_partition", "", "", lambda: log_partition_check(
        cfg.space, cfg.region, cfg.potential, lam, atol=cfg.tolerances.log_partition,
        delta_floor=cfg.delta_floor, **args))
    header = ["check", "probe", "t", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "residual", "budget", "pass"]
    write_csv(cfg.output_dir / "identity.csv", header, rows)
    for r in rows:
        probe = " ".join(f"{float(v):.6g}" for v in r[1].split()) or "-"
        print(f"{r[0]:<20} probe={probe:<8} t={_cell(r[2]) or '-':<6} residual={r[7]:.3e} "
              f"budget={r[8]:.3e} {'PASS' if r[9] else 'FAIL'}")
    return EXIT_OK if all(r[-1] for r in rows) else EXIT_FAIL


def cmd_contraction(cfg: RunConfig, threads: int = 1) -> int:
    b = cfg.ball_volume
    if b == 0:
        raise ConfigError("contraction needs a potential with positive range")
    y = cfg.contraction_y if cfg.contraction_y is not None else cfg.space.ordering_base.tolist()
    zs = np.linspace(0.0, 1.0 / b, cfg.z_points)
    rows = []
    worst = -math.inf
    for N in range(1, cfg.contraction_N + 1):
        values = np.atleast_1d(contraction_G(cfg.potential, cfg.region, y, N, zs, cfg.quad))
        for z, g in zip(zs, values):
            passed = bool(g <= 1.0 + cfg.tolerances.contraction)
            worst = max(worst, float(g))
            rows.append([N, z, g, passed])
    write_csv(cfg.output_dir / "contraction.csv", ["N", "z", "G", "pass"], rows)
    ok = worst <= 1.0 + cfg.tolerances.contraction
    print(f"contraction: max G = {worst:.17g} over N <= {cfg.contraction_N}, z in [0, {1 / b:.6g}]")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_hypergraph(graph: Hypergraph, R: float, out: Path, lambdas=(0.1, 0.1 + 0.1j),
                   tolerance: float = 1e-2, threads: int = 1) -> int:
    report = activity_zero_report(graph)
    coeffs = report.coefficients
    write_csv(out / "hypergraph_polynomial.csv", ["degree", "coefficient"], list(enumerate(coeffs)))
    roots = [[z.real, z.imag] for z in report.z_roots]
    write_csv(out / "hypergraph_roots.csv", ["z_re", "z_im"], roots)
    summary = [
        ["n_vertices", graph.n_vertices],
        ["k", graph.k],
        ["max_degree", report.max_degree],
        ["lambda_min_modulus", report.lambda_min_modulus],
        ["bound", report.bound],
        ["ball_bound", report.ball_bound],
        ["branches_considered", report.branches_considered],
        ["log_ratio", math.nan if report.log_ratio is None else report.log_ratio],
        ["real_lambda_zeros", " ".join(f"{v:.17g}" for v in report.real_lambda_zeros)],
        ["pass", report.passed],
    ]
    write_csv(out / "hypergraph_report.csv", ["quantity", "value"], summary)
    print("coefficients:", " ".join(str(c) for c in coeffs))
    print(f"min |lambda| = {report.lambda_min_modulus:.6f}, bound 1/(e(Delta+1)) = {report.bound:.6f}, "
          f"{'PASS' if report.passed else 'FAIL'}")
    ok = report.passed
    if graph.n_vertices <= CROSSCHECK_MAX_VERTICES and graph.is_connected():
        space, potential, region = build_embedding(graph, R)
        quad = QuadratureSpec(resolution=1)
        vol = region.volume
        K = resolve_truncation(potential, max(abs(l) for l in lambdas), vol, None)
        ints = configuration_integrals(region, potential, K, quad, threads)
        rows = []
        for lam in lambdas:
            value = complex(evaluate_series(ints, lam))
            exact = closed_form_Z(graph, lam)
            budget = exp_tail(abs(lam) * vol, K) + tolerance
            residual = abs(value - exact)
            rows.append([lam.real, lam.imag, value.real, value.imag, exact.real, exact.imag, residual, budget,
                         residual <= budget])
            ok &= residual <= budget
        header = ["lambda_re", "lambda_im", "quad_re", "quad_im", "closed_re", "closed_im", "residual", "budget",
                  "pass"]
        write_csv(out / "hypergraph_crosscheck.csv", header, rows)
        print(f"embedding cross-check: {sum(r[-1] for r in rows)}/{len(rows)} pass (K={K})")
    else:
        print("embedding cross-check skipped (more than 4 vertices or disconnected)")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_info(cfg: RunConfig) -> int:
    b = cfg.ball_volume
    vol = cfg.region.volume
    radius = cfg.disk_radius
    top = cfg.fraction * radius
    print(f"space            {cfg.space.kind}")
    print(f"potential        {cfg.potential.name} (range {cfg.potential.range:.17g})")
    print(f"B_R              {b:.17g}")
    print(f"volume           {vol:.17g}")
    print(f"disk radius      {radius:.17g}")
    if math.isfinite(top):
        K = resolve_truncation(cfg.potential, top, vol, cfg.K)
        print(f"scan radius      {top:.17g}")
        print(f"truncation K     {K}")
        print(f"tail bound       {exp_tail(top * vol, K):.3e}")
        if cfg.potential.active_arities(max(K, 1)):
            print(f"nodes at K       {rule_size(cfg.region, cfg.quad, max(K, 1))} (cap {cfg.quad.max_nodes})")
        else:
            print("nodes at K       0 (interaction-free, closed form)")
    if b > 0:
        print(f"log-Z bound      {vol / b:.17g}")
    return EXIT_OK


# --- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zerofree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("zscan", "identity", "contraction", "info"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int)
    p = sub.add_parser("hypergraph")
    p.add_argument("graph", nargs="?", type=Path, help="hypergraph file ('N k' then one edge per line)")
    p.add_argument("--R", type=float, default=10.0)
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int)
    return parser


def _run(args) -> int:
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    overrides = {"out": args.out, "seed": args.seed}
    if args.command == "hypergraph":
        cfg = load_config(args.config, overrides) if args.config else None
        if args.graph is not None:
            graph = Hypergraph.read(args.graph)
        elif cfg is not None and cfg.graph is not None:
            graph = cfg.graph
        else:
            raise ConfigError("hypergraph needs a graph file or a config with space.graph")
        R = cfg.space.R if cfg is not None and isinstance(cfg.space, HypergraphIntervals) else args.R
        if not R > 0:
            raise ConfigError("--R must be positive")
        out = args.out or (cfg.output_dir if cfg else Path("out"))
        lambdas = cfg.hypergraph_lambdas if cfg else (0.1, 0.1 + 0.1j)
        tol = cfg.tolerances.hypergraph if cfg else 1e-2
        return cmd_hypergraph(graph, R, out, lambdas, tol, args.threads)
    cfg = load_config(args.config, overrides)
    if args.command == "zscan":
        return cmd_zscan(cfg, args.threads)
    if args.command == "identity":
        return cmd_identity(cfg, args.threads)
    if args.command == "contraction":
        return cmd_contraction(cfg, args.threads)
    return cmd_info(cfg)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return _run(args)
    except (ConfigError, DomainError, ResourceError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # never let a traceback escape the command line
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
