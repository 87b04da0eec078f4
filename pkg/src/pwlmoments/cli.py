"""Command line front end.

    pwlmoments study --density gauss1d,heaviside --out results/
    pwlmoments bench --density crossingbeams1d --models HFM_9,HFM_17,HFM_33
    pwlmoments check "HFM_5 0.1 0.4 0.3 0.2 0.1"
    pwlmoments mesh --level 2 --out octants_r2.txt

Options given on the command line override keys read from ``--config``
(a flat ``key=value`` file).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import closure as cl
from . import harness as H
from . import realizability as rz
from .bases import Family, MomentVector, dimension, parse_model
from .geometry import sphere_triangulation

log = logging.getLogger("pwlmoments")

TIMING_HEADER = ("model", "n", "entropy", "median_ns", "iterations", "repetitions")


def _options(args: argparse.Namespace) -> dict:
    """Config-file keys overlaid with the flags that were actually given."""
    opts = H.read_config(args.config) if getattr(args, "config", None) else {}
    for key in ("density", "models", "entropy", "out", "quad_points", "quad_degree", "nmax",
                "tol", "max_iter", "taylor_threshold"):
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    return opts


def _outputs(out: str | None, densities) -> dict:
    """Where each density's CSV goes: stdout, one file, or a directory of files."""
    if out is None or out == "-":
        return {d: None for d in densities}
    path = Path(out)
    if len(densities) == 1 and path.suffix:
        return {densities[0]: path}
    path.mkdir(parents=True, exist_ok=True)
    return {d: path / f"{H.get_density(d).name.lower()}.csv" for d in densities}


def cmd_study(args) -> int:
    opts = _options(args)
    config = H.study_config(opts)
    targets = _outputs(opts.get("out"), config.densities)
    failed = 0
    for dname in config.densities:
        rows = H.convergence_study(H.StudyConfig(
            densities=(dname,), models=config.models, entropy=config.entropy,
            nmax=config.nmax, quad=config.quad, solver=config.solver))
        for row in rows:
            if row.error:
                failed += 1
                log.error("%s %s failed: %s", row.density, row.model, row.error)
        H.emit_csv(rows, targets[dname] if targets[dname] is not None else sys.stdout)
    return 1 if failed else 0


def cmd_bench(args) -> int:
    opts = _options(args)
    density = H.get_density(opts.get("density") or "crossingbeams1d")
    models = H.split_list(opts.get("models")) or H.DEFAULT_MODELS[density.name].split()
    settings = H.study_config(opts).quad
    factory = H.shared_rule_1d(points=args.shared_points) if density.dim == 1 and args.shared else None
    try:
        rows = H.timing_benchmark(models, density, opts.get("entropy") or "mb",
                                  repetitions=args.repetitions, warmup=args.warmup,
                                  rule_factory=factory, settings=settings)
    except cl.ClosureError as exc:
        log.error("benchmark solve failed: %s", exc)
        return 1
    out = opts.get("out")
    stream = open(out, "w", newline="") if out and out != "-" else sys.stdout
    try:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(TIMING_HEADER)
        for r in rows:
            w.writerow([r.model, r.n, r.entropy, r.median_ns, r.iterations, r.repetitions])
    finally:
        if stream is not sys.stdout:
            stream.close()
    groups: dict = {}
    for r in rows:
        groups.setdefault(r.model.split("_")[0], []).append(r)
    for prefix, rs in groups.items():
        if len(rs) > 1:
            t = [r.median_ns for r in rs]
            log.info("%s: log-log slope %.2f, max/min %.2f", prefix,
                     H.loglog_slope([r.n for r in rs], t), max(t) / min(t))
    return 0


def _parse_check_line(line: str, dim: int) -> MomentVector:
    parts = line.replace(",", " ").split()
    if not parts:
        raise ValueError("empty input; expected a model name followed by moment values")
    basis, _ = parse_model(parts[0], dim)
    values = np.array([float(v) for v in parts[1:]])
    if values.size != dimension(basis):
        raise ValueError(f"{parts[0]} has {dimension(basis)} moments, got {values.size}")
    return MomentVector(values, basis)


def _print_verdict(label: str, verdict) -> None:
    print(f"{label}: {verdict.status.value}")
    if verdict.rank is not None:
        print(f"rank: {verdict.rank}")
    if verdict.witness is not None:
        w = verdict.witness
        for i in range(w.num_atoms):
            loc = np.array2string(np.atleast_1d(w.locations[i]), precision=12)
            elem = "" if w.elements is None else f" element {w.elements[i]}"
            print(f"  atom {i}: weight {w.weights[i]:.12g} at {loc}{elem}")


def _random_check(name: str, dim: int, count: int, seed: int) -> int:
    """Solve the closure for random strictly realizable vectors and test them."""
    basis, _ = parse_model(name, dim)
    rng = np.random.default_rng(seed)
    rule = cl.default_rule(basis)
    integrator = cl.QuadratureIntegrator(basis, rule)
    bad = 0
    for _ in range(count):
        u = H.reference_moments(H.random_density(basis.dim, rng), basis, rule)
        try:
            if basis.family is not Family.HARMONICS and not rz.check(u, strict=True):
                bad += 1
                continue
            cl.solve_dual(basis, u.values, integrator=integrator)
        except cl.ClosureError as exc:
            log.error("solve failed: %s", exc)
            bad += 1
    print(f"{name}: {count - bad}/{count} random vectors strictly realizable and solved (seed {seed})")
    return 1 if bad else 0


def cmd_check(args) -> int:
    if args.random:
        return _random_check(args.line[0], args.dim, args.random, args.seed)
    line = " ".join(args.line) if args.line else sys.stdin.readline()
    try:
        u = _parse_check_line(line, args.dim)
    except ValueError as exc:
        log.error("%s", exc)
        return 2
    ok = True
    try:
        verdict = rz.check(u, strict=args.strict)
        _print_verdict("verdict", verdict)
        ok = verdict.realizable
    except NotImplementedError:
        print("no analytic test for this basis; using the quadrature test only")
        args.numerical = True
    if args.numerical:
        rule = cl.default_rule(u.basis)
        num = rz.numerically_realizable(u, rule, strict=args.strict)
        print(f"numerically realizable: {'yes' if num.realizable else 'no'}")
        ok = ok and num.realizable
    return 0 if ok else 1


def cmd_mesh(args) -> int:
    tri = sphere_triangulation(args.level)
    if args.out and args.out != "-":
        with open(args.out, "w") as fh:
            tri.write(fh)
    else:
        tri.write(sys.stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pwlmoments", description=__doc__.split("\n")[0])
    verbose = argparse.ArgumentParser(add_help=False)
    verbose.add_argument("-v", "--verbose", action="store_true", help="log progress and slopes")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_density=None):
        p.add_argument("--config", help="flat key=value file; flags override its keys")
        p.add_argument("--density", default=default_density,
                       help=f"comma separated, from {', '.join(H.DENSITIES)}")
        p.add_argument("--models", help="comma separated model names, e.g. HFM_9,PMM_8,M_2")
        p.add_argument("--entropy", choices=("mb", "be"), help="entropy of the nonlinear models")
        p.add_argument("--out", help="output file, or directory for several densities")
        p.add_argument("--quad-points", type=int, help="Gauss-Lobatto points per subinterval")
        p.add_argument("--quad-degree", type=int, help="triangle rule degree on the sphere")
        p.add_argument("--nmax", type=int, help="skip models with more moments")
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", type=int)
        p.add_argument("--taylor-threshold", type=float)

    p = sub.add_parser("study", parents=[verbose], help="convergence tables as CSV")
    common(p)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("bench", parents=[verbose], help="median solve times")
    common(p)
    p.add_argument("--repetitions", type=int, default=20)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--shared", action="store_true",
                   help="slab geometry: one 256-interval node set for every model")
    p.add_argument("--shared-points", type=int, default=20)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("check", parents=[verbose], help="realizability of a moment vector")
    p.add_argument("line", nargs="*", help="model name and values; read from stdin if absent")
    p.add_argument("--dim", type=int, choices=(1, 3), default=1)
    p.add_argument("--strict", action="store_true", help="ask for the interior")
    p.add_argument("--numerical", action="store_true",
                   help="also test membership in the quadrature-realizable set")
    p.add_argument("--random", type=int, default=0, metavar="COUNT",
                   help="instead test COUNT random vectors of the named model")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("mesh", parents=[verbose], help="write a refined octant triangulation")
    p.add_argument("--level", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_mesh)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
