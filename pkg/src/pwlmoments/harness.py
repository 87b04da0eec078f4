"""Approximation experiments: project prescribed densities onto a model,
reconstruct the closure, and measure errors, convergence orders and solve
times.

Reference moments, the closure integrals and the error norms all use the
same fine quadrature.  In slab geometry it subdivides the model partition to
at least 200 intervals (split additionally at density discontinuities) with
a Gauss-Lobatto rule on each; on the sphere it is a degree-18 rule on the
three-times refined octant triangulation.
"""

from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import closure as cl
from .bases import AngularBasis, MomentVector, dimension, evaluate, model_name, parse_model
from .closure import EntropyFamily, SolverConfig
from .geometry import Partition1D
from .quadrature import QuadratureRule, composite_rule, fine_rule_1d, sphere_rule

CSV_HEADER = ("model", "n", "entropy", "l1", "linf", "iterations", "time_ns", "order")

VACUUM_1D = 1e-8 / 2.0
VACUUM_3D = 1e-8 / (4.0 * math.pi)

#: Newton budget of the studies.  Discontinuous 3D densities seen through
#: high-order full moments need slightly more than the solver's default.
STUDY_MAX_ITER = 1000


# ---------------------------------------------------------------------------
# test densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TestDensity:
    """A prescribed, strictly positive kinetic density.

    ``func(points, centers)`` evaluates the density; ``centers`` (the centre
    of the quadrature element each point belongs to) resolves one-sided
    values at discontinuities that sit on element boundaries.
    """

    __test__ = False  # not a pytest class

    name: str
    dim: int
    func: Callable
    breakpoints: tuple = ()
    params: dict = field(default_factory=dict)

    def __call__(self, points, centers=None) -> np.ndarray:
        return np.asarray(self.func(np.asarray(points, dtype=float), centers), dtype=float)

    def __repr__(self):
        args = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.name}({args})"


def gauss_1d(sigma: float = 0.5, mean: float = 0.0) -> TestDensity:
    def f(mu, centers=None):
        return np.exp(-(mu - mean) ** 2 / (2.0 * sigma ** 2)) / math.sqrt(2.0 * math.pi * sigma ** 2)
    return TestDensity("Gauss1D", 1, f, (), {"sigma": sigma, "mean": mean})


def heaviside_1d(vacuum: float = VACUUM_1D) -> TestDensity:
    def f(mu, centers=None):
        left = mu < 0
        if centers is not None:
            left = left | ((mu == 0) & (np.asarray(centers) < 0))
        return np.where(left, vacuum, 1.0)
    return TestDensity("Heaviside", 1, f, (0.0,), {"vacuum": vacuum})


def crossing_beams_1d(a: float = 1e3) -> TestDensity:
    def f(mu, centers=None):
        return math.sqrt(a / math.pi) * (np.exp(-a * (mu + 1.0) ** 2) + np.exp(-a * (mu - 0.5) ** 2))
    return TestDensity("CrossingBeams1D", 1, f, (), {"a": a})


def gauss_3d(sigma: float = 0.5, mean_x: float = 1.0) -> TestDensity:
    norm = 1.0 / (2.0 * math.pi * sigma ** 2 * (1.0 - math.exp(-2.0 / sigma ** 2)))

    def f(omega, centers=None):
        r2 = (omega[..., 0] - mean_x) ** 2 + omega[..., 1] ** 2 + omega[..., 2] ** 2
        return norm * np.exp(-r2 / (2.0 * sigma ** 2))
    return TestDensity("Gauss3D", 3, f, (), {"sigma": sigma, "mean_x": mean_x})


def square_3d(vacuum: float = VACUUM_3D) -> TestDensity:
    def f(omega, centers=None):
        inside = (omega[..., 0] > 0) & (np.abs(omega[..., 1]) < 0.5) & (np.abs(omega[..., 2]) < 0.5)
        return np.where(inside, 1.0, vacuum)
    return TestDensity("Square3D", 3, f, (), {"vacuum": vacuum})


def crossing_beams_3d(a: float = 100.0, vacuum: float = VACUUM_3D) -> TestDensity:
    ex, ey = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])

    def f(omega, centers=None):
        d1 = np.sum((omega - ex) ** 2, axis=-1)
        d2 = np.sum((omega - ey) ** 2, axis=-1)
        return np.maximum(a / math.pi * (np.exp(-a * d1) + np.exp(-a * d2)), vacuum)
    return TestDensity("CrossingBeams3D", 3, f, (), {"a": a, "vacuum": vacuum})


DENSITIES: dict[str, Callable[[], TestDensity]] = {
    "gauss1d": gauss_1d,
    "heaviside": heaviside_1d,
    "crossingbeams1d": crossing_beams_1d,
    "gauss3d": gauss_3d,
    "square3d": square_3d,
    "crossingbeams3d": crossing_beams_3d,
}


def get_density(name: str | TestDensity) -> TestDensity:
    if isinstance(name, TestDensity):
        return name
    key = name.strip().lower().replace("_", "").replace("-", "")
    if key == "heaviside1d":
        key = "heaviside"
    try:
        return DENSITIES[key]()
    except KeyError:
        raise ValueError(f"unknown density {name!r}; choose from {', '.join(DENSITIES)}") from None


def random_density(dim: int, rng: np.random.Generator, bumps: int = 3) -> TestDensity:
    """A few Gaussian bumps at random directions over a random positive floor.

    Widths lie in [0.15, 1], heights in [0.2, 1] and the floor in [1e-3, 1e-1],
    so the moments are strictly realizable but far from isotropic.
    """
    if dim == 1:
        centers = rng.uniform(-1.0, 1.0, bumps)
    else:
        centers = rng.normal(size=(bumps, 3))
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    widths = rng.uniform(0.15, 1.0, bumps)
    heights = rng.uniform(0.2, 1.0, bumps)
    floor = 10.0 ** rng.uniform(-3.0, -1.0)

    def f(x, centers_=None):
        x = np.asarray(x, dtype=float)
        if dim == 1:
            d2 = (x[..., None] - centers) ** 2
        else:
            d2 = np.sum((x[..., None, :] - centers) ** 2, axis=-1)
        return floor + np.sum(heights * np.exp(-0.5 * d2 / widths ** 2), axis=-1)
    return TestDensity("Random", dim, f, (), {"floor": floor})


# ---------------------------------------------------------------------------
# fine quadrature and evaluation sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureSettings:
    points: int = 100           # Gauss-Lobatto points per subinterval (slab)
    min_intervals: int = 200    # subintervals (slab)
    degree: int = 18            # triangle rule degree (sphere)
    level: int = 3              # refinement level of the fine triangulation (sphere)


def fine_rule(basis: AngularBasis, density: TestDensity | None = None,
              settings: QuadratureSettings = QuadratureSettings()) -> QuadratureRule:
    """The fine rule shared by reference moments, closure solves and error norms."""
    if basis.dim == 1:
        mesh = basis.mesh if basis.is_piecewise else Partition1D(np.array([-1.0, 1.0]))
        breaks = density.breakpoints if density is not None else ()
        return fine_rule_1d(mesh, settings.min_intervals, settings.points, breaks)
    model_level = basis.mesh.level if basis.is_piecewise else None
    level = settings.level if model_level is None else max(settings.level, model_level)
    return sphere_rule(level, settings.degree, model_level)


def element_centers(rule: QuadratureRule) -> np.ndarray:
    """Centre of each quadrature element: interval midpoint, or the normalised node mean."""
    if rule.dim == 1:
        return 0.5 * (rule.nodes[:, 0] + rule.nodes[:, -1])
    c = np.einsum("eq,eqi->ei", rule.weights, rule.nodes)
    return c / np.linalg.norm(c, axis=1, keepdims=True)


def density_on_rule(density: TestDensity, rule: QuadratureRule) -> np.ndarray:
    """Density values at the rule nodes, shape ``(E, q)`` (one-sided on element boundaries)."""
    centers = np.repeat(element_centers(rule), rule.points_per_element, axis=0)
    return density(rule.flat_nodes(), centers).reshape(rule.weights.shape)


def reference_moments(density: TestDensity | str, basis: AngularBasis,
                      rule: QuadratureRule | None = None,
                      settings: QuadratureSettings = QuadratureSettings()) -> MomentVector:
    """``u = <b psi>`` with the fine quadrature."""
    density = get_density(density)
    if rule is None:
        rule = fine_rule(basis, density, settings)
    integrator = cl.QuadratureIntegrator(basis, rule)
    return MomentVector(integrator.nodal.moments(density_on_rule(density, rule)), basis)


@dataclass(frozen=True, eq=False)
class ModelEvaluation:
    l1: float
    linf: float
    closure: cl.ClosureResult
    reference_mass: float


def _ansatz(entropy: EntropyFamily, p):
    return entropy.dual_prime(p)


def evaluate_model(density: TestDensity | str, basis: AngularBasis, entropy, u=None, *,
                   rule: QuadratureRule | None = None,
                   config: SolverConfig | None = None,
                   settings: QuadratureSettings = QuadratureSettings()) -> ModelEvaluation:
    """Solve the closure for the reference moments and measure L1 and L-infinity errors."""
    density = get_density(density)
    entropy = EntropyFamily.parse(entropy)
    if rule is None:
        rule = fine_rule(basis, density, settings)
    integrator = cl.QuadratureIntegrator(basis, rule)
    psi_ref = density_on_rule(density, rule)
    if u is None:
        u = integrator.nodal.moments(psi_ref)
    config = SolverConfig() if config is None else config
    result = cl.solve_dual(basis, u, config, entropy=entropy, integrator=integrator)
    alpha = result.multipliers.values
    psi = _ansatz(entropy, integrator.nodal_values(alpha))
    diff = np.abs(psi - psi_ref)
    l1 = float(np.sum(rule.weights * diff))
    # element midpoints complete the L-infinity evaluation set
    centers = element_centers(rule)
    b_mid = evaluate(basis, centers, rule.parent if basis.is_piecewise else None)
    psi_mid = _ansatz(entropy, b_mid @ alpha)
    ref_mid = density(centers, centers)
    linf = max(float(diff.max()), float(np.max(np.abs(psi_mid - ref_mid))))
    return ModelEvaluation(l1, linf, result, float(np.sum(rule.weights * psi_ref)))


def approximation_error(density, basis: AngularBasis, entropy, u=None, **kwargs) -> tuple[float, float]:
    """``(L1, L-infinity)`` error of the closure for ``density``.

    Raises
    ------
    ModelError
        Wrapping the solver failure together with the model name.
    """
    try:
        ev = evaluate_model(density, basis, entropy, u, **kwargs)
    except cl.ClosureError as exc:
        name = model_name(basis, EntropyFamily.parse(entropy) is cl.QUADRATIC)
        raise ModelError(f"{name}: {type(exc).__name__}: {exc}") from exc
    return ev.l1, ev.linf


class ModelError(RuntimeError):
    """A solver failure annotated with the model it occurred in."""


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------


@dataclass
class ExperimentRow:
    model: str
    n: int
    entropy: str
    l1: float
    linf: float
    iterations: int
    time_ns: int
    order: float | None = None
    density: str = ""
    error: str | None = None

    def csv_fields(self) -> list[str]:
        def num(x):
            return "" if x is None else repr(float(x))
        return [self.model, str(self.n), self.entropy, num(self.l1), num(self.linf),
                str(self.iterations), str(self.time_ns), num(self.order)]


#: default model sequences per density (slab n values at desk scale, sphere levels 0..2, N = 1..6)
DEFAULT_MODELS = {
    "Gauss1D": ("M_1 M_2 M_3 M_4 M_6 M_8 P_1 P_2 P_3 P_4 P_6 P_8 "
                "HFM_5 HFM_9 HFM_17 HFM_33 HFM_65 HFP_5 HFP_9 HFP_17 HFP_33 HFP_65 "
                "PMM_4 PMM_8 PMM_16 PMM_32 PMM_64 PMP_4 PMP_8 PMP_16 PMP_32 PMP_64"),
    "Heaviside": ("M_1 M_2 M_3 M_4 M_6 M_8 P_1 P_2 P_3 P_4 P_6 P_8 "
                  "HFM_5 HFM_9 HFM_17 HFM_33 HFM_65 HFP_5 HFP_9 HFP_17 HFP_33 HFP_65 "
                  "PMM_6 PMM_10 PMM_18 PMM_34 PMM_66 PMP_6 PMP_10 PMP_18 PMP_34 PMP_66"),
    "CrossingBeams1D": ("M_1 M_2 M_3 M_4 M_6 M_8 P_1 P_2 P_3 P_4 P_6 P_8 "
                        "HFM_5 HFM_9 HFM_17 HFM_33 HFM_65 HFP_5 HFP_9 HFP_17 HFP_33 HFP_65 "
                        "PMM_4 PMM_8 PMM_16 PMM_32 PMM_64 PMP_4 PMP_8 PMP_16 PMP_32 PMP_64"),
}
_DEFAULT_3D = ("M_1 M_2 M_3 M_4 M_5 M_6 P_1 P_2 P_3 P_4 P_5 P_6 "
               "HFM_6 HFM_18 HFM_66 HFP_6 HFP_18 HFP_66 "
               "PMM_32 PMM_128 PMM_512 PMP_32 PMP_128 PMP_512")
for _name in ("Gauss3D", "Square3D", "CrossingBeams3D"):
    DEFAULT_MODELS[_name] = _DEFAULT_3D


@dataclass
class StudyConfig:
    densities: tuple = ("gauss1d",)
    models: tuple | None = None      # model names; None selects the defaults per density
    entropy: str = "mb"              # entropy of the nonlinear models (M, HFM, PMM)
    nmax: int | None = None          # drop models with more moments than this
    quad: QuadratureSettings = QuadratureSettings()
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(max_iter=STUDY_MAX_ITER))


def _sort_key(row: ExperimentRow):
    return (row.density, row.model.split("_")[0], row.n)


def empirical_orders(rows: list[ExperimentRow], attr: str = "l1") -> list[float | None]:
    """``-log(e2/e1)/log(n2/n1)`` against the previous row of the same model family and density."""
    out = []
    prev: dict = {}
    for row in rows:
        key = (row.density, row.model.split("_")[0])
        value = getattr(row, attr)
        order = None
        if key in prev and row.error is None:
            n1, e1 = prev[key]
            if e1 > 0 and value > 0 and row.n != n1 and np.isfinite(e1) and np.isfinite(value):
                order = -math.log(value / e1) / math.log(row.n / n1)
        if row.error is None:
            prev[key] = (row.n, value)
        out.append(order)
    return out


def run_model(density: TestDensity, name: str, config: StudyConfig) -> ExperimentRow:
    """One study row; solver failures are recorded rather than raised."""
    basis, linear = parse_model(name, density.dim)
    entropy = cl.QUADRATIC if linear else EntropyFamily.parse(config.entropy)
    n = dimension(basis)
    try:
        ev = evaluate_model(density, basis, entropy, config=config.solver, settings=config.quad)
    except cl.ClosureError as exc:
        return ExperimentRow(name, n, entropy.value, float("nan"), float("nan"), -1, 0,
                             density=density.name, error=f"{type(exc).__name__}: {exc}")
    res = ev.closure
    return ExperimentRow(name, n, entropy.value, ev.l1, ev.linf, res.iterations,
                         int(round(res.wall_time * 1e9)), density=density.name)


def convergence_study(config: StudyConfig) -> list[ExperimentRow]:
    """Rows for every (density, model), sorted by density, model family and n, with orders."""
    rows = []
    for dname in config.densities:
        density = get_density(dname)
        names = config.models if config.models else DEFAULT_MODELS[density.name].split()
        for name in names:
            basis, _ = parse_model(name, density.dim)
            if config.nmax is not None and dimension(basis) > config.nmax:
                continue
            rows.append(run_model(density, name, config))
    rows.sort(key=_sort_key)
    for row, order in zip(rows, empirical_orders(rows)):
        row.order = order
    return rows


# ---------------------------------------------------------------------------
# timings
# ---------------------------------------------------------------------------


@dataclass
class TimingRow:
    model: str
    n: int
    entropy: str
    median_ns: int
    iterations: int
    repetitions: int
    density: str = ""


def shared_rule_1d(points: int = 20, intervals: int = 256) -> Callable:
    """Factory of rules with one common node set for all partitions dividing ``intervals``."""
    def make(basis: AngularBasis) -> QuadratureRule:
        mesh = basis.mesh if basis.is_piecewise else Partition1D(np.array([-1.0, 1.0]))
        k = mesh.num_intervals
        if intervals % k:
            raise ValueError(f"{k} intervals do not divide the shared {intervals}-interval rule")
        return composite_rule(mesh, points, intervals // k)
    return make


def time_solve(basis: AngularBasis, u, entropy, rule: QuadratureRule,
               config: SolverConfig | None = None, repetitions: int = 20,
               warmup: int = 3) -> tuple[int, int]:
    """Median wall time (ns) of :func:`closure.solve_dual` and its iteration count.

    Integrator set-up (basis evaluation at the nodes) is done once outside
    the timed region; only the Newton solve is measured.
    """
    integrator = cl.QuadratureIntegrator(basis, rule)
    config = SolverConfig() if config is None else config
    for _ in range(warmup):
        res = cl.solve_dual(basis, u, config, entropy=entropy, integrator=integrator)
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter_ns()
        res = cl.solve_dual(basis, u, config, entropy=entropy, integrator=integrator)
        times.append(time.perf_counter_ns() - t0)
    return int(statistics.median(times)), res.iterations


def timing_benchmark(models: Sequence[str], density: TestDensity | str = "crossingbeams1d",
                     entropy="mb", repetitions: int = 20, warmup: int = 3,
                     rule_factory: Callable | None = None,
                     config: SolverConfig | None = None,
                     settings: QuadratureSettings = QuadratureSettings()) -> list[TimingRow]:
    """Median solve times over ``repetitions`` runs after ``warmup`` runs, per model.

    Reference moments are computed with the same rule as the solve but are
    not part of the timing.  Runs are strictly sequential.
    """
    if repetitions < 1 or warmup < 0:
        raise ValueError("need at least one timed repetition")
    density = get_density(density)
    entropy = EntropyFamily.parse(entropy)
    rows = []
    for name in models:
        basis, linear = parse_model(name, density.dim)
        ent = cl.QUADRATIC if linear else entropy
        rule = rule_factory(basis) if rule_factory else fine_rule(basis, density, settings)
        u = reference_moments(density, basis, rule)
        median, iters = time_solve(basis, u, ent, rule, config, repetitions, warmup)
        rows.append(TimingRow(name, dimension(basis), ent.value, median, iters, repetitions,
                              density.name))
    return rows


def loglog_slope(n: Sequence[float], t: Sequence[float]) -> float:
    """Least-squares slope of ``log t`` against ``log n``."""
    return float(np.polyfit(np.log(np.asarray(n, dtype=float)), np.log(np.asarray(t, dtype=float)), 1)[0])


# ---------------------------------------------------------------------------
# output and configuration
# ---------------------------------------------------------------------------


def emit_csv(rows: Iterable[ExperimentRow], destination) -> None:
    """Write rows with the fixed header; ``destination`` is a path or a text stream."""
    def write(stream):
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in rows:
            w.writerow(row.csv_fields())

    if hasattr(destination, "write"):
        write(destination)
        return
    path = Path(destination)
    try:
        with path.open("w", newline="") as fh:
            write(fh)
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc.strerror}") from exc


def read_csv(source) -> list[ExperimentRow]:
    """Parse a file written by :func:`emit_csv`."""
    def parse(stream):
        reader = csv.reader(stream)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        out = []
        for rec in reader:
            model, n, entropy, l1, linf, iters, t, order = rec
            out.append(ExperimentRow(model, int(n), entropy, float(l1), float(linf), int(iters),
                                     int(t), float(order) if order else None))
        return out

    if hasattr(source, "read"):
        return parse(source)
    with Path(source).open(newline="") as fh:
        return parse(fh)


def read_config(path) -> dict[str, str]:
    """Flat ``key=value`` file; blank lines and ``#`` comments are ignored."""
    out = {}
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def split_list(value: str | Sequence[str] | None) -> tuple | None:
    if value is None:
        return None
    if isinstance(value, str):
        parts = value.replace(";", ",").replace(" ", ",").split(",")
        return tuple(p for p in (s.strip() for s in parts) if p)
    return tuple(value)


def study_config(options: dict) -> StudyConfig:
    """Build a :class:`StudyConfig` from merged config-file and command-line options."""
    solver_keys = {"max_iter": STUDY_MAX_ITER}
    solver_keys.update({k: v for k, v in options.items()
                        if k in ("tol", "max_iter", "taylor_threshold") and v is not None})
    solver = SolverConfig.from_mapping(solver_keys)
    quad = QuadratureSettings()
    if options.get("quad_points") is not None:
        quad = replace(quad, points=int(options["quad_points"]))
    if options.get("quad_degree") is not None:
        quad = replace(quad, degree=int(options["quad_degree"]))
    densities = split_list(options.get("density")) or ("gauss1d",)
    nmax = options.get("nmax")
    return StudyConfig(densities=densities, models=split_list(options.get("models")),
                       entropy=options.get("entropy") or "mb",
                       nmax=int(nmax) if nmax not in (None, "") else None,
                       quad=quad, solver=solver)
