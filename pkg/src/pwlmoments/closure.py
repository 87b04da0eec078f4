"""Minimum-entropy closure.

The multipliers ``alpha`` of the entropy ansatz ``psi = eta*'(b^T alpha)``
minimise the strictly convex dual objective

    f(alpha) = <eta*(b^T alpha)> - u^T alpha,

whose gradient ``<b eta*'(b^T alpha)> - u`` vanishes exactly when the ansatz
reproduces the moments ``u``.  :func:`solve_dual` minimises ``f`` with a
damped Newton iteration.

Angular integrals are delegated to an *integrator*.  The default
:class:`QuadratureIntegrator` works for every basis and entropy; the
:class:`AnalyticIntegrator` evaluates the Maxwell-Boltzmann integrals of the
piecewise-linear slab bases in closed form.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, fields
from enum import Enum
from typing import Mapping

import numpy as np
from scipy import linalg

from .bases import (AngularBasis, Family, MomentVector, NodalBasis, dimension,
                    evaluate, nodal_basis)
from .quadrature import QuadratureRule, fine_rule_1d, sphere_rule
from . import geometry as geo


class ClosureError(RuntimeError):
    """Base class of solver failures."""


class MaxIterations(ClosureError):
    """Newton did not reach the gradient tolerance (or the line search stalled)."""


class DomainViolation(ClosureError):
    """Bose-Einstein multipliers left the domain ``b^T alpha < 0``."""


class SingularHessian(ClosureError):
    """The Hessian could not be factorised, even after regularisation."""


class SingularMassMatrix(ClosureError):
    """The mass matrix of the linear closure is singular."""


# ---------------------------------------------------------------------------
# entropies
# ---------------------------------------------------------------------------


class EntropyFamily(str, Enum):
    MAXWELL_BOLTZMANN = "mb"
    BOSE_EINSTEIN = "be"
    QUADRATIC = "quadratic"

    @classmethod
    def parse(cls, value) -> "EntropyFamily":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"mb": cls.MAXWELL_BOLTZMANN, "maxwell_boltzmann": cls.MAXWELL_BOLTZMANN,
                   "maxwellboltzmann": cls.MAXWELL_BOLTZMANN,
                   "be": cls.BOSE_EINSTEIN, "bose_einstein": cls.BOSE_EINSTEIN,
                   "boseeinstein": cls.BOSE_EINSTEIN,
                   "quadratic": cls.QUADRATIC, "p": cls.QUADRATIC}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown entropy {value!r}") from None

    # eta(psi)
    def eta(self, psi):
        psi = np.asarray(psi, dtype=float)
        if self is EntropyFamily.MAXWELL_BOLTZMANN:
            return psi * np.log(psi) - psi
        if self is EntropyFamily.BOSE_EINSTEIN:
            return psi * np.log(psi) - (1.0 + psi) * np.log1p(psi)
        return 0.5 * psi * psi

    def dual(self, p):
        """Legendre dual ``eta*(p)``."""
        p = np.asarray(p, dtype=float)
        if self is EntropyFamily.MAXWELL_BOLTZMANN:
            return np.exp(p)
        if self is EntropyFamily.BOSE_EINSTEIN:
            return -np.log(-np.expm1(p))
        return 0.5 * p * p

    def dual_prime(self, p):
        """``eta*'(p)``, the ansatz as a function of ``b^T alpha``."""
        p = np.asarray(p, dtype=float)
        if self is EntropyFamily.MAXWELL_BOLTZMANN:
            return np.exp(p)
        if self is EntropyFamily.BOSE_EINSTEIN:
            return np.exp(p) / -np.expm1(p)
        return p.copy()

    def dual_second(self, p):
        p = np.asarray(p, dtype=float)
        if self is EntropyFamily.MAXWELL_BOLTZMANN:
            return np.exp(p)
        if self is EntropyFamily.BOSE_EINSTEIN:
            return np.exp(p) / np.expm1(p) ** 2
        return np.ones_like(p)

    def inverse_prime(self, psi: float) -> float:
        """``p`` with ``eta*'(p) = psi`` (the constant ansatz value)."""
        if self is EntropyFamily.MAXWELL_BOLTZMANN:
            return math.log(psi)
        if self is EntropyFamily.BOSE_EINSTEIN:
            return math.log(psi / (1.0 + psi))
        return float(psi)


MB = EntropyFamily.MAXWELL_BOLTZMANN
BE = EntropyFamily.BOSE_EINSTEIN
QUADRATIC = EntropyFamily.QUADRATIC


@dataclass(frozen=True, eq=False)
class Multipliers:
    values: np.ndarray
    basis: AngularBasis
    entropy: EntropyFamily = MB

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (dimension(self.basis),):
            raise ValueError(f"expected {dimension(self.basis)} multipliers, got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "entropy", EntropyFamily.parse(self.entropy))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True, eq=False)
class ClosureResult:
    multipliers: Multipliers
    achieved_moments: MomentVector
    residual_norm: float
    iterations: int
    wall_time: float
    objective_history: tuple = ()


TAYLOR_TERMS = 8
#: |x| below which phi_k uses the series; with 8 terms both branches stay within
#: about 5e-14 relative error of phi_1..phi_3 on either side of the switch
TAYLOR_THRESHOLD = 0.1


@dataclass
class SolverConfig:
    """Newton parameters.  ``tol`` bounds the max-norm of the gradient relative to ``rho(u)``."""

    tol: float = 1e-9
    max_iter: int = 200
    taylor_threshold: float = TAYLOR_THRESHOLD
    entropy: EntropyFamily = MB
    armijo: float = 1e-4
    step_factor: float = 0.5
    min_step: float = 1e-13
    regularization: float = 1e-12
    be_margin: float = 1e-12

    def __post_init__(self):
        self.entropy = EntropyFamily.parse(self.entropy)
        self.tol = float(self.tol)
        self.max_iter = int(self.max_iter)
        self.taylor_threshold = float(self.taylor_threshold)
        if self.tol <= 0 or self.max_iter < 1 or self.taylor_threshold < 0:
            raise ValueError("tol and max_iter must be positive, taylor_threshold non-negative")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> "SolverConfig":
        """Build from config keys; unknown keys are ignored."""
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in mapping.items() if k in known})


# ---------------------------------------------------------------------------
# Hessians with structure
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class StructuredHessian:
    """Symmetric Hessian stored as dense, banded (tridiagonal) or block diagonal.

    ``banded`` uses the upper form of :func:`scipy.linalg.solveh_banded`;
    ``blocks`` has shape ``(K, m, m)`` for unknowns grouped contiguously.
    """

    kind: str
    data: np.ndarray
    n: int

    def dense(self) -> np.ndarray:
        if self.kind == "dense":
            return self.data
        if self.kind == "banded":
            return np.diag(self.data[1]) + np.diag(self.data[0, 1:], 1) + np.diag(self.data[0, 1:], -1)
        return linalg.block_diag(*self.data)

    def diagonal(self) -> np.ndarray:
        if self.kind == "dense":
            return np.diag(self.data)
        if self.kind == "banded":
            return self.data[1]
        return np.einsum("kii->ki", self.data).ravel()

    def _solve(self, data, g):
        if self.kind == "dense":
            return linalg.cho_solve(linalg.cho_factor(data, check_finite=False), g,
                                    check_finite=False)
        if self.kind == "banded":
            return linalg.solveh_banded(data, g, check_finite=False)
        chol = np.linalg.cholesky(data)
        rhs = g.reshape(data.shape[0], data.shape[1], 1)
        y = np.linalg.solve(chol, rhs)
        return np.linalg.solve(np.swapaxes(chol, 1, 2), y).ravel()

    def solve(self, g: np.ndarray, regularization: float = 1e-12) -> np.ndarray:
        """``H^{-1} g`` by Cholesky; one retry with ``reg * trace / n`` on the diagonal."""
        if not np.all(np.isfinite(self.data)):
            raise SingularHessian("non-finite Hessian entries")
        try:
            return self._solve(self.data, g)
        except (np.linalg.LinAlgError, ValueError):
            pass
        shift = regularization * max(float(self.diagonal().sum()), 0.0) / self.n
        data = self.data.copy()
        if self.kind == "dense":
            data[np.diag_indices(self.n)] += shift
        elif self.kind == "banded":
            data[1] += shift
        else:
            data += shift * np.eye(data.shape[1])[None]
        try:
            return self._solve(data, g)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SingularHessian(f"Hessian not positive definite after regularisation ({exc})") from None


# ---------------------------------------------------------------------------
# integrators
# ---------------------------------------------------------------------------


def default_rule(basis: AngularBasis) -> QuadratureRule:
    """Fine rule used when none is supplied.

    Slab geometry: at least 200 subintervals with 20 Gauss-Lobatto points
    each.  Sphere: degree-18 rule on the three-times refined octants (or one
    level below the model mesh if that is finer).
    """
    if basis.dim == 1:
        mesh = basis.mesh if basis.is_piecewise else geo.Partition1D(np.array([-1.0, 1.0]))
        return fine_rule_1d(mesh)
    level = basis.mesh.level if basis.is_piecewise else None
    fine = 3 if level is None else max(3, level + 1)
    return sphere_rule(fine, 18, model_level=level)


class QuadratureIntegrator:
    """Angular integrals by a fixed quadrature rule, element-aware."""

    def __init__(self, basis: AngularBasis, rule: QuadratureRule | None = None):
        self.basis = basis
        self.rule = default_rule(basis) if rule is None else rule
        self.nodal: NodalBasis = nodal_basis(basis, self.rule)
        self.n = dimension(basis)
        parent = self.rule.parent
        self._starts = None
        if basis.family in (Family.PARTIAL, Family.PARTIAL_SPHERE) and np.all(np.diff(parent) >= 0):
            if np.array_equal(np.unique(parent), np.arange(basis.num_elements)):
                self._starts = np.flatnonzero(np.r_[True, np.diff(parent) > 0])

    def measure(self) -> float:
        return self.rule.measure()

    def nodal_values(self, alpha) -> np.ndarray:
        return self.nodal.expand(alpha)

    def moments(self, alpha, entropy: EntropyFamily) -> np.ndarray:
        """``<b eta*'(b^T alpha)>``."""
        p = self.nodal.expand(alpha)
        _check_domain(entropy, p)
        return self.nodal.moments(entropy.dual_prime(p))

    def terms(self, alpha, entropy: EntropyFamily, hessian: bool = True):
        """``<eta*>``, ``<b eta*'>`` and (optionally) the structured Hessian."""
        p = self.nodal.expand(alpha)
        _check_domain(entropy, p)
        d0 = entropy.dual(p)
        obj = float(np.sum(self.rule.weights * d0))
        if entropy is MB:
            d1 = d0
        else:
            d1 = entropy.dual_prime(p)
        grad = self.nodal.moments(d1)
        if not hessian:
            return obj, grad, None
        d2 = d0 if entropy is MB else entropy.dual_second(p)
        return obj, grad, self.hessian_from_nodal(d2)

    def hessian_from_nodal(self, d2) -> StructuredHessian:
        nb = self.nodal
        f = self.basis.family
        if nb.index is None or f is Family.HAT_SPHERE:
            return StructuredHessian("dense", nb.gram(d2), self.n)
        local = nb.local_gram(d2)
        if f is Family.HAT:
            i0 = nb.index[:, 0]
            ab = np.zeros((2, self.n))
            ab[1] = (np.bincount(i0, local[:, 0, 0], minlength=self.n)
                     + np.bincount(i0 + 1, local[:, 1, 1], minlength=self.n))
            ab[0, 1:] = np.bincount(i0, local[:, 0, 1], minlength=self.n)[:-1]
            return StructuredHessian("banded", ab, self.n)
        if self._starts is not None:
            blocks = np.add.reduceat(local, self._starts, axis=0)
        else:
            blocks = np.zeros((self.basis.num_elements,) + local.shape[1:])
            np.add.at(blocks, self.rule.parent, local)
        return StructuredHessian("blocks", blocks, self.n)


def _check_domain(entropy: EntropyFamily, p: np.ndarray, margin: float = 0.0) -> None:
    if entropy is BE:
        bad = p >= -margin
        if np.any(bad):
            idx = np.unravel_index(np.argmax(bad), p.shape)
            raise DomainViolation(f"b^T alpha = {p[idx]:.3e} >= 0 at quadrature node {tuple(int(i) for i in idx)}")


# ----- closed forms in slab geometry ----------------------------------------


def phi(k: int, x, threshold: float = TAYLOR_THRESHOLD, terms: int = TAYLOR_TERMS) -> np.ndarray:
    """``phi_k(x) = (e^x - sum_{i<k} x^i/i!) / x^k``, stable near zero.

    ``phi_k(x) = int_0^1 e^{x s} (1-s)^{k-1} / (k-1)! ds``.  A truncated
    Taylor series ``sum_i x^i/(i+k)!`` replaces the closed form for
    ``|x| < threshold``.
    """
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < threshold
    out = np.empty_like(x)
    xs = x[small]
    series = np.zeros_like(xs)
    for i in reversed(range(terms)):
        series = series * xs + 1.0 / math.factorial(i + k)
    out[small] = series
    xl = x[~small]
    with np.errstate(over="ignore", invalid="ignore"):
        num = np.expm1(xl) if k > 0 else np.exp(xl)
        for i in range(1, k):
            num = num - xl ** i / math.factorial(i)
        out[~small] = num / xl ** k
    return out


def _interval_integrals(a, b, threshold, second=False):
    """Integrals over the unit interval of ``e^{a(1-t)+bt}`` times 1-t, t (and quadratic weights).

    Each integral is anchored at the endpoint it is largest near, which
    keeps the exponentials from overflowing before the division.
    """
    x = b - a
    ea, eb = np.exp(a), np.exp(b)
    left = ea * phi(2, x, threshold)      # int (1-t) psi
    right = eb * phi(2, -x, threshold)    # int t psi
    if not second:
        return left, right
    ll = 2.0 * ea * phi(3, x, threshold)  # int (1-t)^2 psi
    rr = 2.0 * eb * phi(3, -x, threshold)  # int t^2 psi
    lr = left - ll                         # int t(1-t) psi
    return left, right, ll, lr, rr


def analytic_hat_moments(partition: geo.Partition1D, alpha, threshold: float = TAYLOR_THRESHOLD) -> MomentVector:
    """Maxwell-Boltzmann moments of the hat-function ansatz in closed form.

    On the interval ``[mu_j, mu_{j+1}]`` the ansatz is
    ``exp(alpha_j (1-t) + alpha_{j+1} t)``; node ``i`` collects
    ``h e^{alpha_i} phi_2(alpha_{i+-1} - alpha_i)`` from both adjacent
    intervals.  Differences below ``threshold`` use the Taylor series of
    ``phi_2``.
    """
    alpha = np.asarray(alpha, dtype=float)
    basis = AngularBasis.hat(partition)
    if alpha.shape != (dimension(basis),):
        raise ValueError("multiplier vector does not match the partition")
    h = partition.widths
    left, right = _interval_integrals(alpha[:-1], alpha[1:], threshold)
    u = np.zeros_like(alpha)
    u[:-1] += h * left
    u[1:] += h * right
    return MomentVector(u, basis)


def analytic_pm_moments_1d(partition: geo.Partition1D, alpha, threshold: float = TAYLOR_THRESHOLD) -> MomentVector:
    """Maxwell-Boltzmann partial moments ``(u_{0,j}, u_{1,j})`` in closed form.

    ``alpha`` is grouped as ``(alpha_{j,0}, alpha_{j,1})`` per interval.  The
    series branch is used when ``|alpha_{j,1} h_j|`` (the change of the
    exponent across the interval) is below ``threshold``.
    """
    alpha = np.asarray(alpha, dtype=float)
    basis = AngularBasis.partial(partition)
    if alpha.shape != (dimension(basis),):
        raise ValueError("multiplier vector does not match the partition")
    a0, a1 = alpha[0::2], alpha[1::2]
    mu = partition.nodes
    h = partition.widths
    left, right = _interval_integrals(a0 + a1 * mu[:-1], a0 + a1 * mu[1:], threshold)
    u0 = h * (left + right)
    u1 = h * (mu[:-1] * left + mu[1:] * right)
    return MomentVector(np.stack([u0, u1], axis=1).ravel(), basis)


class AnalyticIntegrator:
    """Closed-form Maxwell-Boltzmann integrals for the slab hat and partial-moment bases."""

    def __init__(self, basis: AngularBasis, threshold: float = TAYLOR_THRESHOLD):
        if basis.family not in (Family.HAT, Family.PARTIAL):
            raise ValueError("closed forms exist only for the slab hat and partial-moment bases")
        self.basis = basis
        self.threshold = threshold
        self.n = dimension(basis)
        self.rule = None

    def measure(self) -> float:
        return 2.0

    def _endpoints(self, alpha):
        if self.basis.family is Family.HAT:
            return alpha[:-1], alpha[1:]
        mu = self.basis.mesh.nodes
        a0, a1 = alpha[0::2], alpha[1::2]
        return a0 + a1 * mu[:-1], a0 + a1 * mu[1:]

    def moments(self, alpha, entropy: EntropyFamily) -> np.ndarray:
        if entropy is not MB:
            raise ValueError("closed forms are for the Maxwell-Boltzmann entropy")
        mesh = self.basis.mesh
        if self.basis.family is Family.HAT:
            return analytic_hat_moments(mesh, alpha, self.threshold).values
        return analytic_pm_moments_1d(mesh, alpha, self.threshold).values

    def terms(self, alpha, entropy: EntropyFamily, hessian: bool = True):
        if entropy is not MB:
            raise ValueError("closed forms are for the Maxwell-Boltzmann entropy")
        alpha = np.asarray(alpha, dtype=float)
        a, b = self._endpoints(alpha)
        h = self.basis.mesh.widths
        with np.errstate(over="ignore", invalid="ignore"):
            left, right, ll, lr, rr = _interval_integrals(a, b, self.threshold, second=True)
        n = self.n
        obj = float(np.sum(h * (left + right)))
        if self.basis.family is Family.HAT:
            grad = np.zeros(n)
            grad[:-1] += h * left
            grad[1:] += h * right
            if not hessian:
                return obj, grad, None
            ab = np.zeros((2, n))
            ab[1, :-1] += h * ll
            ab[1, 1:] += h * rr
            ab[0, 1:] = h * lr
            return obj, grad, StructuredHessian("banded", ab, n)
        mu = self.basis.mesh.nodes
        ml, mr = mu[:-1], mu[1:]
        grad = np.stack([h * (left + right), h * (ml * left + mr * right)], axis=1).ravel()
        if not hessian:
            return obj, grad, None
        g00 = h * (left + right)
        g01 = h * (ml * left + mr * right)
        g11 = h * (ml * ml * ll + 2.0 * ml * mr * lr + mr * mr * rr)
        blocks = np.stack([np.stack([g00, g01], -1), np.stack([g01, g11], -1)], -2)
        return obj, grad, StructuredHessian("blocks", blocks, n)


def make_integrator(basis: AngularBasis, rule: QuadratureRule | None = None,
                    analytic: bool = False, threshold: float = TAYLOR_THRESHOLD):
    if analytic:
        return AnalyticIntegrator(basis, threshold)
    return QuadratureIntegrator(basis, rule)


# ---------------------------------------------------------------------------
# dual problem
# ---------------------------------------------------------------------------


def _as_array(v) -> np.ndarray:
    return np.asarray(v.values if hasattr(v, "values") else v, dtype=float)


def dual_terms(basis: AngularBasis, entropy, integrator, u, alpha):
    """Objective, gradient and dense Hessian of the dual problem at ``alpha``.

    Raises
    ------
    DomainViolation
        Bose-Einstein multipliers with ``b^T alpha >= 0`` at some node.
    """
    entropy = EntropyFamily.parse(entropy)
    if integrator is None:
        integrator = QuadratureIntegrator(basis)
    u, alpha = _as_array(u), _as_array(alpha)
    obj, grad, hess = integrator.terms(alpha, entropy)
    return obj - float(u @ alpha), grad - u, hess.dense()


def forward_moments(basis: AngularBasis, alpha, entropy=MB, integrator=None) -> MomentVector:
    """Moments ``<b eta*'(b^T alpha)>`` of the ansatz with multipliers ``alpha``."""
    entropy = EntropyFamily.parse(entropy)
    if integrator is None:
        integrator = QuadratureIntegrator(basis)
    return MomentVector(integrator.moments(_as_array(alpha), entropy), basis)


def isotropic_multipliers(basis: AngularBasis, entropy, rho: float, measure: float) -> np.ndarray:
    """Multipliers of the constant density with total mass ``rho``."""
    return EntropyFamily.parse(entropy).inverse_prime(rho / measure) * basis.constant_coefficients()


def solve_dual(basis: AngularBasis, u, config: SolverConfig | None = None, *,
               entropy=None, integrator=None, rule: QuadratureRule | None = None,
               initial=None) -> ClosureResult:
    """Solve the dual problem for the moments ``u`` by damped Newton.

    The iteration stops once ``max|grad| <= tol * rho(u)``.  For
    Maxwell-Boltzmann the problem is solved for ``u / rho(u)`` and the
    multipliers are shifted by ``log rho`` along the constant direction
    afterwards.  The start is the isotropic density of the same mass unless
    ``initial`` is given.

    Raises
    ------
    MaxIterations, DomainViolation, SingularHessian
    """
    config = SolverConfig() if config is None else config
    entropy = EntropyFamily.parse(config.entropy if entropy is None else entropy)
    if integrator is None:
        integrator = QuadratureIntegrator(basis, rule)
    u = _as_array(u)
    if u.shape != (dimension(basis),):
        raise ValueError(f"expected {dimension(basis)} moments, got {u.shape}")
    start = time.perf_counter()
    if entropy is QUADRATIC:
        alpha = linear_closure(basis, u, integrator=integrator).values
        achieved = integrator.moments(alpha, QUADRATIC)
        rho = basis.density(u)
        return ClosureResult(Multipliers(alpha, basis, QUADRATIC), MomentVector(achieved, basis),
                             float(np.max(np.abs(achieved - u)) / abs(rho)), 0,
                             time.perf_counter() - start)

    rho = basis.density(u)
    if not rho > 0 or not np.all(np.isfinite(u)):
        raise DomainViolation(f"moment vector with non-positive density rho = {rho}")
    const = basis.constant_coefficients()
    scale = rho if entropy is MB else 1.0
    target = u / scale
    if initial is not None:
        alpha = _as_array(initial).copy()
        if entropy is MB:
            alpha -= math.log(rho) * const
    else:
        alpha = isotropic_multipliers(basis, entropy, rho / scale, integrator.measure())
    tol = config.tol * rho / scale
    margin = config.be_margin

    def evaluate_terms(a, hessian=True):
        obj, grad, hess = integrator.terms(a, entropy, hessian)
        return obj - float(target @ a), grad - target, hess

    obj, grad, hess = evaluate_terms(alpha)
    if entropy is BE:
        _check_domain(entropy, integrator.nodal_values(alpha), margin)
    history = [obj]
    iterations = 0
    while True:
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= tol:
            break
        if iterations >= config.max_iter:
            raise MaxIterations(f"gradient {gnorm * scale:.3e} after {iterations} iterations "
                                f"(tolerance {tol * scale:.3e})")
        direction = -hess.solve(grad, config.regularization)
        slope = float(grad @ direction)
        if not slope < 0:
            raise SingularHessian("Newton direction is not a descent direction")
        step = 1.0
        while True:
            trial = alpha + step * direction
            feasible = True
            if entropy is BE and np.max(integrator.nodal_values(trial)) >= -margin:
                feasible = False
            if feasible:
                with np.errstate(over="ignore", invalid="ignore"):
                    t_obj, t_grad, _ = evaluate_terms(trial, hessian=False)
                if np.isfinite(t_obj):
                    if t_obj <= obj + config.armijo * step * slope:
                        break
                    # At the level of rounding noise Armijo cannot be decided;
                    # accept a full step that reduces the gradient.
                    noise = 64 * np.finfo(float).eps * (abs(obj) + abs(float(target @ alpha)) + 1.0)
                    if step == 1.0 and t_obj <= obj + noise and np.all(np.isfinite(t_grad)) \
                            and np.max(np.abs(t_grad)) < gnorm:
                        break
            step *= config.step_factor
            if step < config.min_step:
                raise MaxIterations(f"line search stalled at gradient {gnorm * scale:.3e} "
                                    f"after {iterations} iterations")
        alpha = trial
        iterations += 1
        obj, grad, hess = evaluate_terms(alpha)
        history.append(obj)

    if entropy is MB:
        alpha = alpha + math.log(rho) * const
    achieved = integrator.moments(alpha, entropy)
    residual = float(np.max(np.abs(achieved - u)) / rho)
    return ClosureResult(Multipliers(alpha, basis, entropy), MomentVector(achieved, basis),
                         residual, iterations, time.perf_counter() - start, tuple(history))


def evaluate_ansatz(basis: AngularBasis, entropy, alpha, point, element=None):
    """Ansatz ``eta*'(b^T alpha)`` at one or several directions."""
    entropy = EntropyFamily.parse(entropy)
    b = evaluate(basis, point, element)
    p = b @ _as_array(alpha)
    _check_domain(entropy, np.atleast_1d(p))
    out = entropy.dual_prime(p)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# linear closure
# ---------------------------------------------------------------------------


def mass_matrix(basis: AngularBasis, rule: QuadratureRule | None = None, *, integrator=None) -> np.ndarray:
    """``M_ij = <b_i b_j>``."""
    if integrator is None or not isinstance(integrator, QuadratureIntegrator):
        integrator = QuadratureIntegrator(basis, rule)
    return integrator.hessian_from_nodal(np.ones(integrator.rule.weights.shape)).dense()


def linear_closure(basis: AngularBasis, u, rule: QuadratureRule | None = None, *,
                   integrator=None) -> Multipliers:
    """Multipliers ``alpha = M^{-1} u`` of the quadratic-entropy ansatz ``psi = b^T alpha``.

    Raises
    ------
    SingularMassMatrix
        If the mass matrix cannot be factorised (degenerate mesh).
    """
    if integrator is None or not isinstance(integrator, QuadratureIntegrator):
        integrator = QuadratureIntegrator(basis, rule)
    hess = integrator.hessian_from_nodal(np.ones(integrator.rule.weights.shape))
    try:
        alpha = hess.solve(_as_array(u), regularization=0.0)
    except SingularHessian as exc:
        raise SingularMassMatrix(str(exc)) from None
    return Multipliers(alpha, basis, QUADRATIC)
