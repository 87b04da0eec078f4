"""Angular bases in slab geometry and on the unit sphere.

Seven families are supported: monomials and Legendre polynomials on
[-1, 1], hat functions and first-order partial moments on an interval
partition, real spherical harmonics, barycentric hat functions and
first-order partial moments on a spherical triangulation.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import geometry as geo
from .geometry import Partition1D, SphericalTriangulation


class Family(str, Enum):
    MONOMIAL = "Monomial1D"
    LEGENDRE = "Legendre1D"
    HAT = "HatFunctions1D"
    PARTIAL = "PartialMoments1D"
    HARMONICS = "SphericalHarmonics"
    HAT_SPHERE = "HatFunctionsSphere"
    PARTIAL_SPHERE = "PartialMomentsSphere"


FULL_FAMILIES = (Family.MONOMIAL, Family.LEGENDRE, Family.HARMONICS)
HAT_FAMILIES = (Family.HAT, Family.HAT_SPHERE)
PARTIAL_FAMILIES = (Family.PARTIAL, Family.PARTIAL_SPHERE)


@dataclass(frozen=True)
class AngularBasis:
    """A basis family with its polynomial order or its angular mesh."""

    family: Family
    order: int | None = None
    mesh: Partition1D | SphericalTriangulation | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family in FULL_FAMILIES:
            if self.order is None or self.order < 0 or self.mesh is not None:
                raise ValueError(f"{self.family.value} needs a non-negative order and no mesh")
        else:
            want = Partition1D if self.dim == 1 else SphericalTriangulation
            if not isinstance(self.mesh, want) or self.order is not None:
                raise ValueError(f"{self.family.value} needs a {want.__name__} mesh")

    # constructors ----------------------------------------------------------

    @classmethod
    def monomial(cls, order: int):
        return cls(Family.MONOMIAL, order=order)

    @classmethod
    def legendre(cls, order: int):
        return cls(Family.LEGENDRE, order=order)

    @classmethod
    def hat(cls, partition: Partition1D | int):
        if isinstance(partition, int):
            partition = geo.equidistant_partition(partition)
        return cls(Family.HAT, mesh=partition)

    @classmethod
    def partial(cls, partition: Partition1D | int):
        if isinstance(partition, int):
            partition = geo.equidistant_partition(partition)
        return cls(Family.PARTIAL, mesh=partition)

    @classmethod
    def harmonics(cls, order: int):
        return cls(Family.HARMONICS, order=order)

    @classmethod
    def hat_sphere(cls, triangulation: SphericalTriangulation | int):
        if isinstance(triangulation, int):
            triangulation = geo.sphere_triangulation(triangulation)
        return cls(Family.HAT_SPHERE, mesh=triangulation)

    @classmethod
    def partial_sphere(cls, triangulation: SphericalTriangulation | int):
        if isinstance(triangulation, int):
            triangulation = geo.sphere_triangulation(triangulation)
        return cls(Family.PARTIAL_SPHERE, mesh=triangulation)

    # descriptors -----------------------------------------------------------

    @property
    def dim(self) -> int:
        return 1 if self.family in (Family.MONOMIAL, Family.LEGENDRE, Family.HAT,
                                    Family.PARTIAL) else 3

    @property
    def is_piecewise(self) -> bool:
        return self.family not in FULL_FAMILIES

    @property
    def num_elements(self) -> int:
        if self.family in (Family.HAT, Family.PARTIAL):
            return self.mesh.num_intervals
        if self.family in (Family.HAT_SPHERE, Family.PARTIAL_SPHERE):
            return self.mesh.num_triangles
        return 1

    @property
    def block_size(self) -> int:
        """Moments per element for partial-moment families."""
        return {Family.PARTIAL: 2, Family.PARTIAL_SPHERE: 4}[self.family]

    def dimension(self) -> int:
        return dimension(self)

    def __repr__(self):
        if self.mesh is None:
            return f"AngularBasis({self.family.value}, N={self.order})"
        return f"AngularBasis({self.family.value}, {self.mesh!r})"

    def constant_coefficients(self) -> np.ndarray:
        """Coefficients ``c`` with ``c . b(Omega) == 1`` for every direction."""
        n = dimension(self)
        c = np.zeros(n)
        if self.family in HAT_FAMILIES:
            c[:] = 1.0
        elif self.family in PARTIAL_FAMILIES:
            c[::self.block_size] = 1.0
        elif self.family is Family.HARMONICS:
            c[0] = math.sqrt(4.0 * math.pi)
        else:
            c[0] = 1.0
        return c

    def density(self, u) -> float:
        """Local particle density ``rho(u) = <psi>``."""
        return float(np.dot(self.constant_coefficients(), np.asarray(u, dtype=float)))


@dataclass(frozen=True, eq=False)
class MomentVector:
    """Moments ``u = <b psi>`` together with the basis they belong to."""

    values: np.ndarray
    basis: AngularBasis

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (dimension(self.basis),):
            raise ValueError(f"expected {dimension(self.basis)} moments, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def density(self) -> float:
        return self.basis.density(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return len(self.values)


def dimension(basis: AngularBasis) -> int:
    """Number of basis functions ``n``."""
    f = basis.family
    if f in (Family.MONOMIAL, Family.LEGENDRE):
        return basis.order + 1
    if f is Family.HARMONICS:
        return (basis.order + 1) ** 2
    if f is Family.HAT:
        return basis.mesh.num_intervals + 1
    if f is Family.PARTIAL:
        return 2 * basis.mesh.num_intervals
    if f is Family.HAT_SPHERE:
        return basis.mesh.num_vertices
    return 4 * basis.mesh.num_triangles


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def legendre_values(order: int, mu) -> np.ndarray:
    """Legendre polynomials ``P_0 .. P_order`` at ``mu`` (three-term recurrence)."""
    mu = np.asarray(mu, dtype=float)
    out = np.empty(mu.shape + (order + 1,))
    out[..., 0] = 1.0
    if order >= 1:
        out[..., 1] = mu
    for l in range(1, order):
        out[..., l + 1] = ((2 * l + 1) * mu * out[..., l] - l * out[..., l - 1]) / (l + 1)
    return out


def real_spherical_harmonics(order: int, omega) -> np.ndarray:
    """Orthonormal real spherical harmonics up to degree ``order``.

    Components are ordered degree-major, ``l = 0..order`` and ``m = -l..l``;
    no Condon-Shortley phase.  Negative ``m`` carries ``sin(|m| phi)``.
    """
    if order < 0:
        raise ValueError("order must be non-negative")
    omega = np.asarray(omega, dtype=float)
    single = omega.ndim == 1
    omega = np.atleast_2d(omega)
    x, y, z = omega[:, 0], omega[:, 1], omega[:, 2]
    sin_theta = np.sqrt(np.maximum(x * x + y * y, 0.0))
    phi = np.arctan2(y, x)
    npts = len(omega)

    # normalised associated Legendre functions, pbar[l][m]
    pbar = [[None] * (l + 1) for l in range(order + 1)]
    pbar[0][0] = np.full(npts, 1.0 / math.sqrt(4.0 * math.pi))
    for m in range(1, order + 1):
        pbar[m][m] = math.sqrt((2 * m + 1) / (2.0 * m)) * sin_theta * pbar[m - 1][m - 1]
    for m in range(order):
        pbar[m + 1][m] = math.sqrt(2 * m + 3) * z * pbar[m][m]
    for m in range(order + 1):
        for l in range(m + 2, order + 1):
            a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            pbar[l][m] = a * (z * pbar[l - 1][m] - b * pbar[l - 2][m])

    out = np.empty((npts, (order + 1) ** 2))
    for l in range(order + 1):
        base = l * l + l
        out[:, base] = pbar[l][0]
        for m in range(1, l + 1):
            out[:, base + m] = math.sqrt(2.0) * pbar[l][m] * np.cos(m * phi)
            out[:, base - m] = math.sqrt(2.0) * pbar[l][m] * np.sin(m * phi)
    return out[0] if single else out


def mixed_moments_1d(mu) -> np.ndarray:
    """First-order mixed moments ``(1, mu 1_[0,1], mu 1_[-1,0])``."""
    mu = np.asarray(mu, dtype=float)
    return np.stack([np.ones_like(mu), np.where(mu >= 0, mu, 0.0),
                     np.where(mu <= 0, mu, 0.0)], axis=-1)


def evaluate(basis: AngularBasis, point, element=None) -> np.ndarray:
    """Basis values at one point or an array of points.

    For piecewise families ``element`` selects the mesh element whose
    (continuous extension of the) local basis is used; by default the
    element returned by :func:`pwlmoments.geometry.locate`.

    Returns an array of shape ``(n,)`` for a single point, else ``(P, n)``.
    """
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == (0 if basis.dim == 1 else 1)
    if basis.dim == 1:
        pts = np.atleast_1d(pts)
        if np.any(np.abs(pts) > 1.0 + 1e-12) or not np.all(np.isfinite(pts)):
            raise geo.GeometryError("direction cosine outside [-1, 1]")
    else:
        pts = np.atleast_2d(pts)
        if np.any(np.abs(np.linalg.norm(pts, axis=1) - 1.0) > geo.SPHERE_TOL):
            raise geo.GeometryError("direction is not a unit vector")

    f = basis.family
    n = dimension(basis)
    if f is Family.MONOMIAL:
        out = pts[:, None] ** np.arange(n)[None, :]
    elif f is Family.LEGENDRE:
        out = legendre_values(basis.order, pts)
    elif f is Family.HARMONICS:
        out = real_spherical_harmonics(basis.order, pts)
    else:
        if element is None:
            element = geo.locate(basis.mesh, pts)
        element = np.broadcast_to(np.asarray(element, dtype=np.int64), (len(pts),))
        values, index = _local_values(basis, pts, element)
        out = np.zeros((len(pts), n))
        np.put_along_axis(out, index, values, axis=1)
    return out[0] if single else out


def _local_values(basis: AngularBasis, pts: np.ndarray, element: np.ndarray):
    """Non-zero basis values ``(P, m)`` and their global indices ``(P, m)``.

    ``pts[i]`` is evaluated with the local basis of ``element[i]`` (continuous
    extension to the closed element).
    """
    f = basis.family
    if f is Family.HAT:
        nodes = basis.mesh.nodes
        t = (pts - nodes[element]) / (nodes[element + 1] - nodes[element])
        return np.stack([1.0 - t, t], axis=-1), np.stack([element, element + 1], axis=-1)
    if f is Family.PARTIAL:
        return (np.stack([np.ones_like(pts), pts], axis=-1),
                np.stack([2 * element, 2 * element + 1], axis=-1))
    if f is Family.HAT_SPHERE:
        lam = basis.mesh.barycentric(pts, element)
        return lam, basis.mesh.triangles[element]
    if f is Family.PARTIAL_SPHERE:
        values = np.concatenate([np.ones((len(pts), 1)), pts], axis=1)
        return values, 4 * element[:, None] + np.arange(4)[None, :]
    raise ValueError(f"{f.value} is not a piecewise family")


# ---------------------------------------------------------------------------
# nodal evaluation on a quadrature rule
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NodalBasis:
    """Basis values at the nodes of a quadrature rule.

    ``values`` has shape ``(E, q, m)``.  For full-moment families ``m == n``
    and ``index`` is None; for piecewise families ``index`` (shape ``(E, m)``)
    holds the global indices of the ``m`` functions that are non-zero on the
    element.
    """

    basis: AngularBasis
    weights: np.ndarray
    values: np.ndarray
    index: np.ndarray | None
    parent: np.ndarray

    @property
    def n(self) -> int:
        return dimension(self.basis)

    def expand(self, coefficients) -> np.ndarray:
        """``b^T alpha`` at every node, shape ``(E, q)``."""
        a = np.asarray(coefficients, dtype=float)
        if self.index is None:
            return self.values @ a
        return np.einsum("eqm,em->eq", self.values, a[self.index])

    def moments(self, g) -> np.ndarray:
        """``sum w b g`` for nodal values ``g`` of shape ``(E, q)``."""
        wg = self.weights * g
        if self.index is None:
            return np.einsum("eq,eqm->m", wg, self.values)
        local = np.einsum("eq,eqm->em", wg, self.values)
        return np.bincount(self.index.ravel(), local.ravel(), minlength=self.n)

    def local_gram(self, h) -> np.ndarray:
        """Per-element ``sum w h b b^T``, shape ``(E, m, m)``."""
        v = self.values
        return np.einsum("eqi,eqj->eij", v * (self.weights * h)[..., None], v)

    def gram(self, h) -> np.ndarray:
        """Dense ``sum w h b b^T``."""
        if self.index is None:
            flat = self.values.reshape(-1, self.n)
            return flat.T @ (flat * (self.weights * h).reshape(-1, 1))
        local = self.local_gram(h)
        flat_idx = (self.index[:, :, None] * self.n + self.index[:, None, :]).ravel()
        out = np.bincount(flat_idx, local.ravel(), minlength=self.n * self.n)
        return out.reshape(self.n, self.n)


def nodal_basis(basis: AngularBasis, rule) -> NodalBasis:
    """Evaluate ``basis`` at the nodes of ``rule``, element-aware."""
    if basis.dim != rule.dim:
        raise ValueError("basis and quadrature live in different geometries")
    if basis.is_piecewise:
        if rule.parent.max(initial=0) >= basis.num_elements:
            raise ValueError("quadrature parents do not match the basis mesh")
        e, q = rule.weights.shape
        pts = rule.flat_nodes()
        element = rule.flat_parent()
        values, index = _local_values(basis, pts, element)
        m = values.shape[-1]
        return NodalBasis(basis, rule.weights, values.reshape(e, q, m),
                          index.reshape(e, q, m)[:, 0, :].copy(), rule.parent)
    pts = rule.flat_nodes()
    values = evaluate(basis, pts)
    e, q = rule.weights.shape
    return NodalBasis(basis, rule.weights, values.reshape(e, q, -1), None, rule.parent)


# ---------------------------------------------------------------------------
# integrals of the basis
# ---------------------------------------------------------------------------


def _arc_moment(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``int Omega dOmega`` over spherical triangles with ccw vertices.

    Half the sum over edges of (arc length) x (unit normal of the edge plane).
    """
    total = np.zeros_like(a)
    for p, q in ((a, b), (b, c), (c, a)):
        cr = np.cross(p, q)
        norm = np.linalg.norm(cr, axis=-1, keepdims=True)
        theta = np.arctan2(norm, np.sum(p * q, axis=-1, keepdims=True))
        total += theta * cr / norm
    orient = np.sign(np.einsum("...i,...i->...", a, np.cross(b, c)))[..., None]
    return 0.5 * total * orient


def isotropic_moment(basis: AngularBasis, rule=None) -> MomentVector:
    """``u_iso = <b>``, in closed form where available.

    Barycentric hat functions on the sphere have no elementary integrals;
    they are integrated with ``rule`` (default: a degree-18 rule two levels
    finer than the mesh).
    """
    f = basis.family
    n = dimension(basis)
    if f is Family.MONOMIAL:
        i = np.arange(n)
        u = np.where(i % 2 == 0, 2.0 / (i + 1), 0.0)
    elif f is Family.LEGENDRE:
        u = np.zeros(n)
        u[0] = 2.0
    elif f is Family.HARMONICS:
        u = np.zeros(n)
        u[0] = math.sqrt(4.0 * math.pi)
    elif f is Family.HAT:
        h = basis.mesh.widths
        u = np.zeros(n)
        u[:-1] += 0.5 * h
        u[1:] += 0.5 * h
    elif f is Family.PARTIAL:
        x = basis.mesh.nodes
        u = np.stack([np.diff(x), 0.5 * np.diff(x ** 2)], axis=1).ravel()
    elif f is Family.PARTIAL_SPHERE:
        tv = basis.mesh.triangle_vertices
        area = geo.spherical_triangle_area(tv[:, 0], tv[:, 1], tv[:, 2])
        first = _arc_moment(tv[:, 0], tv[:, 1], tv[:, 2])
        u = np.concatenate([area[:, None], first], axis=1).ravel()
    else:
        from .quadrature import sphere_rule
        if rule is None:
            rule = sphere_rule(basis.mesh.level + 2, 18, model_level=basis.mesh.level)
        nb = nodal_basis(basis, rule)
        u = nb.moments(np.ones(rule.weights.shape))
    return MomentVector(u, basis)


def span_change_of_basis(source, target: AngularBasis, samples: int = 257) -> np.ndarray:
    """Matrix ``T`` with ``b_source(mu) = T b_target(mu)`` for all ``mu``.

    ``source`` is an :class:`AngularBasis` in slab geometry or the string
    ``"mixed1"`` for the first-order mixed moments.  The matrix is fitted at
    sample points (including all mesh nodes, evaluated from both sides) and
    verified to reproduce the source basis within 1e-12.

    Raises
    ------
    ValueError
        If the span of ``source`` is not contained in the span of ``target``.
    """
    if target.dim != 1:
        raise ValueError("change of basis is only supported in slab geometry")
    mu = np.linspace(-1.0, 1.0, samples)
    breaks = [0.0]
    for b in (source, target):
        if isinstance(b, AngularBasis) and b.is_piecewise:
            breaks.extend(b.mesh.nodes)
    eps = 1e-7
    mu = np.unique(np.clip(np.concatenate([mu, np.array(breaks) - eps,
                                           np.array(breaks) + eps]), -1.0, 1.0))

    def values(b):
        if isinstance(b, str):
            if b != "mixed1":
                raise ValueError(f"unknown basis {b!r}")
            return mixed_moments_1d(mu)
        if b.dim != 1:
            raise ValueError("change of basis is only supported in slab geometry")
        return evaluate(b, mu)

    src, tgt = values(source), values(target)
    t, *_ = np.linalg.lstsq(tgt, src, rcond=None)
    t = t.T
    if np.max(np.abs(tgt @ t.T - src)) > 1e-12:
        raise ValueError("source basis is not in the span of the target basis")
    t[np.abs(t) < 1e-13] = 0.0
    return t


# ---------------------------------------------------------------------------
# model names
# ---------------------------------------------------------------------------

_NAME = re.compile(r"^(M|P|HFM|HFP|PMM|PMP)_(\d+)$")


def model_name(basis: AngularBasis, linear: bool = False) -> str:
    """Canonical model name such as ``HFM_9`` or ``P_3``."""
    f = basis.family
    if f in FULL_FAMILIES:
        return f"{'P' if linear else 'M'}_{basis.order}"
    prefix = "HF" if f in HAT_FAMILIES else "PM"
    return f"{prefix}{'P' if linear else 'M'}_{dimension(basis)}"


def parse_model(name: str, dim: int = 1) -> tuple[AngularBasis, bool]:
    """Basis and linear-closure flag for a model name.

    Full-moment names carry the polynomial order (``M_2``), piecewise names
    the number of moments (``HFM_9`` is 8 equidistant intervals in slab
    geometry, ``PMM_32`` the octant triangulation on the sphere).
    """
    match = _NAME.match(name.strip())
    if not match:
        raise ValueError(f"unknown model name {name!r}")
    kind, num = match.group(1), int(match.group(2))
    linear = kind.endswith("P")
    if kind in ("M", "P"):
        basis = AngularBasis.legendre(num) if dim == 1 else AngularBasis.harmonics(num)
        return basis, linear
    if dim == 1:
        if kind.startswith("HF"):
            if num < 2:
                raise ValueError("hat-function models need n >= 2")
            return AngularBasis.hat(num - 1), linear
        if num < 2 or num % 2:
            raise ValueError("partial-moment models need an even n >= 2")
        return AngularBasis.partial(num // 2), linear
    for level in range(12):
        if kind.startswith("HF") and 4 ** (level + 1) + 2 == num:
            return AngularBasis.hat_sphere(level), linear
        if kind.startswith("PM") and 2 * 4 ** (level + 2) == num:
            return AngularBasis.partial_sphere(level), linear
    raise ValueError(f"{name!r} does not match a dyadic refinement of the octants")
