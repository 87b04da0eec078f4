"""Composite Gauss-Lobatto rules in slab geometry and radially mapped rules on
spherical triangles.

A :class:`QuadratureRule` stores its nodes element by element with a fixed
number of nodes per element.  Every element remembers the element of the
*model* mesh it belongs to (``parent``), so piecewise bases can be evaluated
with the one-sided continuous extension of the element that owns the node.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import roots_jacobi, roots_legendre

from .geometry import (GeometryError, Partition1D, SphericalTriangle,
                       SphericalTriangulation, project_to_sphere, sphere_triangulation,
                       spherical_triangle_area)

#: intervals shorter than this are rejected
MIN_INTERVAL = 1e-14


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Element-wise quadrature.

    Attributes
    ----------
    nodes : ndarray
        ``(E, q)`` direction cosines or ``(E, q, 3)`` unit vectors.
    weights : ndarray
        ``(E, q)`` positive weights.
    parent : ndarray
        ``(E,)`` index of the model-mesh element each quadrature element lies in.
    """

    nodes: np.ndarray
    weights: np.ndarray
    parent: np.ndarray

    def __post_init__(self):
        for name in ("nodes", "weights", "parent"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")

    @property
    def dim(self) -> int:
        return 1 if self.nodes.ndim == 2 else 3

    @property
    def num_elements(self) -> int:
        return self.weights.shape[0]

    @property
    def points_per_element(self) -> int:
        return self.weights.shape[1]

    @property
    def size(self) -> int:
        return self.weights.size

    def flat_nodes(self) -> np.ndarray:
        return self.nodes.reshape(self.size, -1) if self.dim == 3 else self.nodes.ravel()

    def flat_parent(self) -> np.ndarray:
        """Model element of every node, flattened in node order."""
        return np.repeat(self.parent, self.points_per_element)

    def measure(self) -> float:
        return float(self.weights.sum())


# ---------------------------------------------------------------------------
# slab geometry
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _gauss_lobatto(points: int) -> tuple[np.ndarray, np.ndarray]:
    n = points - 1
    if points == 2:
        x = np.array([-1.0, 1.0])
    else:
        # interior nodes are the roots of P_n'; polish with Newton
        dcoef = npleg.legder(np.eye(n + 1)[n])
        inner = np.sort(npleg.legroots(dcoef).real)
        d2coef = npleg.legder(dcoef)
        for _ in range(3):
            inner = inner - npleg.legval(inner, dcoef) / npleg.legval(inner, d2coef)
        inner = 0.5 * (inner - inner[::-1])
        x = np.concatenate([[-1.0], inner, [1.0]])
    pn = npleg.legval(x, np.eye(n + 1)[n])
    w = 2.0 / (n * (n + 1) * pn ** 2)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_lobatto(points: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Lobatto nodes and weights on [-1, 1].

    The rule includes both endpoints and integrates polynomials of degree
    ``2*points - 3`` exactly.
    """
    if int(points) != points or points < 2:
        raise ValueError(f"Gauss-Lobatto needs at least 2 points, got {points!r}")
    return _gauss_lobatto(int(points))


def composite_rule(partition: Partition1D, points_per_interval: int,
                   subdivisions: int | Sequence[int] = 1,
                   breakpoints: Sequence[float] = ()) -> QuadratureRule:
    """Affinely mapped Gauss-Lobatto rule on every interval of ``partition``.

    Each model interval may be split into ``subdivisions`` equal pieces and
    additionally at any ``breakpoints`` that fall inside it (used to put
    discontinuities of an integrand on element boundaries).  Every piece gets
    its own Lobatto rule, so interval endpoints are always nodes.
    """
    x, w = gauss_lobatto(points_per_interval)
    k = partition.num_intervals
    subs = np.broadcast_to(np.asarray(subdivisions, dtype=int), (k,))
    breaks = np.asarray(sorted(set(float(b) for b in breakpoints)), dtype=float)
    lefts, rights, parent = [], [], []
    for j in range(k):
        lo, hi = partition.interval(j)
        cuts = np.linspace(lo, hi, subs[j] + 1)
        for b in breaks[(breaks > lo) & (breaks < hi)]:
            # a subdivision point within rounding of the breakpoint is moved onto it
            near = np.argmin(np.abs(cuts - b))
            if abs(cuts[near] - b) <= 1e-12 * (hi - lo):
                if 0 < near < cuts.size - 1:
                    cuts[near] = b
            else:
                cuts = np.union1d(cuts, [b])
        lefts.append(cuts[:-1])
        rights.append(cuts[1:])
        parent.append(np.full(cuts.size - 1, j))
    lefts, rights = np.concatenate(lefts), np.concatenate(rights)
    if np.any(rights - lefts < MIN_INTERVAL):
        raise GeometryError("degenerate quadrature interval")
    half = 0.5 * (rights - lefts)[:, None]
    nodes = 0.5 * (lefts + rights)[:, None] + half * x[None, :]
    nodes[:, 0], nodes[:, -1] = lefts, rights
    return QuadratureRule(nodes, half * w[None, :], np.concatenate(parent))


def fine_rule_1d(partition: Partition1D, min_intervals: int = 200, points: int = 20,
                 breakpoints: Sequence[float] = ()) -> QuadratureRule:
    """Subdivide ``partition`` to at least ``min_intervals`` pieces, Lobatto rule on each."""
    k = partition.num_intervals
    subs = max(1, -(-min_intervals // k))
    return composite_rule(partition, points, subs, breakpoints)


# ---------------------------------------------------------------------------
# spherical triangles
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def triangle_reference_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Positive rule on the reference triangle ``{x, y >= 0, x + y <= 1}``.

    Conical (collapsed-coordinate) product of Gauss-Jacobi and Gauss-Legendre
    rules; exact for polynomials of total degree ``<= degree``.  Returns
    barycentric coordinates ``(q, 3)`` and weights summing to 1/2.
    """
    if degree < 1:
        raise ValueError("degree must be at least 1")
    m = (degree + 2) // 2
    tj, wj = roots_jacobi(m, 1.0, 0.0)
    tl, wl = roots_legendre(m)
    u = 0.5 * (1.0 + tj)
    v = 0.5 * (1.0 + tl)
    wu = 0.25 * wj
    wv = 0.5 * wl
    uu, vv = np.meshgrid(u, v, indexing="ij")
    x = uu.ravel()
    y = ((1.0 - uu) * vv).ravel()
    weights = np.outer(wu, wv).ravel()
    bary = np.stack([1.0 - x - y, x, y], axis=1)
    bary.setflags(write=False)
    weights.setflags(write=False)
    return bary, weights


def _map_to_sphere(verts: np.ndarray, bary: np.ndarray, wref: np.ndarray):
    """Radially project a flat-triangle rule onto spherical triangles.

    ``verts`` has shape (T, 3, 3).  The surface element picks up the factor
    ``(x . n) / |x|^3`` with ``n`` the unit normal of the flat triangle.
    """
    flat = np.einsum("qk,tki->tqi", bary, verts)
    cross = np.cross(verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0])
    twice_area = np.linalg.norm(cross, axis=1)
    normal = cross / twice_area[:, None]
    height = np.abs(np.einsum("ti,ti->t", normal, verts[:, 0]))
    r = np.linalg.norm(flat, axis=2)
    weights = wref[None, :] * twice_area[:, None] * height[:, None] / r ** 3
    # constants are integrated exactly
    exact = spherical_triangle_area(verts[:, 0], verts[:, 1], verts[:, 2])
    weights = weights * (exact / weights.sum(axis=1))[:, None]
    return flat / r[..., None], weights


def spherical_triangle_rule(tri: SphericalTriangle, degree: int = 18):
    """Nodes ``(q, 3)`` and weights ``(q,)`` on a single spherical triangle."""
    bary, wref = triangle_reference_rule(degree)
    nodes, weights = _map_to_sphere(tri.vertices[None], bary, wref)
    return nodes[0], weights[0]


def triangulation_rule(triangulation: SphericalTriangulation, degree: int = 18,
                       model_level: int | None = None) -> QuadratureRule:
    """Mapped rule on every triangle of ``triangulation``.

    ``model_level`` names the (coarser) refinement level of the model mesh the
    rule is used with; parents are then the ancestor triangles at that level.
    """
    bary, wref = triangle_reference_rule(degree)
    nodes, weights = _map_to_sphere(triangulation.triangle_vertices, bary, wref)
    parent = np.arange(triangulation.num_triangles)
    if model_level is not None:
        if model_level > triangulation.level:
            raise ValueError("model mesh is finer than the quadrature mesh")
        parent = parent // 4 ** (triangulation.level - model_level)
    return QuadratureRule(nodes, weights, parent)


def sphere_rule(level: int = 3, degree: int = 18, model_level: int | None = None) -> QuadratureRule:
    """Rule on the ``level``-times refined octant triangulation."""
    return triangulation_rule(sphere_triangulation(level), degree, model_level)


def product_sphere_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre in ``Omega_z`` times trapezoidal in azimuth.

    Exact for spherical polynomials of degree ``<= degree``; used as an
    independent reference integrator.
    """
    m = degree // 2 + 1
    z, wz = roots_legendre(m)
    nphi = degree + 1
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    s = np.sqrt(1.0 - z ** 2)
    nodes = np.stack([np.outer(s, np.cos(phi)), np.outer(s, np.sin(phi)),
                      np.outer(z, np.ones(nphi))], axis=-1).reshape(-1, 3)
    weights = np.outer(wz, np.full(nphi, 2.0 * np.pi / nphi)).ravel()
    return project_to_sphere(nodes), weights


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------


def integrate(rule: QuadratureRule, f: Callable | np.ndarray) -> np.ndarray:
    """Weighted sum of ``f`` over the rule, accumulated element by element.

    ``f`` is either a callable mapping the flattened node array to values of
    shape ``(size, ...)`` or an array of values already given at the nodes
    (flattened or shaped ``(E, q, ...)``).
    """
    if callable(f):
        pts = rule.flat_nodes()
        try:
            values = np.asarray(f(pts), dtype=float)
        except Exception as exc:  # noqa: BLE001 - re-raised with node context
            raise RuntimeError(f"integrand failed on the quadrature nodes: {exc}") from exc
    else:
        values = np.asarray(f, dtype=float)
    if values.shape[:2] != rule.weights.shape:
        values = values.reshape(rule.weights.shape + values.shape[1:])
    bad = ~np.isfinite(values)
    if np.any(bad):
        e, q = np.argwhere(bad)[0][:2]
        raise FloatingPointError(f"non-finite integrand at element {e}, node {q}")
    per_element = np.einsum("eq,eq...->e...", rule.weights, values)
    return per_element.sum(axis=0)
