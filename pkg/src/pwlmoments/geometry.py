"""Angular meshes: interval partitions of [-1, 1] and spherical triangulations.

The spherical meshes are built from the eight octants of the unit sphere and
refined dyadically: every triangle is split into four by the radially
projected midpoints of its edges.  Children of triangle ``t`` are stored at
indices ``4*t .. 4*t + 3``, so the ancestor of a triangle at a coarser level
is found by integer division.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

#: slack used by the non-strict membership tests
HULL_TOL = 1e-12
#: tolerance on ``|Omega| - 1`` for points accepted as lying on the sphere
SPHERE_TOL = 1e-12


class GeometryError(ValueError):
    """Raised for invalid meshes or points off the angular domain."""


# ---------------------------------------------------------------------------
# slab geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Partition1D:
    """Partition ``-1 = mu_0 < mu_1 < ... < mu_k = 1`` of the slab domain."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise GeometryError("a partition needs at least two nodes")
        if nodes[0] != -1.0 or nodes[-1] != 1.0:
            raise GeometryError("partition must start at -1 and end at 1")
        if np.any(np.diff(nodes) <= 0):
            raise GeometryError("partition nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def num_intervals(self) -> int:
        return self.nodes.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    def interval(self, j: int) -> tuple[float, float]:
        return float(self.nodes[j]), float(self.nodes[j + 1])

    def __eq__(self, other):
        return isinstance(other, Partition1D) and np.array_equal(self.nodes, other.nodes)

    def __hash__(self):
        return hash(self.nodes.tobytes())

    def __repr__(self):
        return f"Partition1D(k={self.num_intervals})"


def equidistant_partition(k: int) -> Partition1D:
    """Equidistant partition of [-1, 1] into ``k`` intervals."""
    if int(k) != k or k < 1:
        raise GeometryError(f"number of intervals must be a positive integer, got {k!r}")
    k = int(k)
    nodes = -1.0 + 2.0 * np.arange(k + 1) / k
    # exact endpoints (and exact midpoint for even k)
    nodes[0], nodes[-1] = -1.0, 1.0
    if k % 2 == 0:
        nodes[k // 2] = 0.0
    return Partition1D(nodes)


# ---------------------------------------------------------------------------
# three dimensions
# ---------------------------------------------------------------------------


def project_to_sphere(x) -> np.ndarray:
    """Radial projection ``x / |x|`` onto the unit sphere (rowwise for 2d input)."""
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise GeometryError("cannot project the zero vector onto the sphere")
    return x / norm


def spherical_triangle_area(a, b, c) -> np.ndarray:
    """Area of the spherical triangle(s) with unit vertices ``a, b, c``.

    Uses the Van Oosterom-Strackee solid angle formula, vectorised over a
    leading axis.
    """
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    triple = np.einsum("...i,...i->...", a, np.cross(b, c))
    denom = 1.0 + np.einsum("...i,...i->...", a, b) + np.einsum(
        "...i,...i->...", b, c) + np.einsum("...i,...i->...", c, a)
    return 2.0 * np.arctan2(np.abs(triple), denom)


@dataclass(frozen=True, eq=False)
class SphericalTriangle:
    """Spherical triangle with unit vertices ``a, b, c`` (counterclockwise seen from outside)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "c"):
            v = np.array(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise GeometryError("triangle vertices must be 3-vectors")
            if abs(np.linalg.norm(v) - 1.0) > 1e-14:
                raise GeometryError(f"vertex {name} is not a unit vector")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if abs(np.dot(self.a, np.cross(self.b, self.c))) < 1e-15:
            raise GeometryError("degenerate spherical triangle")

    @property
    def vertices(self) -> np.ndarray:
        return np.stack([self.a, self.b, self.c])

    @property
    def normal(self) -> np.ndarray:
        """Unit normal of the flat triangle, pointing away from the origin."""
        n = np.cross(self.b - self.a, self.c - self.a)
        n /= np.linalg.norm(n)
        if np.dot(n, self.a) < 0:
            n = -n
        return n

    @property
    def area(self) -> float:
        return float(spherical_triangle_area(self.a, self.b, self.c))

    @property
    def flat_area(self) -> float:
        return 0.5 * float(np.linalg.norm(np.cross(self.b - self.a, self.c - self.a)))

    def contains(self, omega, tol: float = HULL_TOL, strict: bool = False) -> np.ndarray:
        """Whether the direction(s) ``omega`` lie in the closed (or open) triangle."""
        return _cone_test(self.vertices[None], np.atleast_2d(omega), tol, strict)[:, 0]


def _edge_normals(verts: np.ndarray) -> np.ndarray:
    """Inward edge normals of the cones over triangles, shape (T, 3, 3).

    Row ``i`` is the normal of the plane through the origin and the edge
    opposite vertex ``i``, oriented so that vertex ``i`` is on its positive side.
    """
    a, b, c = verts[:, 0], verts[:, 1], verts[:, 2]
    normals = np.stack([np.cross(b, c), np.cross(c, a), np.cross(a, b)], axis=1)
    sign = np.sign(np.einsum("ti,ti->t", a, normals[:, 0]))
    return normals * sign[:, None, None]


def _cone_test(verts: np.ndarray, points: np.ndarray, tol: float, strict: bool) -> np.ndarray:
    """Boolean matrix (P, T): point ``p`` lies in the cone over triangle ``t``."""
    normals = _edge_normals(verts)
    scale = np.linalg.norm(normals, axis=-1)
    d = np.einsum("pi,tki->ptk", points, normals) / scale[None]
    if strict:
        inside = np.all(d > tol, axis=-1)
    else:
        inside = np.all(d >= -tol, axis=-1)
    # exclude the antipodal cone
    centroid = verts.sum(axis=1)
    return inside & (points @ centroid.T > 0)


def spherical_barycentric(tri: SphericalTriangle, omega, tol: float = HULL_TOL) -> np.ndarray:
    """Barycentric coordinates of direction(s) ``omega`` in ``tri``.

    The coordinates are the planar barycentric coordinates of the point where
    the ray through ``omega`` meets the flat triangle.  They form a partition
    of unity, have the Lagrange property at the vertices and are non-negative
    on the closed spherical triangle.

    Raises
    ------
    GeometryError
        If any ``omega`` lies outside the closed spherical triangle.
    """
    omega = np.asarray(omega, dtype=float)
    single = omega.ndim == 1
    pts = np.atleast_2d(omega)
    if not np.all(tri.contains(pts, tol=tol)):
        raise GeometryError("direction lies outside the spherical triangle")
    lam = _barycentric_many(tri.vertices[None].repeat(len(pts), 0), pts)
    return lam[0] if single else lam


def _barycentric_many(verts: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Ray-plane barycentric coordinates of ``points[i]`` in triangle ``verts[i]``.

    Solving ``[a b c] @ w = omega`` and normalising ``w`` gives the planar
    barycentric coordinates of the ray/plane intersection.
    """
    mats = np.transpose(verts, (0, 2, 1))
    w = np.linalg.solve(mats, points[..., None])[..., 0]
    lam = w / w.sum(axis=1, keepdims=True)
    # vertex coordinates are exact (Lagrange property)
    lam[np.abs(lam) < 1e-15] = 0.0
    return lam


@dataclass(frozen=True, eq=False)
class SphericalTriangulation:
    """Conforming triangulation of the unit sphere."""

    vertices: np.ndarray
    triangles: np.ndarray
    level: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float)
        tris = np.array(self.triangles, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3 or tris.ndim != 2 or tris.shape[1] != 3:
            raise GeometryError("vertices must be (N, 3) and triangles (M, 3)")
        if np.any(np.abs(np.linalg.norm(verts, axis=1) - 1.0) > 1e-13):
            raise GeometryError("triangulation vertices must lie on the unit sphere")
        verts.setflags(write=False)
        tris.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def triangle_vertices(self) -> np.ndarray:
        """Vertex coordinates per triangle, shape (M, 3, 3)."""
        return self.vertices[self.triangles]

    def triangle(self, t: int) -> SphericalTriangle:
        a, b, c = self.triangle_vertices[t]
        return SphericalTriangle(a, b, c)

    def areas(self) -> np.ndarray:
        tv = self.triangle_vertices
        return spherical_triangle_area(tv[:, 0], tv[:, 1], tv[:, 2])

    def normals(self) -> np.ndarray:
        """Outward unit normals of the flat triangles, shape (M, 3)."""
        if "normals" not in self._cache:
            tv = self.triangle_vertices
            n = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
            n /= np.linalg.norm(n, axis=1, keepdims=True)
            n *= np.sign(np.einsum("ti,ti->t", n, tv[:, 0]))[:, None]
            self._cache["normals"] = n
        return self._cache["normals"]

    def barycentric(self, omega, triangles) -> np.ndarray:
        """Barycentric coordinates of ``omega[i]`` w.r.t. triangle ``triangles[i]``."""
        omega = np.atleast_2d(np.asarray(omega, dtype=float))
        triangles = np.broadcast_to(np.asarray(triangles), (len(omega),))
        return _barycentric_many(self.triangle_vertices[triangles], omega)

    def __eq__(self, other):
        return (isinstance(other, SphericalTriangulation)
                and np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.triangles, other.triangles))

    def __hash__(self):
        return hash((self.vertices.tobytes(), self.triangles.tobytes()))

    def __repr__(self):
        return (f"SphericalTriangulation(level={self.level}, vertices={self.num_vertices}, "
                f"triangles={self.num_triangles})")

    # serialization -----------------------------------------------------------

    def write(self, stream: TextIO) -> None:
        """Write the plain-text mesh format.

        Header ``vertices N triangles M level r``, then N lines ``x y z`` and
        M lines of 0-based vertex indices.
        """
        stream.write(f"vertices {self.num_vertices} triangles {self.num_triangles} "
                     f"level {self.level}\n")
        for x, y, z in self.vertices:
            stream.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
        for ia, ib, ic in self.triangles:
            stream.write(f"{ia} {ib} {ic}\n")

    @classmethod
    def read(cls, stream: TextIO) -> "SphericalTriangulation":
        header = stream.readline().split()
        if len(header) != 6 or header[0::2] != ["vertices", "triangles", "level"]:
            raise GeometryError(f"bad mesh header: {' '.join(header)!r}")
        nv, nt, level = int(header[1]), int(header[3]), int(header[5])
        lines = [stream.readline() for _ in range(nv + nt)]
        verts = np.array([[float(s) for s in ln.split()] for ln in lines[:nv]])
        tris = np.array([[int(s) for s in ln.split()] for ln in lines[nv:]], dtype=np.int64)
        return cls(verts.reshape(nv, 3), tris.reshape(nt, 3), level)


def octant_triangulation() -> SphericalTriangulation:
    """The eight octants of the sphere (refinement level 0)."""
    vertices = np.array([
        [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0],
    ])
    triangles = []
    # octant order: upper hemisphere first, counterclockwise in azimuth
    for top in (4, 5):
        for i in range(4):
            j = (i + 1) % 4
            tri = [i, j, top]
            a, b, c = vertices[tri]
            if np.dot(a, np.cross(b, c)) < 0:
                tri = [j, i, top]
            triangles.append(tri)
    return SphericalTriangulation(vertices, np.array(triangles), level=0)


def dyadic_refine(t: SphericalTriangulation) -> SphericalTriangulation:
    """Split every triangle into four using projected edge midpoints.

    Midpoints are deduplicated by their sorted edge index pair, so shared
    edges produce a single new vertex.
    """
    vertices = list(t.vertices)
    midpoint: dict[tuple[int, int], int] = {}

    def mid(i: int, j: int) -> int:
        key = (i, j) if i < j else (j, i)
        idx = midpoint.get(key)
        if idx is None:
            idx = len(vertices)
            vertices.append(project_to_sphere(t.vertices[i] + t.vertices[j]))
            midpoint[key] = idx
        return idx

    children = []
    for a, b, c in t.triangles:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        children.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
    return SphericalTriangulation(np.array(vertices), np.array(children), t.level + 1)


def sphere_triangulation(level: int) -> SphericalTriangulation:
    """Octant triangulation refined ``level`` times."""
    if level < 0:
        raise GeometryError("refinement level must be non-negative")
    tri = octant_triangulation()
    for _ in range(level):
        tri = dyadic_refine(tri)
    return tri


# ---------------------------------------------------------------------------
# point location and hulls
# ---------------------------------------------------------------------------


def locate(domain, point) -> np.ndarray | int:
    """Index of the closed element containing ``point``.

    Points on shared boundaries go to the lowest-index containing element.
    Accepts a single point or an array of points (a 1D array of direction
    cosines for partitions, an (N, 3) array for triangulations).
    """
    if isinstance(domain, Partition1D):
        mu = np.asarray(point, dtype=float)
        if np.any(np.abs(mu) > 1.0 + 1e-12) or np.any(~np.isfinite(mu)):
            raise GeometryError("direction cosine outside [-1, 1]")
        idx = np.searchsorted(domain.nodes, mu, side="left") - 1
        idx = np.clip(idx, 0, domain.num_intervals - 1)
        return int(idx) if idx.ndim == 0 else idx
    if isinstance(domain, SphericalTriangulation):
        pts = np.asarray(point, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if np.any(np.abs(np.linalg.norm(pts, axis=1) - 1.0) > SPHERE_TOL):
            raise GeometryError("direction is not a unit vector")
        out = np.empty(len(pts), dtype=np.int64)
        verts = domain.triangle_vertices
        for start in range(0, len(pts), 256):
            chunk = pts[start:start + 256]
            inside = _cone_test(verts, chunk, HULL_TOL, strict=False)
            if not np.all(inside.any(axis=1)):
                raise GeometryError("direction not covered by the triangulation")
            out[start:start + 256] = np.argmax(inside, axis=1)
        return int(out[0]) if single else out
    raise TypeError(f"cannot locate points in {type(domain).__name__}")


def in_spherical_hull(tri: SphericalTriangle, p, strict: bool = False,
                      tol: float = HULL_TOL) -> bool:
    """Whether ``p`` lies in the convex hull of the spherical triangle.

    The hull is the part of the cone over the triangle that lies between the
    flat triangle and the unit sphere.
    """
    p = np.asarray(p, dtype=float)
    norm = np.linalg.norm(p)
    if norm == 0.0:
        return False
    n = tri.normal
    height = float(np.dot(n, tri.a))
    if strict:
        return bool(tri.contains(p / norm, tol=tol, strict=True)[0]
                    and norm < 1.0 - tol and np.dot(n, p) > height + tol)
    return bool(tri.contains(p / norm, tol=tol)[0]
                and norm <= 1.0 + tol and np.dot(n, p) >= height - tol)


def iter_levels(max_level: int) -> Iterable[SphericalTriangulation]:
    """Yield the octant triangulation and its refinements up to ``max_level``."""
    tri = octant_triangulation()
    yield tri
    for _ in range(max_level):
        tri = dyadic_refine(tri)
        yield tri
