import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from pwlmoments import geometry as geo


def _lhuilier(a, b, c):
    """Spherical excess from the side lengths (independent of the solid-angle formula)."""
    sa = math.acos(np.clip(np.dot(b, c), -1, 1))
    sb = math.acos(np.clip(np.dot(c, a), -1, 1))
    sc = math.acos(np.clip(np.dot(a, b), -1, 1))
    s = 0.5 * (sa + sb + sc)
    t = math.tan(s / 2) * math.tan((s - sa) / 2) * math.tan((s - sb) / 2) * math.tan((s - sc) / 2)
    return 4.0 * math.atan(math.sqrt(max(t, 0.0)))


def _random_unit(rng, n):
    x = rng.normal(size=(n, 3))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


class TestPartition:

    @pytest.mark.parametrize("k, nodes", [
        (1, [-1, 1]),
        (2, [-1, 0, 1]),
        (4, [-1, -0.5, 0, 0.5, 1]),
    ])
    def test_equidistant_nodes(self, k, nodes):
        np.testing.assert_array_equal(geo.equidistant_partition(k).nodes, nodes)

    def test_rejects_zero_intervals(self):
        with pytest.raises(geo.GeometryError):
            geo.equidistant_partition(0)

    @pytest.mark.parametrize("nodes", [[-1, 0.5, 0.2, 1], [-0.9, 1], [-1, 0.99], [-1]])
    def test_rejects_bad_nodes(self, nodes):
        with pytest.raises(geo.GeometryError):
            geo.Partition1D(np.array(nodes, dtype=float))

    def test_nodes_are_read_only(self):
        p = geo.equidistant_partition(3)
        with pytest.raises(ValueError):
            p.nodes[1] = 0.0

    def test_intervals_tile_the_domain(self):
        p = geo.equidistant_partition(7)
        assert sum(hi - lo for lo, hi in (p.interval(j) for j in range(7))) == pytest.approx(2.0)


class TestTriangulation:

    def test_octants(self):
        t = geo.octant_triangulation()
        assert t.num_triangles == 8 == 2 * 4 ** 1
        assert t.num_vertices == 6 == 4 ** 1 + 2
        assert abs(t.areas().sum() - 4 * np.pi) <= 1e-12
        np.testing.assert_allclose(t.areas(), np.pi / 2, rtol=0, atol=1e-14)

    @pytest.mark.parametrize("r", [0, 1, 2, 3])
    def test_counts_and_area(self, r):
        t = geo.sphere_triangulation(r)
        assert t.level == r
        assert t.num_triangles == 2 * 4 ** (r + 1)
        assert t.num_vertices == 4 ** (r + 1) + 2
        assert abs(t.areas().sum() - 4 * np.pi) <= 1e-10

    def test_refine_counts(self):
        t1 = geo.dyadic_refine(geo.octant_triangulation())
        assert (t1.num_triangles, t1.num_vertices) == (32, 18)
        t2 = geo.dyadic_refine(t1)
        assert (t2.num_triangles, t2.num_vertices) == (128, 66)

    @pytest.mark.parametrize("r", [1, 2])
    def test_conforming(self, r):
        """Every edge is shared by exactly two triangles (closed, conforming surface)."""
        t = geo.sphere_triangulation(r)
        edges = {}
        for tri in t.triangles:
            for i in range(3):
                e = tuple(sorted((tri[i], tri[(i + 1) % 3])))
                edges[e] = edges.get(e, 0) + 1
        assert set(edges.values()) == {2}
        assert t.num_vertices - len(edges) + t.num_triangles == 2  # Euler characteristic

    def test_children_follow_parent(self):
        t0, t1 = geo.sphere_triangulation(0), geo.sphere_triangulation(1)
        for c in range(t1.num_triangles):
            centroid = geo.project_to_sphere(t1.triangle_vertices[c].sum(axis=0))
            assert t0.triangle(c // 4).contains(centroid)[0]

    def test_consistent_orientation(self):
        tv = geo.sphere_triangulation(2).triangle_vertices
        triple = np.einsum("ti,ti->t", tv[:, 0], np.cross(tv[:, 1], tv[:, 2]))
        assert np.all(triple > 0)

    def test_area_against_lhuilier(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a, b, c = _random_unit(rng, 3)
            assert geo.spherical_triangle_area(a, b, c) == pytest.approx(_lhuilier(a, b, c), abs=1e-10)

    def test_round_trip_file(self):
        t = geo.sphere_triangulation(2)
        buf = io.StringIO()
        t.write(buf)
        header = buf.getvalue().splitlines()[0]
        assert header == "vertices 66 triangles 128 level 2"
        buf.seek(0)
        back = geo.SphericalTriangulation.read(buf)
        assert back == t and back.level == 2

    def test_rejects_off_sphere_vertices(self):
        t = geo.octant_triangulation()
        with pytest.raises(geo.GeometryError):
            geo.SphericalTriangulation(t.vertices * 1.01, t.triangles)


class TestProjection:

    @pytest.mark.parametrize("x, expected", [
        ((2.0, 0.0, 0.0), (1.0, 0.0, 0.0)),
        ((1.0, 1.0, 1.0), tuple(np.ones(3) / np.sqrt(3))),
        ((0.6, 0.0, 0.8), (0.6, 0.0, 0.8)),
    ])
    def test_examples(self, x, expected):
        np.testing.assert_allclose(geo.project_to_sphere(x), expected, rtol=0, atol=1e-15)

    def test_zero_vector(self):
        with pytest.raises(geo.GeometryError):
            geo.project_to_sphere(np.zeros(3))


class TestBarycentric:

    tri = geo.octant_triangulation().triangle(0)

    def test_vertices_are_lagrange(self):
        for i, v in enumerate(self.tri.vertices):
            np.testing.assert_array_equal(geo.spherical_barycentric(self.tri, v), np.eye(3)[i])

    def test_centroid_of_octant(self):
        omega = geo.project_to_sphere(self.tri.vertices.mean(axis=0))
        np.testing.assert_allclose(geo.spherical_barycentric(self.tri, omega), [1 / 3] * 3,
                                   rtol=0, atol=1e-15)

    def test_outside_rejected(self):
        with pytest.raises(geo.GeometryError):
            geo.spherical_barycentric(self.tri, -self.tri.a)

    @settings(max_examples=200, deadline=None)
    @given(st.tuples(*[st.floats(0.01, 1.0)] * 3))
    def test_interior_partition_of_unity(self, w):
        omega = geo.project_to_sphere(np.asarray(w) @ self.tri.vertices)
        lam = geo.spherical_barycentric(self.tri, omega)
        assert abs(lam.sum() - 1.0) <= 1e-12
        assert np.all(lam > 0)

    def test_edge_values_agree_across_triangles(self):
        """Coordinates on a shared edge depend only on the two edge vertices."""
        t = geo.sphere_triangulation(1)
        rng = np.random.default_rng(2)
        owners = {}
        for ti, tri in enumerate(t.triangles):
            for i in range(3):
                owners.setdefault(tuple(sorted((tri[i], tri[(i + 1) % 3]))), []).append(ti)
        edges = list(owners.items())
        for _ in range(100):
            (va, vb), (t1, t2) = edges[rng.integers(len(edges))]
            s = rng.uniform()
            omega = geo.project_to_sphere(s * t.vertices[va] + (1 - s) * t.vertices[vb])
            lam = []
            for ti in (t1, t2):
                coords = t.barycentric(omega, ti)[0]
                lam.append({int(v): c for v, c in zip(t.triangles[ti], coords)})
            for v in (va, vb):
                assert lam[0][v] == pytest.approx(lam[1][v], abs=1e-10)
            assert all(abs(c) <= 1e-12 for v, c in lam[0].items() if v not in (va, vb))


class TestLocate:

    def test_interval_examples(self):
        p = geo.equidistant_partition(2)
        assert geo.locate(p, -0.5) == 0
        assert geo.locate(p, 0.0) == 0
        assert geo.locate(p, 1.0) == 1
        assert geo.locate(p, -1.0) == 0

    def test_interval_off_domain(self):
        with pytest.raises(geo.GeometryError):
            geo.locate(geo.equidistant_partition(2), 1.5)

    def test_positive_octant(self):
        t = geo.octant_triangulation()
        idx = geo.locate(t, np.ones(3) / np.sqrt(3))
        assert np.all(t.triangle_vertices[idx] >= 0)

    def test_off_sphere(self):
        with pytest.raises(geo.GeometryError):
            geo.locate(geo.octant_triangulation(), np.array([1.0, 0.1, 0.0]))

    def test_shared_vertex_goes_to_lowest_index(self):
        t = geo.sphere_triangulation(1)
        for v in range(t.num_vertices):
            containing = np.nonzero(np.any(t.triangles == v, axis=1))[0]
            assert geo.locate(t, t.vertices[v]) == containing.min()

    def test_membership_consistent(self):
        t = geo.sphere_triangulation(2)
        pts = _random_unit(np.random.default_rng(3), 500)
        idx = geo.locate(t, pts)
        for p, i in zip(pts, idx):
            assert t.triangle(i).contains(p)[0]
        p = geo.Partition1D(np.array([-1.0, -0.3, 0.1, 0.7, 1.0]))
        mu = np.random.default_rng(4).uniform(-1, 1, 500)
        j = geo.locate(p, mu)
        assert np.all((p.nodes[j] <= mu) & (mu <= p.nodes[j + 1]))


class TestHull:

    tri = geo.sphere_triangulation(1).triangle(5)

    def test_vertex(self):
        assert geo.in_spherical_hull(self.tri, self.tri.a)
        assert not geo.in_spherical_hull(self.tri, self.tri.a, strict=True)

    def test_origin(self):
        assert not geo.in_spherical_hull(self.tri, np.zeros(3))

    def test_convex_combinations(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            w = rng.dirichlet(np.ones(3), size=5)
            pts = geo.project_to_sphere(w @ self.tri.vertices)
            c = rng.dirichlet(np.ones(5))
            assert geo.in_spherical_hull(self.tri, c @ pts)

    def test_against_sampled_hull(self):
        """Feasibility of a convex combination of sampled surface points.

        The sampled hull is contained in the true hull, so the oracle is
        sound; completeness is checked on points shrunk towards the interior.
        """
        m = 24
        grid = [(i, j, m - i - j) for i in range(m + 1) for j in range(m + 1 - i)]
        samples = geo.project_to_sphere(np.array(grid, dtype=float) / m @ self.tri.vertices)
        centre = samples.mean(axis=0)

        def oracle(p):
            a_eq = np.vstack([samples.T, np.ones(len(samples))])
            res = linprog(np.zeros(len(samples)), A_eq=a_eq, b_eq=np.append(p, 1.0),
                          bounds=(0, None), method="highs")
            return res.status == 0

        rng = np.random.default_rng(6)
        checked_inside = 0
        for _ in range(1000):
            p = rng.uniform(-1.2, 1.2, 3)
            while np.linalg.norm(p) > 1.2:
                p = rng.uniform(-1.2, 1.2, 3)
            if rng.uniform() < 0.7:
                # bias towards the interesting region
                p = centre + 0.6 * rng.normal(size=3) * 0.3
            inside = geo.in_spherical_hull(self.tri, p)
            if oracle(p):
                assert inside
            if inside:
                checked_inside += 1
                assert oracle(centre + 0.97 * (p - centre))
        assert checked_inside > 20
