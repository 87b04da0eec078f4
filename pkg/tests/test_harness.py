import io
import math

import numpy as np
import pytest
from scipy.integrate import quad

from pwlmoments import bases, closure as cl, harness as H
from pwlmoments.bases import AngularBasis as B

# coarser than the study default but still far below the asserted tolerances
FAST = H.QuadratureSettings(points=20, min_intervals=64, degree=10, level=2)


class TestDensities:

    @pytest.mark.parametrize("name", list(H.DENSITIES))
    def test_positive(self, name):
        d = H.get_density(name)
        rng = np.random.default_rng(0)
        if d.dim == 1:
            pts = np.concatenate([rng.uniform(-1, 1, 1000), [-1.0, 0.0, 1.0]])
        else:
            pts = rng.normal(size=(1000, 3))
            pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        assert np.all(d(pts) > 0)

    def test_names(self):
        assert H.get_density("Heaviside1D").name == "Heaviside"
        assert H.get_density("crossing-beams-3d").name == "CrossingBeams3D"
        with pytest.raises(ValueError, match="unknown density"):
            H.get_density("lorentz")

    def test_gauss_3d_normalised(self):
        d = H.get_density("gauss3d")
        ref = H.reference_moments(d, B.harmonics(0)).values[0] * math.sqrt(4 * math.pi)
        assert ref == pytest.approx(1.0, rel=1e-12)

    def test_heaviside_one_sided(self):
        d = H.get_density("heaviside")
        np.testing.assert_array_equal(d(np.zeros(2), np.array([-0.1, 0.1])), [H.VACUUM_1D, 1.0])

    def test_random_density(self):
        rng = np.random.default_rng(1)
        for dim in (1, 3):
            d = H.random_density(dim, rng)
            pts = rng.uniform(-1, 1, 100) if dim == 1 else np.eye(3)
            assert np.all(d(pts) >= d.params["floor"])


class TestReferenceMoments:

    def test_heaviside_partial_moments(self):
        u = H.reference_moments("heaviside", B.partial(2)).values
        np.testing.assert_allclose(u[2:], [1.0, 0.5], rtol=1e-14)
        np.testing.assert_allclose(u[:2], [5e-9, -2.5e-9], rtol=1e-13)

    def test_gauss_mass(self):
        sigma = 0.5
        exact = math.erf(1.0 / (sigma * math.sqrt(2.0)))
        adaptive = quad(H.get_density("gauss1d"), -1, 1, epsabs=1e-15)[0]
        assert exact == pytest.approx(adaptive, abs=1e-14)
        u0 = H.reference_moments("gauss1d", B.legendre(0)).values[0]
        assert u0 == pytest.approx(exact, abs=1e-13)

    @pytest.mark.parametrize("name", ["gauss1d", "heaviside", "crossingbeams1d"])
    def test_hat_sum_is_mass(self, name):
        u = H.reference_moments(name, B.hat(7)).values
        mass = H.reference_moments(name, B.legendre(0)).values[0]
        assert u.sum() == pytest.approx(mass, rel=1e-12)

    def test_crossing_beams_against_adaptive(self):
        d = H.get_density("crossingbeams1d")
        basis = B.legendre(3)
        u = H.reference_moments(d, basis).values
        for l in range(4):
            f = lambda mu: d(np.atleast_1d(mu))[0] * bases.legendre_values(3, np.atleast_1d(mu))[0, l]
            ref = quad(f, -1, 1, points=[-1.0, 0.5], limit=200, epsabs=1e-14)[0]
            assert u[l] == pytest.approx(ref, abs=1e-11)


class TestApproximationError:

    def test_representable(self):
        basis = B.hat(6)
        alpha = np.array([0.1, -0.4, 0.8, 0.3, -1.0, 0.2, 0.5])
        d = H.TestDensity("HatExp", 1, lambda mu, c=None: np.exp(bases.evaluate(basis, mu) @ alpha))
        l1, linf = H.approximation_error(d, basis, "mb", settings=FAST)
        assert l1 <= 1e-8 and linf <= 1e-8

    def test_gauss_m2(self):
        l1, _ = H.approximation_error("gauss1d", B.legendre(2), "mb")
        assert l1 <= 1e-6

    def test_heaviside_pm2(self):
        l1, _ = H.approximation_error("heaviside", B.partial(2), "mb")
        assert l1 <= 1e-6

    def test_linf_at_least_nodal_error(self):
        ev = H.evaluate_model("gauss1d", B.hat(4), "mb", settings=FAST)
        assert ev.linf >= 0 and ev.l1 >= 0
        assert ev.linf * 2 >= ev.l1

    def test_model_error(self):
        with pytest.raises(H.ModelError, match="M_1"):
            H.approximation_error("gauss1d", B.legendre(1), "mb", u=np.array([1.0, 1.5]),
                                  settings=FAST)


class TestStudy:

    def test_gauss_hat_second_order(self):
        rows = H.convergence_study(H.StudyConfig(models=("HFM_5", "HFM_9", "HFM_17", "HFM_33")))
        orders = [r.order for r in rows]
        assert orders[0] is None
        for o in orders[1:]:
            assert 1.6 <= o <= 2.4

    def test_heaviside_hat_first_order(self):
        rows = H.convergence_study(H.StudyConfig(densities=("heaviside",),
                                                 models=("HFM_5", "HFM_9", "HFM_17", "HFM_33")))
        slope = -H.loglog_slope([r.n for r in rows], [r.l1 for r in rows])
        assert 0.6 <= slope <= 1.4
        assert all(r.linf >= 0.05 for r in rows)

    def test_monotone_gauss_refinement(self):
        models = ("HFM_5 HFM_9 HFM_17 HFP_5 HFP_9 HFP_17 PMM_4 PMM_8 PMM_16 PMP_4 PMP_8 PMP_16")
        rows = H.convergence_study(H.StudyConfig(models=tuple(models.split())))
        for prefix in ("HFM", "HFP", "PMM", "PMP"):
            l1 = [r.l1 for r in rows if r.model.startswith(prefix + "_")]
            assert len(l1) == 3 and all(b < a for a, b in zip(l1, l1[1:])), prefix

    def test_rows_sorted_and_consistent(self):
        rows = H.convergence_study(H.StudyConfig(models=("PMM_8", "HFM_5", "PMM_4", "M_2"),
                                                 quad=FAST))
        assert [r.model for r in rows] == ["HFM_5", "M_2", "PMM_4", "PMM_8"]
        for r in rows:
            basis, _ = bases.parse_model(r.model, 1)
            assert r.n == bases.dimension(basis)
            assert r.l1 >= 0 and r.linf >= 0 and r.error is None

    def test_density_conservation(self):
        for name in ("HFM_9", "PMM_8", "M_3", "HFP_9"):
            basis, linear = bases.parse_model(name, 1)
            ent = "quadratic" if linear else "mb"
            ev = H.evaluate_model("crossingbeams1d", basis, ent, settings=FAST)
            rho = basis.density(ev.closure.achieved_moments)
            # the max-norm residual is below tol*rho and rho sums several components
            weights = [abs(basis.density(e)) for e in np.eye(bases.dimension(basis))]
            bound = sum(weights) * cl.SolverConfig().tol * ev.reference_mass
            assert abs(rho - ev.reference_mass) <= bound

    def test_determinism(self):
        config = H.StudyConfig(densities=("gauss1d",), models=("HFM_5", "PMP_4", "M_1"), quad=FAST)
        outs = []
        for _ in range(2):
            buf = io.StringIO()
            H.emit_csv(H.convergence_study(config), buf)
            outs.append([line.split(",")[:6] + line.split(",")[7:]
                         for line in buf.getvalue().splitlines()])
        assert outs[0] == outs[1]

    def test_failure_recorded(self):
        config = H.StudyConfig(models=("M_2", "M_3"), quad=FAST, solver=cl.SolverConfig(max_iter=1))
        rows = H.convergence_study(config)
        assert all(r.error and "MaxIterations" in r.error for r in rows)
        assert all(r.order is None for r in rows)

    def test_nmax(self):
        rows = H.convergence_study(H.StudyConfig(models=("HFM_5", "HFM_9"), nmax=6, quad=FAST))
        assert [r.model for r in rows] == ["HFM_5"]


class TestOrders:

    def _row(self, model, n, l1, density="D"):
        return H.ExperimentRow(model, n, "mb", l1, l1, 1, 0, density=density)

    def test_formula(self):
        rows = [self._row("HFM_5", 5, 1e-2), self._row("HFM_9", 9, 1e-2 * (5 / 9) ** 2),
                self._row("PMM_4", 4, 0.1), self._row("HFM_9", 9, 0.5, density="E")]
        orders = H.empirical_orders(rows)
        assert orders[0] is None and orders[2] is None and orders[3] is None
        assert orders[1] == pytest.approx(2.0, rel=1e-12)

    def test_loglog_slope(self):
        n = np.array([2, 4, 8, 16.0])
        assert H.loglog_slope(n, 3 * n ** 1.5) == pytest.approx(1.5, rel=1e-12)


class TestCsv:

    def test_empty(self):
        buf = io.StringIO()
        H.emit_csv([], buf)
        assert buf.getvalue() == "model,n,entropy,l1,linf,iterations,time_ns,order\n"

    def test_two_rows_round_trip(self, tmp_path):
        rows = [H.ExperimentRow("HFM_5", 5, "MaxwellBoltzmann", 0.1234567890123, 1e-300, 7, 12345),
                H.ExperimentRow("HFM_9", 9, "MaxwellBoltzmann", 1 / 3, 2.5, 9, 999, order=1.9)]
        path = tmp_path / "rows.csv"
        H.emit_csv(rows, path)
        assert len(path.read_text().splitlines()) == 3
        back = H.read_csv(path)
        for a, b in zip(rows, back):
            assert (a.model, a.n, a.entropy, a.l1, a.linf, a.iterations, a.time_ns, a.order) == \
                (b.model, b.n, b.entropy, b.l1, b.linf, b.iterations, b.time_ns, b.order)

    def test_quoting(self):
        buf = io.StringIO()
        H.emit_csv([H.ExperimentRow('odd,"name"', 1, "mb", 0.0, 0.0, 0, 0)], buf)
        buf.seek(0)
        assert H.read_csv(buf)[0].model == 'odd,"name"'

    def test_io_error(self, tmp_path):
        with pytest.raises(OSError, match="cannot write CSV"):
            H.emit_csv([], tmp_path / "missing" / "x.csv")


class TestConfig:

    def test_read_and_build(self, tmp_path):
        path = tmp_path / "study.cfg"
        path.write_text("# gauss only\ndensity = gauss1d, heaviside\nmodels=HFM_5 HFM_9\n"
                        "entropy=be\nnmax=12\nquad-points=30\nmax_iter=50\n")
        opts = H.read_config(path)
        assert opts["quad_points"] == "30"
        config = H.study_config(opts)
        assert config.densities == ("gauss1d", "heaviside")
        assert config.models == ("HFM_5", "HFM_9")
        assert config.entropy == "be" and config.nmax == 12
        assert config.quad.points == 30 and config.solver.max_iter == 50

    def test_defaults(self):
        config = H.study_config({})
        assert config.solver.max_iter == H.STUDY_MAX_ITER
        assert config.densities == ("gauss1d",)

    def test_bad_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("density gauss1d\n")
        with pytest.raises(ValueError, match="bad.cfg:1"):
            H.read_config(path)


class TestTiming:

    def test_rows(self):
        rows = H.timing_benchmark(["HFM_9", "PMM_8"], repetitions=2, warmup=1,
                                  rule_factory=H.shared_rule_1d(points=8))
        assert [r.n for r in rows] == [9, 8]
        assert all(r.median_ns > 0 and r.iterations > 0 and r.repetitions == 2 for r in rows)

    def test_shared_rule_nodes(self):
        make = H.shared_rule_1d(points=5, intervals=16)
        r1 = make(B.hat(4))
        r2 = make(B.partial(16))
        np.testing.assert_allclose(np.sort(r1.flat_nodes()), np.sort(r2.flat_nodes()), atol=1e-15)
        with pytest.raises(ValueError):
            make(B.hat(5))

    def test_rejects_no_repetitions(self):
        with pytest.raises(ValueError):
            H.timing_benchmark(["HFM_5"], repetitions=0)
