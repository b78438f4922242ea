import math
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from weylgbdt.errors import ConfigError, OutOfCoverage, ShapeError
from weylgbdt.gbdt_explicit import eval_potential, eval_psi, eval_S
from weylgbdt.gbdt_general import (
    SeedKind,
    SeedPotential,
    eval_psi_general,
    integrate_dressing,
    transformed_potential,
)
from weylgbdt.parameter_triples import (
    make_example1,
    make_example2,
    make_example3,
    make_example4,
    random_example3,
    random_example4,
    zero_dressing_triple,
)
from weylgbdt.verification import CONVERGENCE_STEPS, convergence_order


class TestSeedPotential(unittest.TestCase):
    def test_parse_forms(self):
        self.assertTrue(SeedPotential.parse("zero").is_zero)
        self.assertEqual(SeedPotential.parse("constant:1.5").u(3.0), 1.5)
        g = SeedPotential.parse("gaussian:2,0.5,1")
        self.assertEqual(g.kind, SeedKind.GAUSSIAN)
        self.assertAlmostEqual(g.u(0.5).real, 2.0)
        self.assertAlmostEqual(g.u(1.5).real, 2.0 * math.exp(-0.5))

    def test_parse_rejects_garbage(self):
        for text in ("", "sine:1", "gaussian:1,2", "gaussian:1,0,0", "constant:abc", "tabulated:"):
            with self.assertRaises(ConfigError, msg=text):
                SeedPotential.parse(text)

    def test_constant_zero_is_zero(self):
        self.assertEqual(SeedPotential.constant(0.0), SeedPotential.zero())
        self.assertTrue(SeedPotential.parse("constant:0").is_zero)

    def test_off_diagonal_form(self):
        V = SeedPotential.constant(1.0 + 2.0j).V(0.0)
        assert_allclose(V, [[0.0, 1.0 + 2.0j], [-1.0 + 2.0j, 0.0]])
        self.assertFalse(SeedPotential.constant(1.0 + 2.0j).is_real)

    def test_tabulated_validation(self):
        with self.assertRaises(ConfigError):
            SeedPotential.tabulated([0.0, 0.0, 1.0], [1.0, 2.0, 3.0])
        with self.assertRaises(ConfigError):
            SeedPotential.tabulated([0.0], [1.0])
        s = SeedPotential.tabulated([-1.0, 0.0, 1.0], [0.0, 1.0, 0.0])
        self.assertAlmostEqual(s.u(0.5).real, 0.5)
        with self.assertRaises(OutOfCoverage):
            s.u(1.5)

    def test_tabulated_from_csv(self):
        with tempfile.TemporaryDirectory() as td:
            p = Path(td) / "seed.csv"
            p.write_text("x,u\n-2,0\n0,1\n2,0\n", encoding="utf-8")
            s = SeedPotential.parse(f"tabulated:{p}")
        self.assertEqual(s.coverage(), (-2.0, 2.0))
        assert_allclose(s.breakpoints, [-2.0, 0.0, 2.0])
        self.assertAlmostEqual(s.u(1.0).real, 0.5)


class TestIntegrateDressing(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.jordan = make_example2()
        cls.zero_traj = integrate_dressing(cls.jordan, SeedPotential.zero(), (-2.0, 2.0), 1e-10)

    def test_origin_sample_is_exact(self):
        k = int(np.flatnonzero(self.zero_traj.grid == 0.0)[0])
        assert_allclose(self.zero_traj.Pi[k], self.jordan.Pi0, atol=0)
        assert_allclose(self.zero_traj.S[k], self.jordan.S0, atol=0)

    def test_grid_increasing_and_covers_interval(self):
        g = self.zero_traj.grid
        self.assertTrue(np.all(np.diff(g) > 0))
        self.assertEqual(g[0], -2.0)
        self.assertEqual(g[-1], 2.0)
        self.assertGreater(self.zero_traj.stats.steps, 0)

    def test_zero_seed_matches_closed_form(self):
        for x, Pi, S in zip(self.zero_traj.grid, self.zero_traj.Pi, self.zero_traj.S):
            state = eval_S(self.jordan, float(x))
            assert_allclose(Pi, state.Pi, rtol=1e-8, atol=1e-8)
            assert_allclose(S, state.S, rtol=1e-8, atol=1e-8)

    def test_constant_zero_trajectory_identical(self):
        other = integrate_dressing(self.jordan, SeedPotential.constant(0), (-2.0, 2.0), 1e-10)
        assert_allclose(other.grid, self.zero_traj.grid, atol=0)
        assert_allclose(other.S, self.zero_traj.S, atol=0)

    def test_gaussian_identity_drift(self):
        traj = integrate_dressing(self.jordan, SeedPotential.gaussian(1.0, 0.0, 1.0), (-2.0, 2.0), 1e-10)
        self.assertLessEqual(traj.max_identity_drift, 1e-8)
        self.assertLessEqual(traj.max_hermitian_drift, 1e-8)
        self.assertTrue(np.all(np.isfinite(traj.condition)))

    def test_positivity_along_trajectory(self):
        traj = integrate_dressing(self.jordan, SeedPotential.gaussian(0.8, 0.3, 0.5), (-2.0, 2.0), 1e-10)
        for S in traj.S:
            self.assertGreater(np.linalg.eigvalsh(0.5 * (S + S.conj().T)).min(), 0.0)

    def test_interval_must_contain_origin(self):
        with self.assertRaises(ShapeError):
            integrate_dressing(self.jordan, SeedPotential.zero(), (0.5, 2.0), 1e-10)

    def test_tabulated_coverage_checked(self):
        seed = SeedPotential.tabulated([-1.0, 1.0], [0.5, 0.5])
        with self.assertRaises(OutOfCoverage):
            integrate_dressing(self.jordan, seed, (-2.0, 2.0), 1e-10)

    def test_tabulated_restarts_at_knots(self):
        seed = SeedPotential.tabulated([-2.0, -0.5, 0.7, 2.0], [0.0, 1.0, -0.5, 0.0])
        traj = integrate_dressing(self.jordan, seed, (-2.0, 2.0), 1e-10)
        for knot in (-0.5, 0.7):
            self.assertIn(knot, traj.grid.tolist())
        self.assertLessEqual(traj.max_identity_drift, 1e-8)

    def test_projection_mode(self):
        seed = SeedPotential.gaussian(1.0, 0.0, 1.0)
        traj = integrate_dressing(self.jordan, seed, (-2.0, 2.0), 1e-10, project=True)
        self.assertGreater(traj.stats.projections, 0)
        self.assertLessEqual(traj.max_identity_drift, 1e-8)
        plain = integrate_dressing(self.jordan, seed, (-2.0, 2.0), 1e-10)
        self.assertEqual(plain.stats.projections, 0)

    def test_state_outside_interval(self):
        with self.assertRaises(OutOfCoverage):
            self.zero_traj.state_at(2.5)


class TestTransformedPotential(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.jordan = make_example2()
        cls.zero_traj = integrate_dressing(cls.jordan, SeedPotential.zero(), (-2.0, 2.0), 1e-10)

    def test_zero_seed_reduces_to_closed_form_on_grid(self):
        for x in self.zero_traj.grid:
            got = transformed_potential(self.zero_traj, None, float(x)).u_tilde
            expected = eval_potential(self.jordan, float(x)).u_tilde
            self.assertLessEqual(abs(got - expected), 1e-8)

    def test_dense_output_between_samples(self):
        for x in (-1.234, -0.05, 0.321, 1.777):
            got = transformed_potential(self.zero_traj, None, x).u_tilde
            expected = eval_potential(self.jordan, x).u_tilde
            self.assertLessEqual(abs(got - expected), 1e-6)

    def test_degenerate_triple_keeps_seed(self):
        seed = SeedPotential.gaussian(1.0, 0.0, 1.0)
        traj = integrate_dressing(zero_dressing_triple(2), seed, (-1.0, 1.0), 1e-10)
        for x in (-0.8, 0.0, 0.4):
            pot = transformed_potential(traj, seed, x)
            assert_allclose(pot.V_tilde, seed.V(x), atol=1e-14)

    def test_constant_seed_real_potential(self):
        seed = SeedPotential.constant(1.0)
        traj = integrate_dressing(make_example1(1.0, 1.0, 1.0), seed, (-2.0, 2.0), 1e-10)
        for x in traj.grid:
            pot = transformed_potential(traj, seed, float(x))
            self.assertLessEqual(abs(pot.u_tilde.imag), 1e-8)
            assert_allclose(np.diag(pot.V_tilde), [0.0, 0.0], atol=1e-15)

    def test_out_of_coverage(self):
        with self.assertRaises(OutOfCoverage):
            transformed_potential(self.zero_traj, None, -3.0)


class TestPsiGeneral(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.jordan = make_example2()
        cls.zero_traj = integrate_dressing(cls.jordan, SeedPotential.zero(), (-2.0, 2.0), 1e-10)

    def test_zero_seed_matches_closed_form(self):
        for x in (-1.5, 0.0, 0.9):
            for y in (-1.0, 0.5):
                for h in ([1.0, 0.0], [0.0, 1.0], [0.3j, -2.0]):
                    got = eval_psi_general(self.zero_traj, x, y, h)
                    assert_allclose(got, eval_psi(self.jordan, x, y, h), rtol=1e-8, atol=1e-8)

    def test_zero_h(self):
        assert_allclose(eval_psi_general(self.zero_traj, 0.3, 0.2, [0.0, 0.0]), [0.0, 0.0], atol=0)

    def test_h_length(self):
        with self.assertRaises(ShapeError):
            eval_psi_general(self.zero_traj, 0.3, 0.2, [1.0, 0.0, 0.0])

    def test_gaussian_seed_second_order_residual(self):
        seed = SeedPotential.gaussian(1.0, 0.0, 1.0)
        traj = integrate_dressing(self.jordan, seed, (-2.0, 2.0), 1e-12)

        def psi(x, y):
            return eval_psi_general(traj, x, y, [1.0, 0.0])

        def potential(x):
            return transformed_potential(traj, seed, x).V_tilde

        order = convergence_order(psi, potential, (0.4, 0.2), CONVERGENCE_STEPS)
        self.assertAlmostEqual(order, 2.0, delta=0.2)

    def test_random_triple_gaussian(self):
        t = random_example3(3, 21)
        seed = SeedPotential.gaussian(1.0, 0.0, 1.0)
        traj = integrate_dressing(t, seed, (-2.0, 2.0), 1e-10)
        self.assertLessEqual(traj.max_identity_drift, 1e-8)


class TestRandomizedTriples(unittest.TestCase):
    @staticmethod
    def triple_set():
        for k in range(50):
            n = 1 + k % 6
            yield k, (random_example3(n, 100 + k) if k % 2 == 0 else random_example4(n, 100 + k))

    def test_identity_drift_gaussian_and_constant(self):
        seeds = (SeedPotential.gaussian(1.0, 0.0, 1.0), SeedPotential.constant(0.5))
        for k, t in self.triple_set():
            for seed in seeds:
                traj = integrate_dressing(t, seed, (-2.0, 2.0), 1e-10)
                self.assertLessEqual(traj.max_identity_drift, 1e-8, f"triple {k} seed {seed}")

    def test_zero_seed_reduces_on_every_example(self):
        examples = [
            make_example1(1.0, 1.0, 1.0),
            make_example2(),
            make_example3(np.array([[0.0, 1.0], [-1.0, 0.0]]), [1.0, 0.0], [0.0, 1.0]),
            make_example4([1.0, 1.0], [0.0, 1.0]),
        ]
        examples += [t for k, t in self.triple_set() if k % 10 == 0]
        for i, t in enumerate(examples):
            traj = integrate_dressing(t, SeedPotential.zero(), (-2.0, 2.0), 1e-10)
            for x in traj.grid[:: max(1, len(traj.grid) // 25)]:
                got = transformed_potential(traj, None, float(x)).u_tilde
                expected = eval_potential(t, float(x)).u_tilde
                self.assertLessEqual(abs(got - expected), 1e-8, f"example {i} x={x}")


if __name__ == "__main__":
    unittest.main()
