import math
import sys
import unittest
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from weylgbdt.errors import (
    ConfigError,
    ConstraintViolated,
    IdentityViolated,
    InconsistentLowerPart,
    NotHermitian,
    NotSkewSymmetric,
    ShapeError,
)
from weylgbdt.parameter_triples import (
    make_example1,
    make_example2,
    make_example3,
    make_example4,
    random_example3,
    random_example4,
    realness_conditions,
    spectrum_halfplane_check,
    triple_from_document,
    triple_to_document,
    validate_triple,
)


class TestValidateTriple(unittest.TestCase):
    def test_jordan_triple_valid(self):
        A = 1j * np.array([[1.0, 0.0], [1.0, 1.0]])
        Pi0 = np.array([[2j, 0.0], [1j, math.sqrt(3.0)]]) / math.sqrt(2.0)
        t = validate_triple(A, np.eye(2), Pi0)
        self.assertTrue(t.positive_definite)
        self.assertEqual(t.n, 2)

    def test_scalar_triple_valid(self):
        t = validate_triple(1j, 1.0, np.array([[1j, 1.0]]))
        self.assertEqual(t.n, 1)
        assert_allclose(t.Lambda1, [1j])
        assert_allclose(t.Lambda2, [1.0])

    def test_identity_violation_reports_residual(self):
        with self.assertRaises(IdentityViolated) as ctx:
            validate_triple(1j, 1.0, np.array([[2j, 1.0]]))
        # 2i on the left, 5i on the right
        self.assertAlmostEqual(ctx.exception.residual, 3.0, places=12)

    def test_non_hermitian_s0(self):
        with self.assertRaises(NotHermitian):
            validate_triple(np.zeros((2, 2)), np.array([[1.0, 1.0], [0.0, 1.0]]), np.zeros((2, 2)))

    def test_shapes(self):
        with self.assertRaises(ShapeError):
            validate_triple(np.eye(2), np.eye(2), np.zeros((2, 3)))
        with self.assertRaises(ShapeError):
            validate_triple(np.eye(2), np.eye(3), np.zeros((2, 2)))

    def test_indefinite_s0_is_flagged_not_rejected(self):
        A = np.diag([1j, -1j])
        S0 = np.diag([1.0, -1.0])
        Pi0 = math.sqrt(2.0) * np.eye(2)
        with self.assertLogs("weylgbdt.parameter_triples", level="WARNING"):
            t = validate_triple(A, S0, Pi0)
        self.assertFalse(t.positive_definite)
        self.assertAlmostEqual(t.s0_min_eig, -1.0)

    def test_triple_arrays_are_read_only(self):
        t = make_example2()
        with self.assertRaises(ValueError):
            t.A[0, 0] = 0


class TestRealnessAndSpectrum(unittest.TestCase):
    def test_example2_real_form(self):
        self.assertTrue(realness_conditions(make_example2()).is_real_form)

    def test_non_real_form(self):
        t = validate_triple(np.array([[1.0 + 1j]]), 1.0, np.array([[math.sqrt(2.0) * 1j, 0.0]]))
        cert = realness_conditions(t)
        self.assertFalse(cert.is_real_form)
        self.assertAlmostEqual(cert.max_violation, 1.0)

    def test_halfplane_examples(self):
        self.assertTrue(spectrum_halfplane_check(make_example2()))
        self.assertTrue(spectrum_halfplane_check(make_example1(1.0, 1.0, 1.0)))

    def test_halfplane_needs_positive_s0(self):
        # A = -i with S0 = -1: a valid triple whose A sits in the lower half-plane
        with self.assertLogs("weylgbdt", level="WARNING"):
            t = validate_triple(np.array([[-1j]]), np.array([[-1.0]]), np.array([[math.sqrt(2.0), 0.0]]))
            self.assertFalse(spectrum_halfplane_check(t))
        self.assertFalse(t.positive_definite)

    def test_example2_spectrum_is_double(self):
        eig = np.linalg.eigvals(make_example2().A)
        # defective: computed eigenvalues split by about sqrt(eps)
        assert_allclose(eig, [1j, 1j], atol=1e-7)


class TestExampleConstructors(unittest.TestCase):
    def test_example1_branches(self):
        t = make_example1(1.0, math.sqrt(2.0), 0.0)
        assert_allclose(t.A, [[1j]])
        assert_allclose(t.Pi0, [[math.sqrt(2.0) * 1j, 0.0]])
        t = make_example1(1.0, 1.0, 1.0)
        assert_allclose(t.Pi0, [[1j, 1.0]])
        assert_allclose(t.S0, [[1.0]])

    def test_example1_signs(self):
        t = make_example1(1.0, 1.0, 1.0, sign1=-1, sign2=-1)
        assert_allclose(t.Pi0, [[-1j, -1.0]])

    def test_example1_constraint(self):
        with self.assertRaises(ConstraintViolated):
            make_example1(1.0, 2.0, 2.0)
        with self.assertRaises(ConstraintViolated):
            make_example1(-1.0, 0.0, 0.0)

    def test_example2_residual(self):
        t = make_example2()
        self.assertLessEqual(t.identity_residual, 1e-15)
        assert_allclose(t.calA, [[1.0, 0.0], [1.0, 1.0]], atol=1e-15)

    def test_example3_scalar(self):
        t = make_example3(np.zeros((1, 1)), [1.0], [1.0])
        assert_allclose(t.A, [[2j]])
        assert_allclose(t.Pi0, [[math.sqrt(2.0) * 1j, math.sqrt(2.0)]])

    def test_example3_rotation(self):
        t = make_example3([[0.0, 1.0], [-1.0, 0.0]], [1.0, 0.0], [0.0, 1.0])
        self.assertTrue(realness_conditions(t).is_real_form)
        assert_allclose(t.calA, [[1.0, 1.0], [-1.0, 1.0]], atol=1e-15)

    def test_example3_rejects_symmetric(self):
        with self.assertRaises(NotSkewSymmetric):
            make_example3([[0.0, 1.0], [1.0, 0.0]], [1.0, 0.0], [0.0, 1.0])

    def test_example4_scalar_collapses_to_example1(self):
        t4 = make_example4([1.0], [1.0])
        t1 = make_example1(1.0, 1.0, 1.0)
        assert_allclose(t4.A, t1.A)
        assert_allclose(t4.Pi0, t1.Pi0)

    def test_example4_forced_entries(self):
        # h1 h1^T + h2 h2^T = [[1, 1], [1, 2]]
        t = make_example4([1.0, 1.0], [0.0, 1.0])
        assert_allclose(t.calA, [[0.5, 0.0], [1.0, 1.0]], atol=1e-15)
        self.assertLessEqual(t.identity_residual, 1e-14)

    def test_example4_lower_checked(self):
        make_example4([1.0, 1.0], [0.0, 1.0], lower=[[0.0, 0.0], [1.0, 0.0]])
        with self.assertRaises(InconsistentLowerPart):
            make_example4([1.0, 1.0], [0.0, 1.0], lower=[[0.0, 0.0], [5.0, 0.0]])


class TestRandomFamilies(unittest.TestCase):
    def test_randomized_triples_are_real_and_halfplane(self):
        for k in range(50):
            n = 1 + k % 6
            t = random_example3(n, k) if k % 2 == 0 else random_example4(n, k)
            self.assertEqual(t.n, n)
            self.assertTrue(t.positive_definite)
            self.assertTrue(realness_conditions(t).is_real_form, k)
            self.assertTrue(spectrum_halfplane_check(t), k)

    def test_same_seed_same_triple(self):
        assert_allclose(random_example3(4, 7).A, random_example3(4, 7).A, atol=0)


class TestSerialization(unittest.TestCase):
    def test_document_revalidates_identically(self):
        for t in (make_example2(), random_example4(3, 11)):
            again = triple_from_document(triple_to_document(t))
            assert_allclose(again.A, t.A, atol=0)
            assert_allclose(again.S0, t.S0, atol=0)
            assert_allclose(again.Pi0, t.Pi0, atol=0)
            self.assertEqual(again.identity_residual, t.identity_residual)

    def test_document_shape_mismatch(self):
        doc = triple_to_document(make_example2())
        doc["n"] = 3
        with self.assertRaises(ConfigError):
            triple_from_document(doc)

    def test_document_missing_field(self):
        doc = triple_to_document(make_example2())
        del doc["Pi0"]
        with self.assertRaises(ConfigError):
            triple_from_document(doc)

    def test_document_violating_identity(self):
        doc = {"n": 1, "A": [[[0, 1]]], "S0": [[[1, 0]]], "Pi0": [[[0, 2], [1, 0]]]}
        with self.assertRaises(IdentityViolated):
            triple_from_document(doc)


if __name__ == "__main__":
    unittest.main()
