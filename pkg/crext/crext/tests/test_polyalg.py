from unittest import TestCase

import numpy as np

from crext.custom_exceptions import (
    CutoffMismatchError,
    DimensionMismatchError,
    ParameterError,
    SingularJetError,
)
from crext.polyalg import (
    INFINITE,
    Jet,
    Poly,
    RealPoly,
    WeightVector,
    jet_matrix_inverse,
    jet_mul,
    jet_substitute,
    numerical_rank,
    weighted_order,
)

NVARS = (1, 1)


def w() -> Poly:
    return Poly.variable(("w", 0), NVARS)


def cw() -> Poly:
    return Poly.variable(("cw", 0), NVARS)


def x() -> Poly:
    return Poly.variable(("x", 0), NVARS)


class TestWeightVector(TestCase):
    def test_monomial_degree(self) -> None:
        weights = WeightVector((1, 1), (2, 4))
        # x1 * w1 * cw1 over l = 2, n = 2
        self.assertEqual(weights.monomial_degree((1, 0, 1, 0, 1, 0)), 4)
        self.assertEqual(weights.monomial_degree((0, 1, 0, 0, 0, 0)), 4)
        self.assertEqual(weights.top_finite, 4)
        self.assertEqual(weights.ranges(), [range(0, 1), range(1, 2)])

    def test_infinite_block(self) -> None:
        weights = WeightVector((1, 1), (2, INFINITE))
        self.assertIs(weights.monomial_degree((0, 1, 1, 1)), INFINITE)
        self.assertEqual(weights.monomial_degree((1, 0, 1, 0)), 3)
        self.assertEqual(weights.top_finite, 2)
        self.assertEqual(weights.to_json(), {"blocks": [1, 1], "weights": [2, "inf"]})

    def test_invalid_weights(self) -> None:
        with self.assertRaises(ParameterError):
            WeightVector((1, 1), (4, 2))
        with self.assertRaises(ParameterError):
            WeightVector((1, 1), (INFINITE, 2))
        with self.assertRaises(ParameterError):
            WeightVector((1,), (2, 4))


class TestPoly(TestCase):
    def test_arithmetic(self) -> None:
        square = (w() + cw()) ** 2
        self.assertEqual(square.coefficient((0, 2, 0)), 1)
        self.assertEqual(square.coefficient((0, 1, 1)), 2)
        self.assertEqual(square.coefficient((0, 0, 2)), 1)
        self.assertTrue((square - square).is_zero())
        self.assertEqual((2 * w()).coefficient((0, 1, 0)), 2)

    def test_conjugate_swaps_w(self) -> None:
        p = w() * (1 + 2j)
        self.assertEqual(p.conjugate(), cw() * (1 - 2j))
        self.assertTrue(RealPoly.from_poly(w() * cw()).is_hermitian())

    def test_real_poly_rejects_complex_values(self) -> None:
        with self.assertRaises(ParameterError):
            RealPoly.from_poly(w())
        real = RealPoly.from_poly(w() + cw())
        self.assertIsInstance(real * 2.0, RealPoly)
        self.assertNotIsInstance(real * 1j, RealPoly)

    def test_derivative(self) -> None:
        p = x() * w() * w() * cw()
        self.assertEqual(p.derivative(("w", 0)), x() * w() * cw() * 2)
        self.assertEqual(p.derivative(("x", 0)), w() * w() * cw())
        self.assertTrue(p.derivative(("x", 0)).derivative(("x", 0)).is_zero())

    def test_weighted_order_and_parts(self) -> None:
        weights = WeightVector((1,), (2,))
        p = w() * cw() + x() * w() * cw() + w() ** 3
        self.assertEqual(weighted_order(p, weights), 2)
        self.assertEqual(p.homogeneous_part(weights, 3), w() ** 3)
        self.assertEqual(p.truncate(weights, 3), w() * cw() + w() ** 3)
        self.assertIs(weighted_order(Poly.zero(NVARS), weights), INFINITE)

    def test_evaluate(self) -> None:
        p = RealPoly.from_poly(w() * cw() + x())
        samples = np.array([[1.0 + 1.0j], [2.0j], [0.0]])
        xs = np.array([[0.5], [-1.0], [3.0]])
        np.testing.assert_allclose(p.evaluate(xs, samples), [2.5, 3.0, 3.0])
        self.assertEqual(p.evaluate(xs, samples).dtype, np.float64)

    def test_substitute(self) -> None:
        p = x() ** 2
        result = p.substitute({("x", 0): w() + cw()})
        self.assertEqual(result, (w() + cw()) ** 2)
        with self.assertRaises(DimensionMismatchError):
            p.substitute({("x", 0): Poly.variable(("w", 0), (1, 2))})

    def test_variables_used(self) -> None:
        self.assertEqual((x() * cw()).variables_used(), [("x", 0), ("cw", 0)])

    def test_numerical_rank(self) -> None:
        self.assertEqual(numerical_rank(np.array([[1.0, 2.0], [2.0, 4.0]])), 1)
        self.assertEqual(numerical_rank(np.eye(3)), 3)
        self.assertEqual(numerical_rank(np.zeros((2, 2))), 0)


class TestJet(TestCase):
    def setUp(self) -> None:
        self.weights = WeightVector.uniform(1)

    def jet(self, p: Poly, cutoff: int = 3) -> Jet:
        return Jet(p, self.weights, cutoff)

    def test_truncation(self) -> None:
        cube = self.jet(w()) * self.jet(w()) * self.jet(w()) * self.jet(w())
        self.assertTrue(cube.is_zero())
        self.assertEqual(self.jet(w() + w() ** 4).poly, w())

    def test_cutoff_mismatch(self) -> None:
        with self.assertRaises(CutoffMismatchError):
            jet_mul(self.jet(w(), 2), self.jet(w(), 3))
        with self.assertRaises(CutoffMismatchError):
            self.jet(w(), 2) + self.jet(w(), 3)

    def test_matrix_inverse(self) -> None:
        one_plus_w = self.jet(1 + w())
        inverse = jet_matrix_inverse([[one_plus_w]])[0][0]
        self.assertEqual(inverse.poly, 1 - w() + w() ** 2 - w() ** 3)
        self.assertEqual((one_plus_w * inverse).poly, Poly.constant(1, NVARS))

    def test_matrix_inverse_two_by_two(self) -> None:
        matrix = [
            [self.jet(Poly.constant(2, NVARS)), self.jet(w())],
            [self.jet(cw()), self.jet(Poly.constant(1, NVARS))],
        ]
        inverse = jet_matrix_inverse(matrix)
        for i in range(2):
            for j in range(2):
                entry = matrix[i][0] * inverse[0][j] + matrix[i][1] * inverse[1][j]
                expected = 1 if i == j else 0
                self.assertEqual(entry.poly.chop(1e-12), Poly.constant(expected, NVARS))

    def test_singular_constant_term(self) -> None:
        with self.assertRaises(SingularJetError):
            jet_matrix_inverse([[self.jet(w())]])

    def test_substitute(self) -> None:
        p = self.jet(x() * w(), 2)
        result = jet_substitute(p, {("x", 0): self.jet(w() + cw(), 2)})
        self.assertEqual(result.poly, w() * w() + w() * cw())
        deep = jet_substitute(self.jet(x() ** 2, 1), {("x", 0): self.jet(w(), 1)})
        self.assertTrue(deep.is_zero())


class TestWeightedScaling(TestCase):
    def test_order_is_scaling_exponent(self) -> None:
        # p(t^{m} x, t w) ~ t^{ord p} as t -> 0
        nvars = (2, 1)
        weights = WeightVector((1, 1), (2, 3))
        names = [("x", 0), ("x", 1), ("w", 0), ("cw", 0)]
        rng = np.random.default_rng(11)
        xs = rng.normal(size=(1, 2))
        ws = rng.normal(size=(1, 1)) + 1j * rng.normal(size=(1, 1))
        scale = np.array([[2.0, 3.0]])
        for _ in range(10):
            p = Poly.zero(nvars)
            for _ in range(4):
                term = Poly.constant(complex(rng.normal(), rng.normal()), nvars)
                for var in names:
                    term = term * Poly.variable(var, nvars) ** int(rng.integers(0, 3))
                p = p + term
            order = weighted_order(p, weights)
            t = 1e-4
            small = p.evaluate(t**scale * xs, t * ws)[0]
            double = p.evaluate((2 * t) ** scale * xs, 2 * t * ws)[0]
            self.assertAlmostEqual(float(np.log2(abs(double / small))), float(order), delta=0.05)


class TestHermitianJets(TestCase):
    def setUp(self) -> None:
        weights = WeightVector((1,), (2,))
        a = RealPoly.from_poly(w() * cw() + x() * (w() ** 2 + cw() ** 2) + 2 * x() ** 2)
        b = RealPoly.from_poly(1j * (w() ** 3 - cw() ** 3) + x())
        self.a = Jet(a, weights, 6)
        self.b = Jet(b, weights, 6)

    def test_operations_keep_real_values(self) -> None:
        results = [
            self.a * self.b,
            jet_mul(self.b, self.b),
            self.a + self.b,
            self.a - self.b,
            self.a.conjugate(),
            self.a.derivative(("x", 0)),
            jet_substitute(self.a, {("x", 0): self.b}),
        ]
        for jet in results:
            self.assertTrue(jet.poly.is_hermitian(), repr(jet))
        self.assertFalse(self.a.derivative(("w", 0)).poly.is_hermitian())
