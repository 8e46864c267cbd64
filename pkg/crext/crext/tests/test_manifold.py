import os
import tempfile
from unittest import TestCase

import numpy as np

from crext.custom_exceptions import (
    InfiniteWeightError,
    ManifoldSpecError,
    ManifoldValidationError,
    NonHomogeneousError,
    ParameterError,
)
from crext.manifold import (
    LineRestriction,
    example_model,
    flat_model,
    homogeneous_weight,
    levi_model,
    load_model,
    lowest_weight_part,
    mainexample_model,
    model_hash,
    parse_and_validate,
    parse_polynomial,
    pluriharmonic_test,
    print_model,
    restrict_to_line,
)
from crext.polyalg import INFINITE, Poly, RealPoly, WeightVector


def spec(*h_lines: str, l: int = 1, n: int = 1, extra: str = "") -> str:
    body = "\n".join(f"    {line}" for line in h_lines)
    return f"[manifold]\nl = {l}\nn = {n}\n{extra}h =\n{body}\n"


class TestParsing(TestCase):
    def test_parse_polynomial(self) -> None:
        p = parse_polynomial("abs2(w1) + 2*x1*Re(w1^2)", 1, 1)
        self.assertEqual(p.coefficient((0, 1, 1)), 1)
        self.assertEqual(p.coefficient((1, 2, 0)), 1)
        self.assertEqual(p.coefficient((1, 0, 2)), 1)
        self.assertTrue(p.is_hermitian())

    def test_imaginary_unit(self) -> None:
        p = parse_polynomial("Im(w1^2)", 1, 1)
        self.assertEqual(p.coefficient((0, 2, 0)), -0.5j)
        self.assertEqual(p.coefficient((0, 0, 2)), 0.5j)

    def test_unknown_variable(self) -> None:
        with self.assertRaises(ManifoldSpecError):
            parse_polynomial("z1*w1", 1, 1)

    def test_syntax_error(self) -> None:
        with self.assertRaises(ManifoldSpecError):
            parse_and_validate(spec("w1*cw1 +"))
        with self.assertRaises(ManifoldSpecError):
            parse_and_validate("[other]\nl = 1\n")

    def test_invariants(self) -> None:
        with self.assertRaises(ManifoldValidationError):
            parse_and_validate(spec("1 + w1*cw1"))
        with self.assertRaises(ManifoldValidationError):
            parse_and_validate(spec("x1 + w1*cw1"))
        with self.assertRaises(ManifoldValidationError):
            parse_and_validate(spec("I*w1*cw1"))

    def test_declared_weight_too_high(self) -> None:
        with self.assertRaises(ManifoldValidationError):
            parse_and_validate(spec("w1*cw1", extra="weights = 4\n"))

    def test_weights_from_filtration(self) -> None:
        model = parse_and_validate(spec("w1*cw1"))
        self.assertEqual(model.weights, WeightVector((1,), (2,)))

    def test_wrong_number_of_polynomials(self) -> None:
        with self.assertRaises(ManifoldSpecError):
            parse_and_validate(spec("w1*cw1", l=2, n=1))


class TestBundledModels(TestCase):
    def test_levi(self) -> None:
        model = load_model("levi")
        self.assertEqual((model.l, model.n), (1, 1))
        self.assertEqual(model.h, levi_model().h)
        self.assertEqual(model_hash(model), model_hash(levi_model()))
        self.assertEqual(model.dimension, 3)

    def test_name_with_directory(self) -> None:
        self.assertEqual(load_model("bundled/levi.mfd").h, levi_model().h)

    def test_mainexample(self) -> None:
        model = load_model("mainexample.mfd")
        self.assertEqual(model.weights, WeightVector((1, 1), (2, 4)))
        self.assertEqual(model.h, mainexample_model().h)

    def test_example(self) -> None:
        model = load_model("example")
        self.assertEqual(model.weights, WeightVector((2,), (4,)))
        self.assertEqual(model.h, example_model(4, 2, 3).h)

    def test_flat(self) -> None:
        model = load_model("flat")
        self.assertEqual(model.weights.weights, (INFINITE,))
        self.assertTrue(model.h[0].is_zero())
        self.assertEqual(model, flat_model())

    def test_missing_file(self) -> None:
        with self.assertRaises(ManifoldSpecError):
            load_model("bundled/missing.mfd")

    def test_print_roundtrip(self) -> None:
        model = mainexample_model()
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "copy.mfd")
            with open(path, "w", encoding="utf-8") as f:
                f.write(print_model(model))
            reloaded = load_model(path)
        self.assertEqual(model_hash(reloaded), model_hash(model))

    def test_evaluate(self) -> None:
        w = np.array([[1.0 + 1.0j], [0.5j]])
        values = levi_model().evaluate(np.zeros((2, 1)), w)
        np.testing.assert_allclose(values, [[2.0], [0.25]])

    def test_example_model_parameters(self) -> None:
        with self.assertRaises(ParameterError):
            example_model(4, 3, 1.0)


class TestRestriction(TestCase):
    def test_restrict_mainexample(self) -> None:
        line = restrict_to_line(mainexample_model(), 2)
        self.assertIsInstance(line, LineRestriction)
        self.assertEqual(line.weights, WeightVector((1, 1), (2, 4)))
        self.assertEqual(line.direction, 2)
        modulus = RealPoly.from_poly(
            Poly.variable(("w", 0), (2, 1)) * Poly.variable(("cw", 0), (2, 1))
        )
        self.assertEqual(line.h[0], modulus)
        self.assertEqual(line.h[1], modulus**2)

    def test_restrict_mainexample_first_direction(self) -> None:
        line = restrict_to_line(mainexample_model(), 1)
        self.assertEqual(line.weights, WeightVector((1, 1), (2, INFINITE)))
        self.assertFalse(line.seminormal)
        self.assertTrue(restrict_to_line(mainexample_model(), 2).seminormal)
        w = Poly.variable(("w", 0), (2, 1))
        x = Poly.variable(("x", 0), (2, 1))
        modulus = RealPoly.from_poly(w * w.conjugate())
        self.assertEqual(line.h[0], modulus)
        self.assertEqual(line.h[1], RealPoly.from_poly(x * w * w.conjugate()))

    def test_direction_out_of_range(self) -> None:
        with self.assertRaises(ParameterError):
            restrict_to_line(mainexample_model(), 3)

    def test_lowest_weight_part(self) -> None:
        model = example_model(4, 2, 3)
        self.assertEqual(lowest_weight_part(model, 1), model.h)
        with self.assertRaises(InfiniteWeightError):
            lowest_weight_part(flat_model(), 1)

    def test_homogeneous_weight(self) -> None:
        weights = WeightVector((1,), (2,))
        w = Poly.variable(("w", 0), (1, 1))
        x = Poly.variable(("x", 0), (1, 1))
        self.assertEqual(homogeneous_weight(x * w + w**3, weights), 3)
        with self.assertRaises(NonHomogeneousError):
            homogeneous_weight(w + w**2, weights)


class TestPluriharmonic(TestCase):
    def setUp(self) -> None:
        self.line = restrict_to_line(levi_model(), 1)
        self.w = Poly.variable(("w", 0), (1, 1))
        self.x = Poly.variable(("x", 0), (1, 1))

    def test_real_part_of_holomorphic(self) -> None:
        g = (self.w**2 + self.w.conjugate() ** 2) * 0.5
        result = pluriharmonic_test(g, self.line)
        self.assertTrue(result.is_pluriharmonic)
        self.assertEqual(result.weight, 2)
        # Im(i w²) = Re w²
        self.assertAlmostEqual(result.witness.coefficient((0, 2, 0)), 1j)
        scaled = pluriharmonic_test(g * -3.0, self.line)
        self.assertTrue(scaled.is_pluriharmonic)

    def test_levi_form_is_not_pluriharmonic(self) -> None:
        for g in (self.w * self.w.conjugate(), (self.w * self.w.conjugate()) ** 2):
            result = pluriharmonic_test(g, self.line)
            self.assertFalse(result.is_pluriharmonic)
            self.assertIsNone(result.witness)

    def test_restrictions_of_holomorphic_polynomials(self) -> None:
        cube = (self.w**3 - self.w.conjugate() ** 3) * -0.5j
        self.assertTrue(pluriharmonic_test(cube, self.line).is_pluriharmonic)
        # weight-4 part of Im z² on y = |w|² is 2x|w|²
        mixed = self.x * self.w * self.w.conjugate() * 2.0
        self.assertTrue(pluriharmonic_test(mixed, self.line).is_pluriharmonic)

    def test_zero_and_non_homogeneous(self) -> None:
        self.assertTrue(pluriharmonic_test(Poly.zero((1, 1)), self.line).is_pluriharmonic)
        with self.assertRaises(NonHomogeneousError):
            pluriharmonic_test(self.w + self.w**2, self.line)

    def restricted_imaginary_part(self, f: Poly) -> Poly:
        # the x slot of f stands for z = x + i|w|²
        restricted = f.substitute({("x", 0): self.x + self.w * self.w.conjugate() * 1j})
        return (restricted - restricted.conjugate()) * -0.5j

    def test_imaginary_parts_round_trip(self) -> None:
        rng = np.random.default_rng(5)
        cw = self.w.conjugate()
        for m in (3, 4, 5):
            for _ in range(3):
                coeffs = rng.normal(size=3) + 1j * rng.normal(size=3)
                f = self.w**m * complex(coeffs[0]) + self.x * self.w ** (m - 2) * complex(coeffs[1])
                if m >= 4:
                    f = f + self.x**2 * self.w ** (m - 4) * complex(coeffs[2])
                g = self.restricted_imaginary_part(f)
                result = pluriharmonic_test(g, self.line)
                self.assertTrue(result.is_pluriharmonic)
                self.assertEqual(result.weight, m)
                recovered = self.restricted_imaginary_part(result.witness)
                self.assertTrue((recovered - g).chop(1e-9).is_zero())
                if m == 4:
                    bent = g + (self.w * cw) ** 2 * 0.1
                    self.assertFalse(pluriharmonic_test(bent, self.line).is_pluriharmonic)
