import math
import os
import tempfile
from typing import Dict, Tuple
from unittest import TestCase

import numpy as np

from crext.custom_exceptions import (
    DimensionMismatchError,
    InfiniteWeightError,
    ParameterError,
    ZeroPolynomialError,
)
from crext.manifold import ManifoldModel, example_model, flat_model, levi_model
from crext.polyalg import Poly, RealPoly, WeightVector
from crext.sector import (
    TrigPoly,
    barrier_construct,
    circle_restriction,
    global_minimum,
    lemma_scan,
    negative_sectors,
    positive_sectors,
    sector_condition,
    sector_iff_scan,
    sign_table,
    thresholds,
    trig_roots,
    widest_negative_width,
    write_g_csv,
    write_sector_csv,
    xi_samples,
)

COS2 = TrigPoly.cosine_family({2: 1.0})


class TestTrigPoly(TestCase):
    def test_from_poly(self) -> None:
        w = Poly.variable(("w", 0), (1, 1))
        g = TrigPoly.from_poly((w**2 + w.conjugate() ** 2) * 0.5)
        theta = np.linspace(0, 2 * np.pi, 7)
        np.testing.assert_allclose(g(theta), np.cos(2 * theta), atol=1e-14)
        im = TrigPoly.from_poly((w**2 - w.conjugate() ** 2) * -0.5j)
        np.testing.assert_allclose(im(theta), np.sin(2 * theta), atol=1e-14)
        self.assertEqual(g.degree, 2)

    def test_from_poly_rejects_x(self) -> None:
        x = Poly.variable(("x", 0), (1, 1))
        with self.assertRaises(ParameterError):
            TrigPoly.from_poly(x)

    def test_derivative(self) -> None:
        g = TrigPoly.from_coefficients(1.0, [0.0, 3.0], [2.0])
        theta = np.linspace(0, 2 * np.pi, 5)
        expected = -6.0 * np.sin(2 * theta) + 2.0 * np.cos(theta)
        np.testing.assert_allclose(g.derivative()(theta), expected, atol=1e-12)

    def test_circle_restriction(self) -> None:
        g = circle_restriction(levi_model().h, xi=[2.0])
        self.assertEqual(g.a0, 2.0)
        self.assertTrue((g + (-g)).is_zero())
        with self.assertRaises(DimensionMismatchError):
            circle_restriction(levi_model().h, xi=[1.0, 0.0])


class TestSectors(TestCase):
    def test_cos_two_theta(self) -> None:
        arcs = positive_sectors(COS2)
        self.assertEqual(len(arcs), 2)
        for arc in arcs:
            self.assertAlmostEqual(arc.width, np.pi / 2, places=9)
            self.assertAlmostEqual(float(COS2(arc.center)), 1.0, places=9)
        self.assertEqual(len(negative_sectors(COS2)), 2)
        self.assertEqual([sign for _, sign in sign_table(COS2)].count(1), 2)

    def test_roots_on_sample_points(self) -> None:
        g = TrigPoly.from_coefficients(0.0, [1.0])
        (arc,) = positive_sectors(g)
        self.assertAlmostEqual(arc.width, np.pi, places=10)
        self.assertAlmostEqual(math.remainder(arc.center, 2 * np.pi), 0.0, places=10)
        (below,) = negative_sectors(g)
        self.assertAlmostEqual(below.width, np.pi, places=10)
        self.assertAlmostEqual(below.center, np.pi, places=10)

    def test_roots_between_samples(self) -> None:
        g = TrigPoly.from_coefficients(-0.3, [1.0])
        (arc,) = positive_sectors(g)
        self.assertAlmostEqual(arc.width, 2 * math.acos(0.3), places=9)
        self.assertAlmostEqual(math.remainder(arc.center, 2 * np.pi), 0.0, places=9)

    def test_constants(self) -> None:
        full = positive_sectors(TrigPoly(1.0))
        self.assertEqual(len(full), 1)
        self.assertAlmostEqual(full[0].width, 2 * np.pi)
        self.assertEqual(positive_sectors(TrigPoly(-1.0)), [])
        with self.assertRaises(ZeroPolynomialError):
            positive_sectors(TrigPoly(0.0))

    def test_roots_and_minimum(self) -> None:
        roots = trig_roots(COS2)
        expected = [np.pi / 4, 3 * np.pi / 4, 5 * np.pi / 4, 7 * np.pi / 4]
        np.testing.assert_allclose(roots, expected, atol=1e-9)
        argmin, value = global_minimum(TrigPoly.from_coefficients(1.0, [0.5]))
        self.assertAlmostEqual(argmin, np.pi, places=9)
        self.assertAlmostEqual(value, 0.5, places=12)

    def test_widest_negative_width(self) -> None:
        self.assertAlmostEqual(widest_negative_width(2.0, 2), np.pi / 3, places=9)
        self.assertEqual(widest_negative_width(0.5, 2), 0.0)

    def test_csv_output(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            g_path = os.path.join(tmp, "g.csv")
            sector_path = os.path.join(tmp, "sectors.csv")
            write_g_csv(COS2, g_path, samples=16)
            write_sector_csv(COS2, sector_path)
            g_data = np.loadtxt(g_path, delimiter=",")
            sectors = np.loadtxt(sector_path, delimiter=",")
        self.assertEqual(g_data.shape, (16, 2))
        self.assertEqual(sectors.shape, (4, 3))


class TestSectorCondition(TestCase):
    def test_wide_sector(self) -> None:
        report = sector_condition(example_model(4, 2, 3.0), 1, (-1.0, 0.0))
        self.assertTrue(report.holds)
        self.assertEqual(report.mode, "leading")
        self.assertEqual(report.weight, 4)
        self.assertAlmostEqual(report.required_width, np.pi / 4)
        self.assertAlmostEqual(report.best_sector.width, math.acos(1 / 3), places=6)
        self.assertAlmostEqual(report.alternative_widths["pi/(m-2)"], np.pi / 2)

    def test_narrow_sector(self) -> None:
        report = sector_condition(example_model(4, 2, 1.0), 1, (-1.0, 0.0))
        self.assertFalse(report.holds)

    def test_required_width_override(self) -> None:
        report = sector_condition(
            example_model(4, 2, 3.0), 1, (-1.0, 0.0), required_width=np.pi / 2
        )
        self.assertFalse(report.holds)

    def test_constrained_mode(self) -> None:
        report = sector_condition(levi_model(), 1, [1.0], mode="constrained")
        self.assertTrue(report.holds)
        self.assertAlmostEqual(report.best_sector.width, 2 * np.pi)
        report = sector_condition(levi_model(), 1, [-1.0], mode="constrained")
        self.assertFalse(report.holds)
        self.assertIsNone(report.best_sector)
        with self.assertRaises(ParameterError):
            sector_condition(levi_model(), 1, [1.0], c=0.0, mode="constrained")

    def test_invalid_input(self) -> None:
        with self.assertRaises(DimensionMismatchError):
            sector_condition(levi_model(), 1, [1.0, 0.0])
        with self.assertRaises(ParameterError):
            sector_condition(levi_model(), 1, [0.0])
        with self.assertRaises(ParameterError):
            sector_condition(levi_model(), 1, [1.0], mode="bogus")

    def test_leading_parts_divisible_by_modulus(self) -> None:
        # P = |w|² Q has at most 2(m − 2) sign changes on the circle
        rng = np.random.default_rng(17)
        nvars = (1, 1)
        w = Poly.variable(("w", 0), nvars)
        for m in (3, 4, 5, 6, 8):
            for _ in range(4):
                terms: Dict[Tuple[int, ...], complex] = {}
                for a in range(m - 1):
                    b = m - 2 - a
                    if a < b:
                        c = complex(rng.normal(), rng.normal())
                        terms[(0, a, b)], terms[(0, b, a)] = c, c.conjugate()
                    elif a == b:
                        terms[(0, a, b)] = complex(rng.normal())
                q = RealPoly(terms, nvars)
                p = RealPoly.from_poly(q * w * w.conjugate())
                model = ManifoldModel(1, 1, WeightVector((1,), (m,)), (p,))
                reports = [
                    sector_condition(model, 1, [sign], required_width=np.pi / (m - 1))
                    for sign in (1.0, -1.0)
                ]
                widest = max(r.best_sector.width for r in reports if r.best_sector is not None)
                self.assertGreaterEqual(widest, np.pi / (m - 1))
                self.assertTrue(any(r.holds for r in reports))
        with self.assertRaises(InfiniteWeightError):
            sector_condition(flat_model(), 1, [1.0])


class TestThresholds(TestCase):
    def test_values(self) -> None:
        for (k, p), (bp, sector) in {
            (4, 2): (2.0, math.sqrt(2)),
            (6, 2): (1.5, 2 / math.sqrt(3)),
            (6, 4): (6.0, 2.0),
        }.items():
            limits = thresholds(k, p)
            self.assertAlmostEqual(limits.bp_coef, bp)
            self.assertAlmostEqual(limits.sector_coef, sector)

    def test_invalid_pairs(self) -> None:
        for k, p in ((4, 3), (6, 6), (2, 2), (5, 2)):
            with self.assertRaises(ParameterError):
                thresholds(k, p)

    def test_barrier_at_threshold(self) -> None:
        barrier = barrier_construct(4, 2)
        self.assertAlmostEqual(barrier.a, math.sqrt(2))
        self.assertAlmostEqual(barrier.b, 0.5)
        self.assertAlmostEqual(barrier.min_value, 0.0, places=9)
        theta = np.linspace(0, 2 * np.pi, 11)
        expected = (np.cos(2 * theta) - 1 / math.sqrt(2)) ** 2
        np.testing.assert_allclose(barrier.g1(theta), expected, atol=1e-12)

    def test_barrier_below_threshold(self) -> None:
        self.assertAlmostEqual(barrier_construct(4, 2, 0.0).min_value, 0.5, places=9)
        with self.assertRaises(ParameterError):
            barrier_construct(4, 2, 1.5)
        with self.assertRaises(ParameterError):
            barrier_construct(6, 4)

    def test_iff_scan(self) -> None:
        for k, p in ((4, 2), (6, 2), (6, 4), (8, 2), (8, 6)):
            self.assertTrue(sector_iff_scan(k, p).consistent, f"k={k}, p={p}")

    def test_lemma_scan(self) -> None:
        rows = lemma_scan()
        self.assertTrue(all(row[4] for row in rows))
        self.assertIn((4, 2), [(row[0], row[1]) for row in rows])

    def test_xi_samples(self) -> None:
        self.assertEqual(len(xi_samples(1)), 2)
        self.assertEqual(len(xi_samples(2, count=4)), 4)
        self.assertEqual(xi_samples(2, count=4)[1][0], 0.0)
        samples = xi_samples(3, count=2, seed=1)
        self.assertEqual(len(samples), 8)
        for xi in samples:
            self.assertAlmostEqual(float(np.linalg.norm(xi)), 1.0)
        with self.assertRaises(ParameterError):
            xi_samples(0)
