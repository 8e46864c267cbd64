import json
import os
from typing import Any, Dict, List
from unittest import TestCase

from click.testing import CliRunner, Result

from crext import __version__
from crext.cli import cli, parse_a_range
from crext.custom_exceptions import ParameterError


def run(args: List[str]) -> Result:
    return CliRunner().invoke(cli, args)


def last_json(result: Result) -> Dict[str, Any]:
    lines = [line for line in result.output.splitlines() if line.strip()]
    return json.loads(lines[-1])


class TestCompare(TestCase):
    def test_default_range(self) -> None:
        result = run(["compare", "--k", "4", "--p", "2"])
        self.assertEqual(result.exit_code, 0, result.output)
        report = last_json(result)
        self.assertEqual(report["command"], "compare")
        self.assertEqual(report["version"], __version__)
        self.assertAlmostEqual(report["thresholds"]["bp_coef"], 2.0)
        rows = {row["a"]: row for row in report["rows"]}
        self.assertEqual(len(rows), 5)
        self.assertAlmostEqual(rows[1.0]["barrier_min"], 0.25, places=9)
        self.assertIsNone(rows[2.0]["barrier_min"])
        self.assertTrue(rows[2.0]["sector_opens_below"])
        self.assertFalse(rows[2.0]["bp_opens_below"])
        self.assertTrue(rows[3.0]["extends_by_bracket"])
        self.assertTrue(rows[3.0]["cones"]["bp_in_sector"])
        self.assertFalse(rows[1.8]["extends_by_bracket"])
        self.assertTrue(rows[1.8]["extends_by_sector"])
        self.assertEqual(report["notes"], [])

    def test_range_syntax(self) -> None:
        result = run(["compare", "--k", "6", "--p", "2", "--a-range", "1:2:3"])
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual([row["a"] for row in last_json(result)["rows"]], [1.0, 1.5, 2.0])

    def test_typo_note(self) -> None:
        result = run(["compare", "--k", "6", "--p", "4"])
        self.assertEqual(result.exit_code, 0, result.output)
        report = last_json(result)
        self.assertEqual(len(report["notes"]), 1)
        limits = report["thresholds"]
        self.assertAlmostEqual(limits["bp_coef"] / limits["sector_coef"], 3.0)

    def test_invalid_pair(self) -> None:
        result = run(["compare", "--k", "4", "--p", "3"])
        self.assertEqual(result.exit_code, 2)
        self.assertEqual(last_json(result)["error"]["type"], "ParameterError")

    def test_invalid_range(self) -> None:
        self.assertEqual(run(["compare", "--k", "4", "--p", "2", "--a-range", "x"]).exit_code, 2)
        self.assertEqual(run(["compare", "--k", "4", "--p", "2", "--a-range=-1"]).exit_code, 2)

    def test_outputs(self) -> None:
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(
                cli,
                [
                    "compare",
                    "--k",
                    "4",
                    "--p",
                    "2",
                    "--a-range",
                    "1,3",
                    "--json",
                    "out.json",
                    "--csv-dir",
                    "csv",
                ],
            )
            self.assertEqual(result.exit_code, 0, result.output)
            with open("out.json", encoding="utf-8") as f:
                self.assertEqual(json.load(f)["command"], "compare")
            self.assertEqual(sorted(os.listdir("csv")), ["g_k4_p2_a1.csv", "g_k4_p2_a3.csv"])


class TestAnalyze(TestCase):
    def test_levi(self) -> None:
        result = run(["analyze", "levi"])
        self.assertEqual(result.exit_code, 0, result.output)
        report = last_json(result)
        self.assertEqual(report["filtration"]["dims"], [2, 3])
        self.assertEqual(report["model"]["source"], "levi")
        direction = report["directions"][0]
        self.assertEqual(direction["blocks"][0]["pluriharmonic"], [False])
        holds = [entry["holds"] for entry in direction["sectors"]]
        self.assertEqual(holds, [True, False])

    def test_mainexample(self) -> None:
        result = run(["analyze", "mainexample", "--cap", "4", "--xi-count", "4"])
        self.assertEqual(result.exit_code, 0, result.output)
        report = last_json(result)
        self.assertEqual(report["filtration"]["hormander_numbers"], [[2, 1], [4, 1]])
        self.assertEqual([d["direction"] for d in report["directions"]], [1, 2])
        self.assertEqual(report["options"]["xi_count"], 4)
        first = report["directions"][0]
        self.assertNotIn("error", first)
        self.assertFalse(first["seminormal"])
        self.assertEqual(first["blocks"][0]["pluriharmonic"], [False])
        for entry in first["sectors"]:
            if entry["block"] == 1:
                self.assertEqual(entry["holds"], entry["xi"][0] > 0)
            else:
                self.assertIsNone(entry["holds"])
        self.assertTrue(report["directions"][1]["seminormal"])

    def test_csv_output(self) -> None:
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(cli, ["analyze", "levi", "--csv-dir", "csv"])
            self.assertEqual(result.exit_code, 0, result.output)
            self.assertIn("w1_xi0_g.csv", os.listdir("csv"))

    def test_missing_file(self) -> None:
        result = run(["analyze", "no/such/spec.mfd"])
        self.assertEqual(result.exit_code, 2)
        self.assertEqual(last_json(result)["error"]["type"], "ManifoldSpecError")


class TestDisc(TestCase):
    def test_levi_polynomial_family(self) -> None:
        result = run(["disc", "levi", "--alpha", "1", "--grid", "64"])
        self.assertEqual(result.exit_code, 0, result.output)
        report = last_json(result)
        self.assertAlmostEqual(report["hopf"]["coefficient"], -2.0, places=6)
        self.assertTrue(report["hopf"]["sign_ok"])
        self.assertEqual(report["notes"], [])
        self.assertEqual(report["disc"]["N"], 64)

    def test_example_with_covector(self) -> None:
        result = run(["disc", "example", "--xi=-1,0.9", "--grid", "256"])
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertTrue(last_json(result)["hopf"]["sign_ok"])

    def test_flat(self) -> None:
        result = run(["disc", "flat", "--grid", "64", "--sweep"])
        self.assertEqual(result.exit_code, 0, result.output)
        report = last_json(result)
        self.assertFalse(report["hopf"]["sign_ok"])
        self.assertEqual(report["notes"], ["no transversal gain"])
        self.assertIsNone(report["sweep"])

    def test_fgamma_and_csv(self) -> None:
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(
                cli,
                [
                    "disc",
                    "levi",
                    "--grid",
                    "256",
                    "--eta-grid",
                    "0.02,0.04,0.06,0.08",
                    "--fgamma",
                    "0.3",
                    "--csv-dir",
                    "discs",
                ],
            )
            self.assertEqual(result.exit_code, 0, result.output)
            self.assertEqual(len(os.listdir("discs")), 4)
        report = last_json(result)
        self.assertEqual(len(report["fgamma"]), 5)

    def test_bad_grid(self) -> None:
        result = run(["disc", "levi", "--grid", "100"])
        self.assertEqual(result.exit_code, 2)
        self.assertEqual(last_json(result)["error"]["type"], "ParameterError")

    def test_options_per_command(self) -> None:
        # solver options belong to disc, the covector seed to analyze
        self.assertEqual(run(["compare", "--k", "4", "--p", "2", "--grid", "64"]).exit_code, 2)
        self.assertEqual(run(["compare", "--k", "4", "--p", "2", "--seed", "1"]).exit_code, 2)
        self.assertEqual(run(["disc", "levi", "--seed", "1"]).exit_code, 2)
        self.assertEqual(run(["analyze", "levi", "--tol", "1e-9"]).exit_code, 2)
        result = run(["analyze", "levi", "--xi-count", "4", "--seed", "3"])
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(last_json(result)["options"]["seed"], 3)


class TestParsing(TestCase):
    def test_parse_a_range(self) -> None:
        self.assertEqual(parse_a_range("1,2.5"), [1.0, 2.5])
        self.assertEqual(parse_a_range("0:1:3"), [0.0, 0.5, 1.0])
        for raw in ("", "1:2", "1:2:0"):
            with self.assertRaises(ParameterError):
                parse_a_range(raw)
