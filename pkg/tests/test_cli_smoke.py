import csv
import io
import json
import math
import subprocess
import tempfile
import unittest
from pathlib import Path


REPO_ROOT = Path(__file__).resolve().parents[1]
CLI = REPO_ROOT / "gbdt_cli.py"

INDEFINITE_TRIPLE = json.dumps(
    {
        "n": 2,
        "A": [[[0, 1], [0, 0]], [[0, 0], [0, -1]]],
        "S0": [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]],
        "Pi0": [[[math.sqrt(2.0), 0], [0, 0]], [[0, 0], [math.sqrt(2.0), 0]]],
    }
)
BROKEN_TRIPLE = json.dumps({"n": 1, "A": [[[0, 1]]], "S0": [[[1, 0]]], "Pi0": [[[0, 2], [1, 0]]]})
ZERO_DRESSING_TRIPLE = json.dumps({"n": 1, "A": [[[0, 0]]], "S0": [[[1, 0]]], "Pi0": [[[0, 0], [0, 0]]]})


def run_cmd(*args, cwd=None, env=None):
    return subprocess.run(
        ["python3", str(CLI)] + [str(arg) for arg in args],
        cwd=cwd or REPO_ROOT,
        text=True,
        capture_output=True,
        env=env,
    )


def read_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], [[float(v) for v in row] for row in rows[1:]]


class CliSmokeTests(unittest.TestCase):
    def test_help(self):
        result = run_cmd("--help")
        self.assertEqual(result.returncode, 0, result.stderr)
        for sub in ("validate", "potential", "solve", "verify", "example"):
            self.assertIn(sub, result.stdout)

    def test_validate_jordan_example(self):
        result = run_cmd("validate", "--example", "2")
        self.assertEqual(result.returncode, 0, result.stderr)
        self.assertIn("S0 positive definite", result.stdout)
        self.assertIn("realness conditions: hold", result.stdout)

    def test_validate_indefinite_triple_warns(self):
        result = run_cmd("validate", "--triple-json", INDEFINITE_TRIPLE)
        self.assertEqual(result.returncode, 0, result.stderr)
        self.assertIn("not positive definite", result.stdout)

    def test_validate_identity_violation(self):
        result = run_cmd("validate", "--triple-json", BROKEN_TRIPLE)
        self.assertEqual(result.returncode, 1)
        self.assertIn("violated", result.stderr)

    def test_potential_jordan_grid(self):
        result = run_cmd("potential", "--example", "2", "--xgrid", "-1:1:0.5")
        self.assertEqual(result.returncode, 0, result.stderr)
        header, rows = read_csv(result.stdout)
        self.assertEqual(header, ["x", "u_re", "u_im", "min_eig_S", "identity_residual"])
        self.assertEqual([r[0] for r in rows], [-1.0, -0.5, 0.0, 0.5, 1.0])
        origin = rows[2]
        self.assertAlmostEqual(origin[1], -1.7320508, places=7)
        self.assertLessEqual(max(r[4] for r in rows), 1e-10)
        self.assertGreater(min(r[3] for r in rows), 0.0)

    def test_potential_sech_with_energy_column(self):
        result = run_cmd(
            "potential", "--example", "1", "--calA", "1", "--m1", "1", "--m2", "1",
            "--xgrid", "-1:1:0.5", "--hbar-vf", "2", "--energy", "0.5",
        )
        self.assertEqual(result.returncode, 0, result.stderr)
        header, rows = read_csv(result.stdout)
        self.assertEqual(header[-1], "U")
        origin = rows[2]
        self.assertAlmostEqual(origin[1], -2.0, places=10)
        self.assertAlmostEqual(origin[5], 4.5, places=10)

    def test_potential_gaussian_seed(self):
        result = run_cmd("potential", "--example", "2", "--seed", "gaussian:1,0,1", "--xgrid", "-1:1:0.5")
        self.assertEqual(result.returncode, 0, result.stderr)
        _, rows = read_csv(result.stdout)
        self.assertEqual(len(rows), 5)
        self.assertLessEqual(max(abs(r[2]) for r in rows), 1e-8)
        self.assertIn("identity drift", result.stderr)

    def test_solve_at_origin(self):
        result = run_cmd("solve", "--example", "2", "--x", "0", "--y", "0", "--h", "e1")
        self.assertEqual(result.returncode, 0, result.stderr)
        header, rows = read_csv(result.stdout)
        self.assertEqual(header, ["x", "y", "psi1_re", "psi1_im", "psi2_re", "psi2_im"])
        self.assertEqual(len(rows), 1)
        self.assertAlmostEqual(rows[0][3], -1.4142136, places=7)
        self.assertAlmostEqual(rows[0][5], 0.0, places=12)

    def test_solve_zero_h(self):
        result = run_cmd("solve", "--example", "2", "--xgrid", "-0.5:0.5:0.5", "--y", "0.3", "--h", "0")
        self.assertEqual(result.returncode, 0, result.stderr)
        _, rows = read_csv(result.stdout)
        self.assertEqual(len(rows), 3)
        for row in rows:
            self.assertEqual(row[2:], [0.0, 0.0, 0.0, 0.0])

    def test_verify_jordan_passes(self):
        with tempfile.TemporaryDirectory() as td:
            out = Path(td) / "report.json"
            result = run_cmd("verify", "--example", "2", "--out", out)
            self.assertEqual(result.returncode, 0, result.stderr)
            doc = json.loads(out.read_text(encoding="utf-8"))
        self.assertTrue(doc["passed"])
        self.assertIn("verification passed", result.stderr)

    def test_verify_random_triple_gaussian_seed(self):
        result = run_cmd(
            "verify", "--example", "3", "--n", "4", "--rng-seed", "7",
            "--seed", "gaussian:1,0,1", "--xgrid", "-1:1:0.5",
        )
        self.assertIn(result.returncode, (0, 1), result.stderr)
        doc = json.loads(result.stdout)
        self.assertLessEqual(doc["drift"], 1e-8)
        self.assertTrue(doc["criteria"]["identity"]["passed"])

    def test_verify_injected_error_fails(self):
        result = run_cmd("verify", "--example", "2", "--xgrid", "-1:1:0.5", "--inject-error")
        self.assertEqual(result.returncode, 1)
        doc = json.loads(result.stdout)
        self.assertFalse(doc["passed"])
        self.assertTrue(doc["injected_error"])

    def test_verify_injected_error_fails_for_zero_dressing(self):
        clean = run_cmd("verify", "--triple-json", ZERO_DRESSING_TRIPLE, "--xgrid", "-1:1:0.5")
        self.assertEqual(clean.returncode, 0, clean.stderr)
        result = run_cmd("verify", "--triple-json", ZERO_DRESSING_TRIPLE, "--xgrid", "-1:1:0.5", "--inject-error")
        self.assertEqual(result.returncode, 1, result.stderr)
        self.assertFalse(json.loads(result.stdout)["passed"])

    def test_example_document_revalidates(self):
        with tempfile.TemporaryDirectory() as td:
            out = Path(td) / "triple.json"
            result = run_cmd("example", "4", "--h1", "1,1", "--h2", "0,1", "--out", out)
            self.assertEqual(result.returncode, 0, result.stderr)
            again = run_cmd("validate", "--triple", out)
        self.assertEqual(again.returncode, 0, again.stderr)
        self.assertIn("n = 2", again.stdout)

    def test_bad_grid_is_usage_error(self):
        result = run_cmd("potential", "--example", "2", "--xgrid", "1:0:0.1")
        self.assertEqual(result.returncode, 2)
        self.assertIn("config error", result.stderr)

    def test_random_example_needs_rng_seed(self):
        result = run_cmd("validate", "--example", "3", "--n", "3")
        self.assertEqual(result.returncode, 2)
        self.assertIn("--rng-seed", result.stderr)

    def test_config_file(self):
        with tempfile.TemporaryDirectory() as td:
            cfg = Path(td) / "run.yaml"
            cfg.write_text(
                "triple:\n  example: 2\nseed: zero\ngrids:\n  x: \"-1:1:0.5\"\ntolerances:\n  pde_residual: 1.0e-5\n",
                encoding="utf-8",
            )
            result = run_cmd("potential", "--config", cfg)
        self.assertEqual(result.returncode, 0, result.stderr)
        _, rows = read_csv(result.stdout)
        self.assertEqual(len(rows), 5)

    def test_invalid_config_file(self):
        with tempfile.TemporaryDirectory() as td:
            cfg = Path(td) / "run.yaml"
            cfg.write_text("method: euler\n", encoding="utf-8")
            result = run_cmd("validate", "--config", cfg, "--example", "2")
        self.assertEqual(result.returncode, 2)


if __name__ == "__main__":
    unittest.main()
