"""End-to-end checks of the fgpac command-line tool.

Usage: test_cli.py FGPAC_BINARY SCHEMA_DIR [unittest args]
"""

import json
import os
import random
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

import jsonschema

FGPAC = ""
SCHEMAS = Path()


def run(*args, env=None, check_code=0):
    proc = subprocess.run([FGPAC, *args], capture_output=True, text=True, env=env)
    if check_code is not None and proc.returncode != check_code:
        raise AssertionError(
            f"exit {proc.returncode} (wanted {check_code}) for {args}\nstdout:\n{proc.stdout}\nstderr:\n{proc.stderr}"
        )
    return proc


def schema(name):
    return json.loads((SCHEMAS / name).read_text())


def write_fixture(directory):
    """A small three-class, 8-feature set in the sparse text format, named like the yeast file."""
    rng = random.Random(5)
    lines = []
    for i in range(80):
        label = 1 + i % 3
        feats = [min(1.0, max(0.0, 0.2 * label + rng.gauss(0.0, 0.15))) for _ in range(8)]
        lines.append(f"{label} " + " ".join(f"{j + 1}:{v:.3f}" for j, v in enumerate(feats) if v != 0.0))
    (directory / "yeast").write_text("\n".join(lines) + "\n")


TRAIN_FLAGS = ["--iterations", "200", "--batch-size", "16", "--mc-samples", "50",
               "--lip-restarts", "1", "--lip-iterations", "50", "--lip-batch", "16",
               "--lip-checkpoint-every", "10"]


class CliTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = Path(cls.tmp.name)
        write_fixture(cls.dir)
        cls.report_schema = schema("bound_report.schema.json")

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def train(self, name, *extra):
        out = self.dir / f"{name}.json"
        run("--data-dir", str(self.dir), "-o", str(out), "train", "--dataset", "yeast", *TRAIN_FLAGS, *extra)
        report = json.loads(out.read_text())
        jsonschema.validate(report, self.report_schema)
        return report

    def test_dry_run_prints_config(self):
        proc = run("--dry-run", "train", "--dataset", "mushrooms", "--posterior", "gaussian")
        cfg = json.loads(proc.stdout)
        self.assertEqual(cfg["dataset"], "mushrooms")
        self.assertEqual(cfg["posterior"], "gaussian")

    def test_missing_data_dir_is_a_usage_error(self):
        env = dict(os.environ)
        env.pop("DATA_DIR", None)
        proc = run("--data-dir", str(self.dir / "absent"), "train", "--dataset", "yeast", check_code=2)
        self.assertIn("pass --data-dir or set DATA_DIR", proc.stderr)
        env["DATA_DIR"] = str(self.dir / "absent")
        proc = run("train", "--dataset", "yeast", env=env, check_code=2)
        self.assertIn("pass --data-dir or set DATA_DIR", proc.stderr)

    def test_global_options_after_subcommand(self):
        out = self.dir / "late_out.json"
        run("train", "--dataset", "yeast", *TRAIN_FLAGS, "--data-dir", str(self.dir), "-o", str(out))
        jsonschema.validate(json.loads(out.read_text()), self.report_schema)

    def test_unknown_row_lists_rows(self):
        proc = run("reproduce", "table9-nothing", check_code=2)
        self.assertIn("table1a-mushrooms", proc.stderr)

    def test_bad_flag_is_a_usage_error(self):
        run("train", "--dataset", "yeast", "--posterior", "student", check_code=2)
        run("train", "--no-such-flag", check_code=2)

    def test_train_is_deterministic(self):
        a = self.train("det_a")
        b = self.train("det_b")
        a.pop("created_at")
        b.pop("created_at")
        self.assertEqual(a, b)
        self.assertEqual(sum(e["share"] for e in a["delta_ledger"]), a["delta"])

    def test_certify_reproduces_the_training_certificate(self):
        ckpt = self.dir / "g.ckpt"
        trained = self.train("g", "--posterior", "gaussian", "--checkpoint", str(ckpt))
        out = self.dir / "g_cert.json"
        run("--data-dir", str(self.dir), "-o", str(out), "certify", "--checkpoint", str(ckpt),
            "--dataset", "yeast", "--mc-samples", "50", "--lip-restarts", "1", "--lip-iterations", "50",
            "--lip-batch", "16", "--lip-checkpoint-every", "10")
        cert = json.loads(out.read_text())
        jsonschema.validate(cert, self.report_schema)
        self.assertEqual(cert["delta_ledger"], trained["delta_ledger"])
        self.assertAlmostEqual(cert["value"], trained["value"], places=9)

    def test_certify_other_families(self):
        ckpt = self.dir / "d.ckpt"
        self.train("d", "--checkpoint", str(ckpt))
        for family in ["catoni", "supermartingale", "catoni-fast-rate", "reverse-kl", "hellinger", "tv"]:
            out = self.dir / f"d_{family}.json"
            run("--data-dir", str(self.dir), "-o", str(out), "certify", "--checkpoint", str(ckpt),
                "--dataset", "yeast", "--bound", family, "--lip-restarts", "1", "--lip-iterations", "50",
                "--lip-batch", "16", "--lip-checkpoint-every", "10")
            report = json.loads(out.read_text())
            jsonschema.validate(report, self.report_schema)
            self.assertEqual(report["family"], family)
        proc = run("--data-dir", str(self.dir), "certify", "--checkpoint", str(ckpt), "--dataset", "yeast",
                   "--bound", "mcallester", check_code=2)
        self.assertIn("infinite", proc.stderr)

    def test_lipschitz_output(self):
        out = self.dir / "lip.json"
        run("--data-dir", str(self.dir), "-o", str(out), "lipschitz", "--dataset", "yeast",
            "--lip-restarts", "1", "--lip-iterations", "50", "--lip-batch", "16", "--lip-checkpoint-every", "10")
        jsonschema.validate(json.loads(out.read_text()), schema("lipschitz_estimate.schema.json"))

    def test_student_output(self):
        out = self.dir / "student.json"
        run("-o", str(out), "student", "--alpha-stable", "1.5", "--d", "10", "--sigma", "0.1",
            "--mu-dist", "0.5", "--m", "1000", "--lip", "1.0", "--risk", "0.1", "--samples", "10000")
        report = json.loads(out.read_text())
        jsonschema.validate(report, self.report_schema)
        self.assertEqual(report["family"], "student")

    def test_scalar_and_avx2_agree(self):
        out_s = self.dir / "s.json"
        out_v = self.dir / "v.json"
        base = ["--data-dir", str(self.dir)]
        run(*base, "--isa", "scalar", "-o", str(out_s), "train", "--dataset", "yeast", *TRAIN_FLAGS)
        proc = subprocess.run([FGPAC, *base, "--isa", "avx2", "-o", str(out_v), "train", "--dataset", "yeast",
                               *TRAIN_FLAGS], capture_output=True, text=True)
        if proc.returncode != 0:
            self.skipTest("AVX2 kernels unavailable: " + proc.stderr.strip())
        s = json.loads(out_s.read_text())
        v = json.loads(out_v.read_text())
        self.assertAlmostEqual(s["value"], v["value"], delta=1e-6)


if __name__ == "__main__":
    FGPAC = sys.argv[1]
    SCHEMAS = Path(sys.argv[2])
    unittest.main(argv=[sys.argv[0], *sys.argv[3:]], verbosity=2)
