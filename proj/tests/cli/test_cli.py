"""End-to-end checks of the topoembed command line."""

import json
import os
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

BIN = None


def run(*args, check=True):
    proc = subprocess.run([BIN, *map(str, args)], capture_output=True, text=True)
    if check and proc.returncode != 0:
        raise AssertionError(f"{args} exited {proc.returncode}\n{proc.stdout}\n{proc.stderr}")
    return proc


class CliTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = Path(cls.tmp.name)
        cls.dtm = cls.dir / "pp.tif"
        run("synth", "--scene", "peak-pit", "--seed", 3, "--out", cls.dtm)
        cls.model = cls.dir / "m1"
        run("train", "--dtm", cls.dtm, "--k", 1, "--scales", 30, "--locations", 200, "--steps", 4,
            "--batch", 4, "--out", cls.model)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def manifest(self, path):
        return json.loads(Path(f"{path}.manifest.json").read_text())

    def test_synth_outputs_and_determinism(self):
        for name in ("pp.tif", "pp.peak.csv", "pp.pit.csv", "pp.region.wkt", "pp.tif.manifest.json"):
            self.assertTrue((self.dir / name).exists(), name)
        a, b = self.dir / "a.tif", self.dir / "b.tif"
        run("synth", "--side", 129, "--seed", 9, "--out", a)
        run("synth", "--side", 129, "--seed", 9, "--out", b)
        self.assertEqual(a.read_bytes(), b.read_bytes())
        m = self.manifest(a)
        self.assertEqual(m["subcommand"], "synth")
        self.assertEqual(m["seed"], 9)

    def test_bad_side_is_usage_error(self):
        self.assertEqual(run("synth", "--side", 100, "--out", self.dir / "x.tif", check=False).returncode, 2)

    def test_missing_required_flag(self):
        self.assertEqual(run("train", check=False).returncode, 2)
        self.assertEqual(run("--help", check=False).returncode, 0)

    def test_train_manifest_records_resolved_weights(self):
        m = self.manifest(self.model)
        self.assertEqual(m["config"]["lambda-rec"], "1")
        self.assertEqual(m["config"]["lambda-adv"], "0")
        self.assertTrue(Path(f"{self.model}.json").exists())
        self.assertTrue(Path(f"{self.model}.report.csv").read_text().startswith("step,scale,l_p"))

    def test_single_scale_adversarial_is_rejected(self):
        proc = run("train", "--dtm", self.dtm, "--k", 1, "--adv", "--steps", 1, "--out", self.dir / "bad",
                   check=False)
        self.assertEqual(proc.returncode, 2)
        self.assertIn("k", proc.stderr)

    def test_adversarial_defaults(self):
        out = self.dir / "adv"
        run("train", "--dtm", self.dtm, "--k", 4, "--adv", "--scales", 30, "--locations", 50, "--steps", 2,
            "--batch", 2, "--out", out)
        m = self.manifest(out)
        self.assertEqual(m["config"]["lambda-rec"], "100")
        self.assertEqual(m["config"]["lambda-adv"], "1")

    def test_eval_writes_csv_and_markdown(self):
        out = self.dir / "eval.csv"
        proc = run("eval", "--model", "id", "--class-csv", self.dir / "pp.peak.csv", "--dtm", self.dtm,
                   "--n-train", 100, "--n-test", 40, "--seeds", 2, "--out", out)
        self.assertTrue(proc.stdout.startswith("| id |"))
        rows = out.read_text().splitlines()
        self.assertEqual(len(rows), 2)
        self.assertTrue(self.manifest(out)["config"]["n-train"] == "100")

    def test_eval_rejects_points_in_training_polygon(self):
        wkt = (self.dir / "pp.region.wkt").read_text().strip()
        proc = run("eval", "--model", "id", "--class-csv", self.dir / "pp.peak.csv", "--dtm", self.dtm,
                   "--n-train", 100, "--n-test", 40, "--seeds", 1, "--train-polygon", wkt,
                   "--out", self.dir / "leak.csv", check=False)
        self.assertEqual(proc.returncode, 2)

    def test_eval_capacity_error(self):
        proc = run("eval", "--model", "id", "--class-csv", self.dir / "pp.peak.csv", "--dtm", self.dtm,
                   "--n-train", 100000, "--n-test", 40, "--seeds", 1, "--out", self.dir / "big.csv", check=False)
        self.assertEqual(proc.returncode, 3)

    def test_scale_scan_missing_csv(self):
        proc = run("scale-scan", "--class-csv", self.dir / "nope.csv", "--dtm", self.dtm, "--out",
                   self.dir / "s.csv", check=False)
        self.assertEqual(proc.returncode, 2)

    def test_index_and_retrieve(self):
        idx = self.dir / "idx"
        run("index", "--model", self.model, "--coords-csv", self.dir / "pp.peak.csv", "--dtm", self.dtm,
            "--out", idx)
        first = Path(f"{idx}.csv").read_text().splitlines()[1]
        proc = run("retrieve", "--index", idx, "--model", self.model, "--dtm", self.dtm, "--points",
                   first.replace(",", ",", 1), "--k", 3)
        lines = proc.stdout.strip().splitlines()
        self.assertEqual(lines[0], "lon,lat,distance")
        self.assertEqual(len(lines), 4)
        lon, lat, dist = lines[1].split(",")
        self.assertEqual(f"{lon},{lat}", first)
        self.assertEqual(float(dist), 0.0)

        empty = run("retrieve", "--index", idx, "--model", self.model, "--dtm", self.dtm, "--points", first,
                    "--k", 0)
        self.assertEqual(empty.stdout.strip(), "")
        too_many = run("retrieve", "--index", idx, "--model", self.model, "--dtm", self.dtm, "--points", first,
                       "--k", 100000, check=False)
        self.assertEqual(too_many.returncode, 2)
        wrong_model = run("retrieve", "--index", idx, "--model", "id", "--dtm", self.dtm, "--points", first,
                          "--k", 1, check=False)
        self.assertEqual(wrong_model.returncode, 2)

    def test_probes_and_grid(self):
        probes = self.dir / "probes.json"
        run("train-probes", "--model", "id", "--class", f"peak={self.dir / 'pp.peak.csv'}", "--dtm", self.dtm,
            "--scales", 30, 60, "--n", 200, "--out", probes)
        data = json.loads(probes.read_text())
        self.assertEqual(len(data["probes"]), 2)
        first = (self.dir / "pp.peak.csv").read_text().splitlines()[1]
        lon, lat = (float(v) for v in first.split(","))
        bbox = f"{lon - 0.005},{lat - 0.005},{lon + 0.005},{lat + 0.005}"
        out = self.dir / "grid.geojson"
        run("grid-classify", "--model", "id", "--probes", probes, "--dtm", self.dtm, "--bbox", bbox,
            "--scales", 30, 60, "--stride", 40, "--out", out)
        fc = json.loads(out.read_text())
        self.assertEqual(fc["type"], "FeatureCollection")
        self.assertTrue(fc["features"])
        self.assertLessEqual({f["properties"]["scale"] for f in fc["features"]}, {30, 60})

    def test_config_file(self):
        cfg = self.dir / "synth.toml"
        out = self.dir / "cfg.tif"
        cfg.write_text(f'side = 65\nseed = 4\nout = "{out}"\n')
        run("--config", cfg, "synth")
        self.assertEqual(self.manifest(out)["config"]["side"], "65")


if __name__ == "__main__":
    BIN = os.path.abspath(sys.argv.pop(1))
    unittest.main(verbosity=2)
