"""
End-to-end tests for the mrlr command line.
"""
import contextlib
import io
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np

from mrlr_tensor.cli import build_parser, main
from mrlr_tensor.constants import CsvSchema
from mrlr_tensor.domain import DenseTensor, FactorSet, ModePartition, MrlrModel, MrlrStage
from mrlr_tensor.tensor_io import read_model, read_tensor, write_model, write_tensor


def run(*argv):
    """Run the CLI and return (exit code, stdout)."""
    out = io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(io.StringIO()):
        code = main(list(argv))
    return code, out.getvalue()


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def path(self, name: str) -> str:
        return str(self.tmp / name)

    def random_tensor_file(self, spec="4,5,6/2/0", name="x.mrlr") -> str:
        path = self.path(name)
        code, _ = run("generate", "--random-cp", spec, "--out", path, "--no-color")
        self.assertEqual(code, 0)
        return path


class TestParser(unittest.TestCase):
    """Test argument parsing."""

    def test_shared_flags(self):
        """Global flags are accepted after every subcommand."""
        args = build_parser().parse_args(
            ["sweep", "--in", "x", "--threads", "3", "--seed", "7", "--tol", "1e-6", "--no-timing"]
        )
        self.assertEqual(args.threads, 3)
        self.assertEqual(args.seed, 7)
        self.assertEqual(args.tol, 1e-6)
        self.assertFalse(args.record_timing)
        self.assertEqual(args.plan, "paper-f3")

    def test_unset_flags_are_none(self):
        """Flags left out do not override the configuration."""
        args = build_parser().parse_args(["decompose", "--in", "x"])
        self.assertIsNone(args.threads)
        self.assertIsNone(args.reverse)
        self.assertIsNone(args.record_timing)
        self.assertEqual(args.partitions, "auto")

    def test_usage_errors_exit_one(self):
        """Missing arguments and unknown commands exit with 1."""
        self.assertEqual(run()[0], 1)
        self.assertEqual(run("decompose")[0], 1)
        self.assertEqual(run("compress", "--in", "x")[0], 1)


class TestGenerate(CliTestCase):
    """Test 'mrlr generate'."""

    def test_function_defaults(self):
        """The built-in function writes a 100 x 100 x 100 tensor."""
        path = self.path("f3.mrlr")
        code, _ = run("generate", "--function", "paper-f3", "--out", path, "--no-color")
        self.assertEqual(code, 0)
        with open(path, "rb") as f:
            self.assertEqual(f.readline(), b"MRLR1 3 100 100 100\n")

    def test_function_alias(self):
        """'f3' names the same function as 'paper-f3'."""
        paths = []
        for name in ("paper-f3", "f3"):
            path = self.path(f"{name}.mrlr")
            code, _ = run("generate", "--function", name, "--subsample", "5,5,5", "--out", path, "--no-color")
            self.assertEqual(code, 0)
            paths.append(path)
        self.assertEqual(read_tensor(paths[0]).shape, (5, 5, 5))
        self.assertEqual(Path(paths[0]).read_bytes(), Path(paths[1]).read_bytes())

    def test_grid_and_subsample(self):
        """--grid sets every axis; --subsample keeps evenly spaced indices."""
        path = self.path("small.mrlr")
        code, _ = run("generate", "--grid", "-1,0.5,5", "--subsample", "3,3,2", "--out", path, "--no-color")
        self.assertEqual(code, 0)
        X = read_tensor(path)
        self.assertEqual(X.shape, (3, 3, 2))
        # x1 = -1, x2 = 0, x3 = 1 at index (0, 1, 1)
        self.assertAlmostEqual(X.to_array()[0, 1, 1], np.exp(-1.0))

    def test_random_cp(self):
        """--random-cp writes the requested shape deterministically."""
        a = self.random_tensor_file("6,7,8/2/0", "a.mrlr")
        b = self.random_tensor_file("6,7,8/2/0", "b.mrlr")
        self.assertEqual(read_tensor(a).shape, (6, 7, 8))
        self.assertEqual(Path(a).read_bytes(), Path(b).read_bytes())

    def test_bad_specs(self):
        """Malformed grid and random-cp specs exit with 1."""
        self.assertEqual(run("generate", "--grid", "0,1", "--out", self.path("g"))[0], 1)
        self.assertEqual(run("generate", "--random-cp", "6,7/x/0", "--out", self.path("r"))[0], 1)
        self.assertEqual(run("generate", "--random-cp", "6,7/1/0", "--grid", "0,1,3", "--out", self.path("r"))[0], 1)


class TestDecompose(CliTestCase):
    """Test 'mrlr decompose'."""

    def test_auto_plan_with_outputs(self):
        """Regular partitions with one rank each; writes a model and a per-stage report."""
        tensor = self.random_tensor_file()
        model_path, report_path = self.path("m.mrlrm"), self.path("r.csv")
        code, _ = run(
            "decompose", "--in", tensor, "--ranks", "1,2", "--max-sweeps", "20",
            "--model-out", model_path, "--report-out", report_path, "--no-color",
        )
        self.assertEqual(code, 0)
        model = read_model(model_path)
        self.assertEqual(model.ranks, (1, 2))
        # {{1},{2,3}} at rank 1 then the identity at rank 2
        self.assertEqual(model.n_params, (4 + 30) + 2 * 15)
        lines = Path(report_path).read_text().splitlines()
        self.assertEqual(lines[0], ",".join(CsvSchema.COLUMNS))
        self.assertEqual([line.split(",")[2] for line in lines[1:]], ["34", "64"])

    def test_explicit_plan_and_partitions(self):
        """Plan specs carry their ranks; partition lists take --ranks."""
        tensor = self.random_tensor_file()
        self.assertEqual(run("decompose", "--in", tensor, "--partitions", "2|1,3@1;1|2|3@1", "--no-color")[0], 0)
        self.assertEqual(
            run("decompose", "--in", tensor, "--partitions", "1,2|3;1|2|3", "--ranks", "1,1", "--no-color")[0], 0
        )

    def test_report_to_stdout(self):
        """'-' writes the report CSV to stdout."""
        tensor = self.random_tensor_file()
        code, out = run("decompose", "--in", tensor, "--ranks", "1,1", "--report-out", "-", "--no-color")
        self.assertEqual(code, 0)
        self.assertTrue(out.startswith("method,stage_ranks,params,nfe"))
        self.assertEqual(len(out.splitlines()), 3)

    def test_exit_codes(self):
        """Parse errors exit 1, invalid partitions 2 and numerical failures 3."""
        tensor = self.random_tensor_file()
        self.assertEqual(run("decompose", "--in", tensor, "--no-color")[0], 1)
        self.assertEqual(run("decompose", "--in", tensor, "--partitions", "1,2|3@1", "--ranks", "1")[0], 1)
        self.assertEqual(run("decompose", "--in", tensor, "--partitions", "1|1,3", "--ranks", "1")[0], 2)
        self.assertEqual(run("decompose", "--in", tensor, "--partitions", "1,2|3;1|2|3", "--ranks", "1")[0], 2)
        self.assertEqual(run("decompose", "--in", self.path("missing.mrlr"), "--ranks", "1,1")[0], 1)

        zero = self.path("zero.mrlr")
        write_tensor(zero, DenseTensor.zeros((3, 3, 3)))
        self.assertEqual(run("decompose", "--in", zero, "--ranks", "1,1")[0], 3)

    def test_truncated_input(self):
        """A truncated tensor file exits 1 and logs the byte counts."""
        tensor = self.random_tensor_file()
        Path(tensor).write_bytes(Path(tensor).read_bytes()[:-8])
        with patch("mrlr_tensor.cli.logger") as mock_logger:
            code, _ = run("decompose", "--in", tensor, "--ranks", "1,1")
        self.assertEqual(code, 1)
        message = mock_logger.error.call_args[0][0]
        self.assertIn("expected_bytes: 960", message)
        self.assertIn("actual_bytes: 952", message)

    def test_config_file(self):
        """A YAML config is applied; invalid values exit 1."""
        tensor = self.random_tensor_file()
        config = self.tmp / "config.yaml"
        config.write_text("als:\n  max_sweeps: 5\nrefinement_cycles: 1\n")
        code, out = run("decompose", "--in", tensor, "--ranks", "1,1", "-c", str(config), "--report-out", "-")
        self.assertEqual(code, 0)
        self.assertIn("mrlr-refined", out)

        config.write_text("threads: 0\n")
        self.assertEqual(run("decompose", "--in", tensor, "--ranks", "1,1", "-c", str(config))[0], 1)


class TestInfo(CliTestCase):
    """Test 'mrlr info'."""

    def video_model(self, rank: int) -> MrlrModel:
        shape = (9, 36, 54, 3)
        partitions = [
            ModePartition(((1, 2), (3, 4))),
            ModePartition(((1,), (2,), (3, 4))),
            ModePartition.identity(4),
        ]
        ranks = [1, 1, rank]
        return MrlrModel(shape, tuple(
            MrlrStage(p, FactorSet.zeros(p.group_sizes(shape), r)) for p, r in zip(partitions, ranks)
        ))

    def test_model_cumulative_params(self):
        """Stage params are 486, 207 and 102 R with running totals."""
        path = self.path("video.mrlrm")
        write_model(path, self.video_model(3))
        code, out = run("info", "--in", path)
        self.assertEqual(code, 0)
        lines = out.splitlines()
        self.assertIn("shape 9 x 36 x 54 x 3", lines)
        self.assertIn(f"params {486 + 207 + 306}", lines)
        self.assertIn("plan 1,2|3,4@1;1|2|3,4@1;1|2|3|4@3", lines)
        self.assertIn("stage 1 partition 1,2|3,4 rank 1 params 486 cumulative 486", lines)
        self.assertIn("stage 2 partition 1|2|3,4 rank 1 params 207 cumulative 693", lines)
        self.assertIn("stage 3 partition 1|2|3|4 rank 3 params 306 cumulative 999", lines)

    def test_tensor(self):
        """Tensor files report shape, entries and norm."""
        path = self.path("t.mrlr")
        write_tensor(path, DenseTensor((2,), [3.0, 4.0]))
        code, out = run("info", "--in", path)
        self.assertEqual(code, 0)
        self.assertEqual(out.splitlines()[1:], ["shape 2", "entries 2", "norm 5"])

    def test_reference_nfe(self):
        """With --reference each stage line ends with its cumulative NFE."""
        tensor = self.random_tensor_file()
        model_path = self.path("m.mrlrm")
        self.assertEqual(run("decompose", "--in", tensor, "--ranks", "1,2", "--model-out", model_path)[0], 0)
        code, out = run("info", "--in", model_path, "--reference", tensor)
        self.assertEqual(code, 0)
        stage_lines = [line for line in out.splitlines() if line.startswith("stage ")]
        errors = [float(line.rsplit(" ", 1)[1]) for line in stage_lines]
        self.assertEqual(len(errors), 2)
        self.assertLessEqual(errors[1], errors[0] + 1e-12)

    def test_unknown_magic(self):
        """Unrecognized files exit 1."""
        path = self.tmp / "junk"
        path.write_bytes(b"junk")
        self.assertEqual(run("info", "--in", str(path))[0], 1)


class TestSweep(CliTestCase):
    """Test 'mrlr sweep'."""

    def test_csv_is_reproducible(self):
        """Identical command lines with --no-timing give byte-identical CSV."""
        tensor = self.random_tensor_file("5,4,3/2/1")
        outputs = []
        for name in ("a.csv", "b.csv"):
            out = self.path(name)
            code, _ = run(
                "sweep", "--in", tensor, "--plan", "1,2|3@1;1|2|3@1", "--sweep", "1:3",
                "--baseline", "--max-sweeps", "20", "--no-timing", "--out", out,
            )
            self.assertEqual(code, 0)
            outputs.append(Path(out).read_bytes())
        self.assertEqual(outputs[0], outputs[1])

        lines = outputs[0].decode().splitlines()
        self.assertEqual(lines[0], ",".join(CsvSchema.COLUMNS))
        methods = [line.split(",")[0] for line in lines[1:]]
        self.assertEqual(methods[:3], ["mrlr"] * 3)
        self.assertTrue(all(m == "parafac" for m in methods[3:]))
        self.assertTrue(all(line.split(",")[5] == "0" for line in lines[1:]))

    def test_explicit_baseline_and_reverse(self):
        """--baseline-ranks implies a baseline; --reverse labels rows mrlr-reverse."""
        tensor = self.random_tensor_file("5,4,3/2/1")
        code, out = run(
            "sweep", "--in", tensor, "--plan", "1,2|3@1;1|2|3@1", "--sweep", "1:2",
            "--baseline-ranks", "1,2", "--reverse", "--max-sweeps", "10",
        )
        self.assertEqual(code, 0)
        methods = [line.split(",")[0] for line in out.splitlines()[1:]]
        self.assertEqual(methods, ["mrlr-reverse", "mrlr-reverse", "parafac", "parafac"])

    def test_coarse_ranks(self):
        """--coarse-ranks sweeps the earlier stages too."""
        tensor = self.random_tensor_file("5,4,3/2/1")
        code, out = run(
            "sweep", "--in", tensor, "--plan", "1,2|3@1;1|2|3@1", "--sweep", "1:2",
            "--coarse-ranks", "1,2", "--max-sweeps", "10",
        )
        self.assertEqual(code, 0)
        ranks = sorted(line.split(",")[1] for line in out.splitlines()[1:])
        self.assertEqual(ranks, ["1+1", "1+2", "2+1", "2+2"])

    def preset_rows(self, shape, preset):
        """Sweep ranks 1..2 of ``preset`` on a random tensor of ``shape``; return (stage_ranks, params)."""
        tensor = self.random_tensor_file(f"{','.join(map(str, shape))}/2/0", f"{preset}.mrlr")
        code, out = run(
            "sweep", "--in", tensor, "--plan", preset, "--sweep", "1:2",
            "--max-sweeps", "3", "--no-timing", "--no-color",
        )
        self.assertEqual(code, 0)
        lines = out.splitlines()
        self.assertEqual(lines[0], ",".join(CsvSchema.COLUMNS))
        return [(line.split(",")[1], int(line.split(",")[2])) for line in lines[1:]]

    def test_video_preset(self):
        """9 x 36 x 54 x 3 video stages cost 486 + 207 + 102 R params."""
        rows = self.preset_rows((9, 36, 54, 3), "video")
        self.assertEqual(rows, [("1+1+1", 486 + 207 + 102), ("1+1+2", 486 + 207 + 204)])

    def test_amino_presets(self):
        """5 x 201 x 61: the 201 x 305 unfolding costs 506, the 1005 x 61 one 1066, the full stage 267 R."""
        self.assertEqual(self.preset_rows((5, 201, 61), "amino-res1"), [("1+1", 506 + 267), ("1+2", 506 + 534)])
        self.assertEqual(self.preset_rows((5, 201, 61), "amino-res2"), [("1+1", 1066 + 267), ("1+2", 1066 + 534)])

    def test_bad_range(self):
        """A descending range exits 1."""
        tensor = self.random_tensor_file()
        self.assertEqual(run("sweep", "--in", tensor, "--sweep", "5:1")[0], 1)


if __name__ == "__main__":
    unittest.main()
