"""
Tests for configuration loading, validation and precedence.
"""
import os
import tempfile
import unittest
from argparse import Namespace
from pathlib import Path
from unittest.mock import patch

from pydantic import ValidationError

from mrlr_tensor.config_validation import AlsConfig, RunConfig, load_config, validate_and_parse_config
from mrlr_tensor.constants import AlsDefaults, EnvVars
from mrlr_tensor.exceptions import ConfigurationError


def cli_args(**overrides) -> Namespace:
    """Namespace shaped like the CLI's, with every override flag unset."""
    values = dict(
        max_sweeps=None, tol=None, seed=None, restarts=None,
        threads=None, refinement_cycles=None, reverse=None, record_timing=None,
    )
    values.update(overrides)
    return Namespace(**values)


class TestSchema(unittest.TestCase):
    """Test the pydantic configuration models."""

    def test_defaults(self):
        config = RunConfig()
        self.assertEqual(config.als.max_sweeps, AlsDefaults.MAX_SWEEPS)
        self.assertEqual(config.als.rel_tol, AlsDefaults.REL_TOL)
        self.assertEqual(config.threads, 1)
        self.assertEqual(config.refinement_cycles, 0)
        self.assertFalse(config.reverse)
        self.assertTrue(config.record_timing)

    def test_als_bounds(self):
        """Non-positive sweeps or restarts, negative or non-finite tolerances are rejected."""
        for bad in (
            {"max_sweeps": 0}, {"restarts": 0}, {"rel_tol": -1.0},
            {"rel_tol": float("nan")}, {"rel_tol": float("inf")}, {"seed": -1},
        ):
            with self.subTest(**bad):
                with self.assertRaises(ValidationError):
                    AlsConfig(**bad)

    def test_unknown_als_key(self):
        """Typos in the als section are errors."""
        with self.assertRaises(ConfigurationError):
            validate_and_parse_config({"als": {"max_sweep": 10}})

    def test_validation_error_context(self):
        """Every failing location is listed."""
        with self.assertRaises(ConfigurationError) as ctx:
            validate_and_parse_config({"threads": 0, "refinement_cycles": -1})
        errors = ctx.exception.context["validation_errors"]
        self.assertEqual(len(errors), 2)
        self.assertTrue(any("threads" in e for e in errors))


class TestLoadConfig(unittest.TestCase):
    """Test YAML loading and precedence: CLI > YAML > MRLR_THREADS > defaults."""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self._env = patch.dict(os.environ, {}, clear=False)
        self._env.start()
        os.environ.pop(EnvVars.THREADS, None)

    def tearDown(self):
        self._env.stop()
        self._tmp.cleanup()

    def write(self, text: str) -> str:
        path = self.tmp / "config.yaml"
        path.write_text(text, encoding="utf-8")
        return str(path)

    def test_no_file(self):
        """Without a file or flags the defaults apply."""
        self.assertEqual(load_config(None, cli_args()), RunConfig())

    def test_yaml_values(self):
        config = load_config(self.write("als:\n  max_sweeps: 7\n  seed: 3\nthreads: 2\nreverse: true\n"), cli_args())
        self.assertEqual(config.als.max_sweeps, 7)
        self.assertEqual(config.als.seed, 3)
        self.assertEqual(config.als.rel_tol, AlsDefaults.REL_TOL)
        self.assertEqual(config.threads, 2)
        self.assertTrue(config.reverse)

    def test_cli_overrides_yaml(self):
        """Explicit flags win over the file; unset flags leave it alone."""
        path = self.write("als:\n  max_sweeps: 7\n  seed: 3\nthreads: 2\n")
        config = load_config(path, cli_args(max_sweeps=9, tol=1e-5, threads=4, record_timing=False))
        self.assertEqual(config.als.max_sweeps, 9)
        self.assertEqual(config.als.rel_tol, 1e-5)
        self.assertEqual(config.als.seed, 3)
        self.assertEqual(config.threads, 4)
        self.assertFalse(config.record_timing)

    def test_env_threads_fallback(self):
        """MRLR_THREADS applies only when neither the file nor a flag sets threads."""
        os.environ[EnvVars.THREADS] = "6"
        self.assertEqual(load_config(None, cli_args()).threads, 6)
        self.assertEqual(load_config(self.write("threads: 2\n"), cli_args()).threads, 2)
        self.assertEqual(load_config(None, cli_args(threads=3)).threads, 3)

    def test_invalid_env_threads(self):
        os.environ[EnvVars.THREADS] = "many"
        with self.assertRaises(ConfigurationError):
            load_config(None, cli_args())

    def test_empty_file(self):
        self.assertEqual(load_config(self.write(""), cli_args()), RunConfig())

    def test_missing_file(self):
        with self.assertRaises(ConfigurationError) as ctx:
            load_config(str(self.tmp / "missing.yaml"), cli_args())
        self.assertEqual(ctx.exception.exit_code, 1)

    def test_invalid_yaml(self):
        with self.assertRaises(ConfigurationError):
            load_config(self.write("als: [unclosed\n"), cli_args())

    def test_non_mapping(self):
        with self.assertRaises(ConfigurationError):
            load_config(self.write("- 1\n- 2\n"), cli_args())

    def test_non_mapping_als_section(self):
        with self.assertRaises(ConfigurationError):
            load_config(self.write("als: 5\n"), cli_args(seed=1))

    def test_sample_config_is_valid(self):
        """The shipped config.sample.yaml loads and matches the defaults."""
        sample = Path(__file__).resolve().parent.parent / "config.sample.yaml"
        self.assertEqual(load_config(str(sample), cli_args()), RunConfig())


if __name__ == "__main__":
    unittest.main()
