"""
Centralized constants for MRLR Tensor.

This module contains solver defaults, file format details, CSV layout and the
preset experiment plans, so that the CLI, the config schema and the library
agree on a single set of values.
"""

from typing import Dict, List


# =============================================================================
# SOLVER DEFAULTS
# =============================================================================

class AlsDefaults:
    """Default alternating least squares settings."""

    MAX_SWEEPS = 200
    REL_TOL = 1e-8
    SEED = 0
    RESTARTS = 1

    # Gram eigenvalues below PINV_THRESHOLD * largest are treated as zero
    PINV_THRESHOLD = 1e-12

    # A fit error below EXACT_FIT_FLOOR * ||X||_F ends ALS early
    EXACT_FIT_FLOOR = 1e-14


class EngineDefaults:
    """Default multi-resolution engine settings."""

    REFINEMENT_CYCLES = 0

    # Residuals below RESIDUAL_FLOOR * ||X||_F get zero factors
    RESIDUAL_FLOOR = 1e-14

    THREADS = 1


class EnvVars:
    """Environment variables read by the CLI."""

    THREADS = "MRLR_THREADS"


# =============================================================================
# FILE FORMATS
# =============================================================================

class FileFormat:
    """Binary tensor and model file layout."""

    TENSOR_MAGIC = "MRLR1"
    MODEL_MAGIC = "MRLRM1"

    # 64-bit little-endian IEEE-754
    DTYPE = "<f8"
    ITEM_SIZE = 8

    STAGE_TAG = "stage"
    FACTOR_TAG = "factor"

    # Longest header line accepted before giving up on a file
    MAX_HEADER_BYTES = 1 << 16


class CsvSchema:
    """Column layout of report.csv and sweep.csv."""

    COLUMNS: List[str] = ["method", "stage_ranks", "params", "nfe", "sweeps", "seconds", "seed"]
    RANK_SEPARATOR = "+"
    REAL_FORMAT = "{:.9g}"


class Methods:
    """Method labels written to CSV rows."""

    MRLR = "mrlr"
    MRLR_REVERSE = "mrlr-reverse"
    PARAFAC = "parafac"

    # Appended to the method of the row holding the NFE after refinement cycles
    REFINED_SUFFIX = "-refined"


class SpecGrammar:
    """Separators of the shell-friendly spec mini-languages."""

    GROUP_SEPARATOR = "|"
    MODE_SEPARATOR = ","
    STAGE_SEPARATOR = ";"
    RANK_MARKER = "@"
    RANGE_SEPARATOR = ":"
    RANDOM_CP_SEPARATOR = "/"

    PARTITION_HELP = "groups separated by '|', 1-based modes by ',' (e.g. '1,2|3')"
    PLAN_HELP = "stages separated by ';', each '<partition>@<rank>' (e.g. '1,2|3@2;1|2|3@1')"
    RANGE_HELP = "inclusive rank range 'a:b' or 'a:b:step' (e.g. '1:40')"
    GRID_HELP = "'start,step,count' applied to every axis (e.g. '-5,0.1,100')"


# =============================================================================
# CLI
# =============================================================================

class ExitCodes:
    """Process exit codes used by the CLI."""

    OK = 0
    PARSE_OR_IO = 1
    VALIDATION = 2
    NUMERICAL = 3


# =============================================================================
# EXPERIMENTS
# =============================================================================

class FunctionGridDefaults:
    """Sampling grid of the three-variable test function."""

    START = -5.0
    STEP = 0.1
    # 100 points ending at 4.9, matching the 100 x 100 x 100 tensor size
    COUNT = 100
    AXES = 3

    FUNCTION_NAME = "paper-f3"
    FUNCTION_ALIASES = ["f3"]


class SweepDefaults:
    """Rank sweep defaults."""

    COARSE_RANKS = [1, 2, 3, 4, 5]
    DOMINANCE_BUDGETS = 20


# Preset plans for the reference experiments. The rank
# of the last stage is the one swept by 'mrlr sweep'.
PLAN_PRESETS: Dict[str, str] = {
    # 100 x 100 x 100 function tensor: 10000 x 100 matrix then the full tensor
    "paper-f3": "1,2|3@1;1|2|3@1",
    "f3": "1,2|3@1;1|2|3@1",
    # Same 10000 x 100 size with (x2, x3) against x1; this unfolding has rank 2
    "f3-split": "2,3|1@2;1|2|3@1",
    # 5 x 201 x 61 amino acids: 201 x 305 square-like unfolding
    "amino-res1": "2|1,3@1;1|2|3@1",
    # 5 x 201 x 61 amino acids: 1005 x 61 tall unfolding
    "amino-res2": "1,2|3@1;1|2|3@1",
    # 9 x 36 x 54 x 3 video: 324 x 162 matrix, 9 x 36 x 162 tensor, full tensor
    "video": "1,2|3,4@1;1|2|3,4@1;1|2|3|4@1",
}
