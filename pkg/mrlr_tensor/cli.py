import argparse
import logging
import sys
from typing import List, Optional

import numpy as np

from mrlr_tensor.colored_logging import (
    get_colored_logger,
    log_highlight,
    log_progress,
    log_section,
    log_success,
    setup_colored_logging,
)
from mrlr_tensor.config_validation import RunConfig, load_config
from mrlr_tensor.constants import ExitCodes, FunctionGridDefaults, Methods, SpecGrammar
from mrlr_tensor.domain import (
    PartitionPlan,
    PlanStage,
    parse_grid_spec,
    parse_int_list,
    parse_partition_list,
    parse_plan_stages,
    parse_random_cp,
    parse_rank_list,
    parse_rank_range,
    resolve_plan_text,
)
from mrlr_tensor.engine import mrlr_fit, mrlr_reconstruct, param_count, plan_from_regular
from mrlr_tensor.exceptions import ConfigurationError, MrlrError, PartitionError, SpecSyntaxError
from mrlr_tensor.experiments import (
    baseline_ranks_for,
    baseline_sweep,
    budget_frontier,
    coarse_grid_sweep,
    dominance_fraction,
    nfe,
    random_cp_tensor,
    rank_sweep,
    report_to_rows,
    sample_function_tensor,
    subsample_tensor,
)
from mrlr_tensor.tensor_io import (
    read_model,
    read_tensor,
    sniff_format,
    write_model,
    write_rows_csv,
    write_tensor,
)

logger = get_colored_logger(__name__)


# --- Argument Parsing ---


def _common_parser() -> argparse.ArgumentParser:
    """Flags shared by every subcommand."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="Path to a YAML configuration file (see config.sample.yaml).")
    common.add_argument("-v", "--verbose", action="store_true", help="Enable DEBUG logging, including per-sweep ALS errors.")
    common.add_argument("--no-color", action="store_true", help="Disable colored log output.")
    common.add_argument("--threads", type=int, help="Worker threads for restarts and sweep points (env: MRLR_THREADS).")
    common.add_argument("--seed", type=int, help="Base seed of the factor initialization.")
    common.add_argument("--max-sweeps", type=int, help="Maximum ALS sweeps per fit.")
    common.add_argument("--tol", type=float, help="Relative error-change tolerance that stops ALS.")
    common.add_argument("--restarts", type=int, help="Random restarts per ALS fit; the best is kept.")
    common.add_argument(
        "--no-timing",
        dest="record_timing",
        action="store_false",
        default=None,
        help="Write 0 in the seconds column so identical runs give byte-identical CSV.",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="mrlr",
        description="Multi-resolution low-rank tensor decomposition: fit, sweep and inspect MRLR models.",
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    generate = commands.add_parser("generate", parents=[common], help="Write a synthetic tensor file.")
    source = generate.add_mutually_exclusive_group()
    source.add_argument(
        "--function",
        choices=[FunctionGridDefaults.FUNCTION_NAME, *FunctionGridDefaults.FUNCTION_ALIASES],
        default=FunctionGridDefaults.FUNCTION_NAME,
        help="Sample the built-in three-variable function (default).",
    )
    source.add_argument("--random-cp", metavar="SHAPE/RANK/SEED", help="Exact low-rank tensor, e.g. '6,7,8/2/0'.")
    generate.add_argument("--grid", metavar="START,STEP,COUNT", help=SpecGrammar.GRID_HELP)
    generate.add_argument("--subsample", metavar="N1,N2,...", help="Keep evenly spaced indices, e.g. '40,40,40'.")
    generate.add_argument("--out", required=True, help="Output tensor file.")

    decompose = commands.add_parser("decompose", parents=[common], help="Fit an MRLR model to a tensor file.")
    decompose.add_argument("--in", dest="input", required=True, help="Input tensor file.")
    decompose.add_argument(
        "--partitions",
        default="auto",
        help="'auto' (regular partitions), partitions like '1,2|3;1|2|3', or a plan like '1,2|3@2;1|2|3@1'.",
    )
    decompose.add_argument("--ranks", help="Comma-separated stage ranks, one per partition.")
    decompose.add_argument("--levels", help="Regular-partition levels kept by 'auto', e.g. '1,2'.")
    decompose.add_argument("--reverse", action="store_true", default=None, help="Fit fine-to-coarse.")
    decompose.add_argument("--refine", dest="refinement_cycles", type=int, help="Refinement cycles after the sequential fit.")
    decompose.add_argument("--model-out", help="Write the fitted model to this file.")
    decompose.add_argument("--report-out", help="Write per-stage NFE and params as CSV ('-' for stdout).")

    sweep = commands.add_parser("sweep", parents=[common], help="NFE versus parameters over a rank range.")
    sweep.add_argument("--in", dest="input", required=True, help="Input tensor file.")
    sweep.add_argument(
        "--plan",
        default=FunctionGridDefaults.FUNCTION_NAME,
        help="Plan spec or preset name; the rank of its last stage is swept.",
    )
    sweep.add_argument("--sweep", default="1:40", help=SpecGrammar.RANGE_HELP)
    sweep.add_argument("--baseline", action="store_true", help="Also fit PARAFAC at bracketing budgets.")
    sweep.add_argument("--baseline-ranks", help="Explicit PARAFAC ranks, e.g. '10:80:5' or '10,20,40'.")
    sweep.add_argument("--coarse-ranks", help="Also sweep the rank of every earlier stage over these ranks, e.g. '1:5'.")
    sweep.add_argument("--reverse", action="store_true", default=None, help="Fit fine-to-coarse.")
    sweep.add_argument("--out", default="-", help="Output CSV ('-' for stdout).")

    info = commands.add_parser("info", parents=[common], help="Describe a tensor or model file.")
    info.add_argument("--in", dest="input", required=True, help="Tensor or model file.")
    info.add_argument("--reference", help="Tensor the model was fitted to; adds per-stage NFE.")

    return parser


# --- Subcommands ---


def _dims(shape) -> str:
    return " x ".join(str(n) for n in shape)


def cmd_generate(args: argparse.Namespace, config: RunConfig) -> int:
    if args.random_cp:
        if args.grid:
            raise ConfigurationError("--grid applies to the built-in function only, not to --random-cp")
        shape, rank, seed = parse_random_cp(args.random_cp)
        log_progress(logger, f"Sampling rank-{rank} CP tensor of shape {_dims(shape)} (seed {seed})")
        X = random_cp_tensor(shape, rank, seed)
    else:
        grid = parse_grid_spec(args.grid) if args.grid else None
        log_progress(logger, f"Sampling function '{args.function}'")
        X = sample_function_tensor(grid)

    if args.subsample:
        X = subsample_tensor(X, parse_int_list(args.subsample, "subsample shape"))

    write_tensor(args.out, X)
    log_success(logger, f"Wrote {_dims(X.shape)} tensor to {args.out}")
    return ExitCodes.OK


def _decompose_plan(args: argparse.Namespace, order: int) -> PartitionPlan:
    ranks = list(parse_int_list(args.ranks, "ranks")) if args.ranks else None
    text = resolve_plan_text(args.partitions)

    if text == "auto":
        if ranks is None:
            raise SpecSyntaxError("--partitions auto needs --ranks", grammar="--ranks r1,r2,...")
        levels = parse_int_list(args.levels, "levels") if args.levels else None
        return plan_from_regular(order, ranks, levels)

    if args.levels:
        raise ConfigurationError("--levels applies to --partitions auto only")

    if SpecGrammar.RANK_MARKER in text:
        if ranks is not None:
            raise SpecSyntaxError("A plan with '@' ranks cannot be combined with --ranks", text=text)
        return PartitionPlan.coarse_to_fine(parse_plan_stages(text))

    partitions = parse_partition_list(text)
    if ranks is None or len(ranks) != len(partitions):
        raise PartitionError(
            f"Got {len(ranks or [])} ranks for {len(partitions)} partitions",
            context={"partitions": text, "ranks": ranks},
            suggestions=["Pass one rank per partition with --ranks"],
        )
    return PartitionPlan.coarse_to_fine([PlanStage(p, r) for p, r in zip(partitions, ranks)])


def cmd_decompose(args: argparse.Namespace, config: RunConfig) -> int:
    log_progress(logger, f"Reading {args.input}")
    X = read_tensor(args.input)
    plan = _decompose_plan(args, X.order)
    if config.reverse:
        plan = plan.reversed()

    log_section(logger, "MRLR fit")
    log_highlight(logger, f"Plan {plan} on a {_dims(X.shape)} tensor, {param_count(plan, X.shape)} params")
    model, report = mrlr_fit(X, plan, config.als, config.refinement_cycles, config.threads)
    log_success(
        logger,
        f"Finished: NFE {report.final_nfe:.6e} with {model.n_params} params "
        f"({report.total_sweeps} sweeps, {report.total_seconds:.2f}s)",
    )

    if args.model_out:
        write_model(args.model_out, model)
        log_success(logger, f"Wrote model to {args.model_out}")
    if args.report_out:
        method = Methods.MRLR_REVERSE if config.reverse else Methods.MRLR
        write_rows_csv(args.report_out, report_to_rows(report, method), config.record_timing)
        if args.report_out != "-":
            log_success(logger, f"Wrote report to {args.report_out}")
    return ExitCodes.OK


def cmd_sweep(args: argparse.Namespace, config: RunConfig) -> int:
    log_progress(logger, f"Reading {args.input}")
    X = read_tensor(args.input)
    plan = PartitionPlan.coarse_to_fine(parse_plan_stages(resolve_plan_text(args.plan)))
    sweep_ranks = parse_rank_range(args.sweep)
    baseline_ranks = parse_rank_list(args.baseline_ranks) if args.baseline_ranks else None
    baseline = args.baseline or baseline_ranks is not None

    log_section(logger, "Rank sweep")
    log_highlight(logger, f"Plan {plan}, last-stage ranks {sweep_ranks[0]}..{sweep_ranks[-1]}")
    if args.coarse_ranks:
        rows = coarse_grid_sweep(
            X, plan, sweep_ranks, parse_rank_list(args.coarse_ranks), config.als, config.threads, config.reverse
        )
        frontier = budget_frontier(rows)
        log_highlight(logger, f"{len(frontier)} of {len(rows)} points lie on the budget frontier")
    else:
        rows = rank_sweep(X, plan, sweep_ranks, config=config.als, threads=config.threads, reverse=config.reverse)

    if baseline:
        ranks = baseline_ranks or baseline_ranks_for([row.params for row in rows], X.shape)
        log_progress(logger, f"Fitting PARAFAC baseline at ranks {ranks[0]}..{ranks[-1]}")
        baseline_rows = baseline_sweep(X, ranks, config.als, config.threads)
        try:
            fraction = dominance_fraction(rows, baseline_rows)
            log_highlight(logger, f"MRLR NFE at or below PARAFAC at {fraction:.0%} of equal budgets")
        except ConfigurationError as e:
            logger.warning(f"No equal-budget comparison: {e.message}")
        rows = sorted(rows + baseline_rows, key=lambda row: (row.method, row.params))

    write_rows_csv(args.out, rows, config.record_timing)
    if args.out != "-":
        log_success(logger, f"Wrote {len(rows)} rows to {args.out}")
    return ExitCodes.OK


def cmd_info(args: argparse.Namespace, config: RunConfig) -> int:
    kind = sniff_format(args.input)
    if kind == "tensor":
        if args.reference:
            raise ConfigurationError("--reference applies to model files only")
        X = read_tensor(args.input)
        print(f"tensor {args.input}")
        print(f"shape {_dims(X.shape)}")
        print(f"entries {X.size}")
        print(f"norm {X.norm():.9g}")
        return ExitCodes.OK

    model = read_model(args.input)
    reference = read_tensor(args.reference) if args.reference else None
    print(f"model {args.input}")
    print(f"shape {_dims(model.shape)}")
    print(f"stages {len(model.stages)}")
    print(f"plan {model.to_plan()}")
    print(f"params {model.n_params}")
    cumulative = 0
    for index, stage in enumerate(model.stages, start=1):
        cumulative += stage.factors.n_params
        line = (
            f"stage {index} partition {stage.partition} rank {stage.rank} "
            f"params {stage.factors.n_params} cumulative {cumulative}"
        )
        if reference is not None:
            line += f" nfe {nfe(reference, mrlr_reconstruct(model, index)):.9g}"
        print(line)
    return ExitCodes.OK


COMMANDS = {
    "generate": cmd_generate,
    "decompose": cmd_decompose,
    "sweep": cmd_sweep,
    "info": cmd_info,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 for --help and 2 for usage errors
        return ExitCodes.OK if e.code in (0, None) else ExitCodes.PARSE_OR_IO

    # --- Logging Setup ---
    setup_colored_logging(level=logging.DEBUG if args.verbose else logging.INFO, use_colors=not args.no_color)
    if args.verbose:
        logger.debug("Verbose mode enabled. DEBUG level logging activated.")

    # --- Error Handling ---
    try:
        config = load_config(args.config, args)
        logger.debug(f"Effective configuration: {config.model_dump()}")
        return COMMANDS[args.command](args, config)
    except MrlrError as e:
        logger.error(str(e), exc_info=args.verbose)
        return e.exit_code
    except np.linalg.LinAlgError as e:
        logger.error(f"Linear algebra failure: {e}", exc_info=args.verbose)
        return ExitCodes.NUMERICAL
    except OSError as e:
        logger.error(f"I/O error: {e}", exc_info=args.verbose)
        return ExitCodes.PARSE_OR_IO
    except Exception as e:
        logger.error(f"An unexpected error occurred: {e}", exc_info=True)
        return ExitCodes.PARSE_OR_IO


if __name__ == "__main__":
    sys.exit(main())
