from __future__ import annotations

import argparse
import re
import sys
from collections.abc import Sequence
from pathlib import Path

from cli.config import Settings
from cli.errors import EXIT_OK, report_error
from cli.jobs import run_training_impl
from cli.logging import get_logger, setup_logging
from cli.models import RuntimeSummary, summarize_gaps, summarize_runtime
from cli.report import write_assignment_svg
from cli.results import check_aligned, read_results, write_results
from cli.services import SolveService
from cli.types import OutputProtocol
from core.baselines import percentage_gap
from core.dataset import file_sha256, generate_dataset, load_dataset, save_dataset
from core.errors import InvalidInputError, QapError, UsageError
from core.models import SOLVE_METHODS, SolveMethod, is_solve_method
from core.qap import Assignment

logger = get_logger(__name__)

_PERM_RE = re.compile(r"^\d+(,\d+)*$")


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qapforge",
        description="Generate QAP datasets, train the pointer policy, solve and benchmark.",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker threads (default: QAPFORGE_THREADS or 1)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a dataset file")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True)

    train = sub.add_parser("train", help="train a policy from a config file")
    train.add_argument("--config", required=True)
    train.add_argument("--resume", default=None, help="checkpoint to resume from")

    solve = sub.add_parser("solve", help="solve every instance of a dataset")
    solve.add_argument("--method", choices=SOLVE_METHODS, required=True)
    solve.add_argument("--beam", type=int, default=1)
    solve.add_argument("--checkpoint", default=None)
    solve.add_argument("--dataset", required=True)
    solve.add_argument("--out", required=True)

    ev = sub.add_parser("eval", help="gap statistics of solutions against a baseline")
    ev.add_argument("--solutions", required=True)
    ev.add_argument("--baseline-solutions", required=True)
    ev.add_argument("--format", choices=("table", "json"), default="table")

    bench = sub.add_parser("bench", help="mean cost and runtime per method, single-threaded")
    bench.add_argument(
        "--methods",
        default="swap",
        help="comma-separated methods; rl-beam takes a width as rl-beam:<B>",
    )
    bench.add_argument("--dataset", required=True)
    bench.add_argument("--checkpoint", default=None)
    bench.add_argument("--format", choices=("table", "json"), default="table")

    viz = sub.add_parser("viz", help="draw an assignment and its heaviest flows as SVG")
    viz.add_argument("--instance-file", required=True)
    viz.add_argument("--index", type=int, default=0)
    viz.add_argument(
        "--assignment",
        required=True,
        help="comma-separated permutation or a results file",
    )
    viz.add_argument("--top-k", type=int, default=20)
    viz.add_argument("--title", default=None)
    viz.add_argument("--out", required=True)
    return parser


def _cmd_gen(args: argparse.Namespace, out: OutputProtocol) -> int:
    n: int = args.n
    count: int = args.count
    seed: int = args.seed
    if n < 2:
        raise UsageError(f"--n must be at least 2, got {n}")
    if count < 1:
        raise UsageError(f"--count must be at least 1, got {count}")
    header, instances = generate_dataset(seed, n, count)
    save_dataset(args.out, header, instances)
    digest = file_sha256(args.out)
    logger.info("dataset written", extra={"path": args.out, "n": n, "instance": count})
    out.write(f"{digest}  {args.out}\n")
    return EXIT_OK


def _cmd_train(args: argparse.Namespace, settings: Settings, threads: int, out: OutputProtocol) -> int:
    result = run_training_impl(
        args.config,
        settings=settings,
        logger=get_logger("cli.jobs"),
        threads=threads,
        resume_from=args.resume,
    )
    best = result.best
    out.write(
        f"best epoch={best.epoch} val_gap={best.metric!r} "
        f"checkpoint={best.config.checkpoint_path}\n"
    )
    return EXIT_OK


def _cmd_solve(args: argparse.Namespace, threads: int, out: OutputProtocol) -> int:
    method: SolveMethod = args.method
    header, instances = load_dataset(args.dataset)
    service = SolveService(logger=get_logger("cli.services"), threads=threads)
    solver = service.build_solver(method, n=header.n, beam=args.beam, checkpoint=args.checkpoint)
    records = service.solve_all(solver, instances, method=method)
    write_results(args.out, records)
    out.write(f"{len(records)} records written to {args.out}\n")
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace, out: OutputProtocol) -> int:
    solutions = read_results(args.solutions)
    baseline = read_results(args.baseline_solutions)
    check_aligned(solutions, baseline)
    if not solutions:
        raise UsageError("results files are empty")
    gaps = [percentage_gap(s.cost, b.cost) for s, b in zip(solutions, baseline)]
    summary = summarize_gaps(gaps)
    if args.format == "json":
        out.write(summary.model_dump_json() + "\n")
    else:
        out.write(summary.render())
    return EXIT_OK


def parse_bench_methods(text: str) -> list[tuple[str, SolveMethod, int]]:
    """``swap,rl-greedy,rl-beam:5`` -> (label, method, beam width) triples."""
    parsed: list[tuple[str, SolveMethod, int]] = []
    for token in (t.strip() for t in text.split(",")):
        if not token:
            continue
        name, _, width_text = token.partition(":")
        if not is_solve_method(name):
            raise UsageError(f"unknown method {name!r}; choose from {', '.join(SOLVE_METHODS)}")
        width = 1
        if width_text:
            if name != "rl-beam" or not width_text.isdigit():
                raise UsageError(f"bad method token {token!r}")
            width = int(width_text)
        label = f"rl-beam-{width}" if name == "rl-beam" else name
        parsed.append((label, name, width))
    if not parsed:
        raise UsageError("--methods is empty")
    return parsed


def _cmd_bench(args: argparse.Namespace, out: OutputProtocol) -> int:
    methods = parse_bench_methods(args.methods)
    header, instances = load_dataset(args.dataset)
    # timing runs single-threaded so per-instance wall times are comparable
    service = SolveService(logger=get_logger("cli.services"), threads=1)
    rows = []
    for label, method, width in methods:
        solver = service.build_solver(method, n=header.n, beam=width, checkpoint=args.checkpoint)
        records = service.solve_all(solver, instances, method=label)
        rows.append(summarize_runtime(label, records))
        logger.info("method benchmarked", extra={"method": label, "instance": len(records)})
    summary = RuntimeSummary(rows=tuple(rows))
    if args.format == "json":
        out.write(summary.model_dump_json() + "\n")
    else:
        out.write(summary.render())
    return EXIT_OK


def _resolve_assignment(value: str, index: int) -> Assignment:
    if _PERM_RE.match(value):
        return Assignment.of([int(p) for p in value.split(",")])
    for record in read_results(value):
        if record.idx == index:
            return Assignment.of(record.perm)
    raise UsageError(f"{value} has no record with idx={index}")


def _cmd_viz(args: argparse.Namespace, out: OutputProtocol) -> int:
    _, instances = load_dataset(args.instance_file)
    index: int = args.index
    if not 0 <= index < len(instances):
        raise UsageError(f"--index {index} out of range for {len(instances)} instances")
    try:
        assignment = _resolve_assignment(args.assignment, index)
    except InvalidInputError as exc:
        raise UsageError(f"invalid --assignment: {exc}") from exc
    if assignment.n != instances[index].n:
        raise UsageError(
            f"--assignment has {assignment.n} entries, instance has n={instances[index].n}"
        )
    write_assignment_svg(
        args.out, instances[index], assignment, top_k=args.top_k, title=args.title
    )
    out.write(f"svg written to {args.out}\n")
    return EXIT_OK


def _dispatch(args: argparse.Namespace, settings: Settings, out: OutputProtocol) -> int:
    threads: int = args.threads if args.threads is not None else settings.threads
    if threads < 1:
        raise UsageError(f"--threads must be at least 1, got {threads}")
    command: str = args.command
    if command == "gen":
        return _cmd_gen(args, out)
    if command == "train":
        return _cmd_train(args, settings, threads, out)
    if command == "solve":
        return _cmd_solve(args, threads, out)
    if command == "eval":
        return _cmd_eval(args, out)
    if command == "bench":
        return _cmd_bench(args, out)
    return _cmd_viz(args, out)


def main(argv: Sequence[str] | None = None, *, out: OutputProtocol | None = None) -> int:
    """Run one command; errors are logged and turned into ``SystemExit`` codes."""
    args = create_parser().parse_args(argv)
    sink: OutputProtocol = out if out is not None else sys.stdout
    try:
        settings = Settings.from_env()
    except QapError as exc:
        setup_logging()
        raise SystemExit(report_error(exc, logger)) from exc
    setup_logging(settings.log_level, settings.log_format)
    try:
        return _dispatch(args, settings, sink)
    except (QapError, OSError) as exc:
        raise SystemExit(report_error(exc, logger)) from exc


if __name__ == "__main__":
    sys.exit(main())
