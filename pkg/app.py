"""
Command-line entry point for densest plane-group packings.

    python app.py search --n 5 --group p2 --preset fast --seed 7
    python app.py search --disc --groups p1,p2 --out results
    python app.py verify results/p2_5.json --tau 1e-6 --mc 1000000
    python app.py table --n-values 3-8 --disc --groups all --preset fast
    python app.py render results/p2_5.json --cells 4x4 --out p2_5.svg
    python app.py ratios results

Exit codes: 0 success, 1 infeasible certificate (verify), 2 usage or input error
or a search that found no feasible configuration.
"""

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import List, Optional

import config
import utils

logger = logging.getLogger("app")

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_USAGE = 2


def parse_groups(text: str) -> List[str]:
    from symmetry import GROUP_NAMES, get_group

    if text.strip().lower() == "all":
        return list(GROUP_NAMES)
    names = [get_group(name.strip()).name for name in text.split(",") if name.strip()]
    if not names:
        raise ValueError("No plane group given")
    return names


def parse_n_values(text: str) -> List[int]:
    """'3-8' or '3,5,12' (or a mix) into a sorted list of vertex counts."""
    values = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = (int(v) for v in part.split("-", 1))
            values.update(range(lo, hi + 1))
        else:
            values.add(int(part))
    if not values or min(values) < 3:
        raise ValueError(f"Vertex counts must be >= 3, got '{text}'")
    return sorted(values)


def parse_cells(text: str):
    try:
        x, y = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"Cells must look like 3x3, got '{text}'")
    return x, y


def build_settings(args):
    from optimizer import SearchSettings

    return SearchSettings.from_preset(
        args.preset,
        seed=args.seed,
        max_iterations=args.iters,
        refine_rounds=args.refine_rounds,
        kl_budget=args.kl_budget,
        elite_fraction=args.elite_frac,
    )


def _search_task(task):
    """Worker: one (group, n) search. Returns (group, n, record, trace csv)."""
    from dataclasses import replace

    from optimizer import run_search
    from reporting import result_record, trace_csv
    from symmetry import gamma_bounds, get_group, length_bounds, template_shape

    group_name, n, settings, lmin, lmax, gmin, gmax, log_level = task
    logging.basicConfig(level=log_level, format="%(levelname)s %(name)s: %(message)s")
    group = get_group(group_name)
    shape = template_shape("disc" if n == "disc" else n)
    if lmin is not None or lmax is not None:
        default_lo, default_hi = length_bounds(shape, group.multiplicity)
        settings = replace(settings, lengths=(lmin if lmin is not None else default_lo,
                                              lmax if lmax is not None else default_hi))
    if gmin is not None or gmax is not None:
        default_lo, default_hi = gamma_bounds(group)
        settings = replace(settings, gamma=(gmin if gmin is not None else default_lo,
                                            gmax if gmax is not None else default_hi))
    result = run_search(shape, group, settings)
    return group_name, n, result_record(result, group_name, n), trace_csv(result.trace)


def _task(args, group: str, n, settings) -> tuple:
    return (group, n, settings, args.lmin, args.lmax, args.gamma_min, args.gamma_max, args.log_level)


def _write_result(out_dir: str, group: str, n, record: dict, trace: str) -> str:
    stem = os.path.join(out_dir, utils.result_filename(group, n)[:-len(".json")])
    utils.save_json(stem + ".json", record)
    utils.save_atomic(stem + "_trace.csv", trace)
    return stem + ".json"


def _run_tasks(tasks, workers: int):
    """
    Yield (task, output, error) as searches finish, in completion order.

    Exactly one of output and error is None. A search that finds no feasible
    configuration does not stop the others.
    """
    from optimizer import NoFeasibleConfigurationError

    if workers <= 1 or len(tasks) == 1:
        for task in tasks:
            try:
                yield task, _search_task(task), None
            except NoFeasibleConfigurationError as e:
                yield task, None, e
        return
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        futures = {pool.submit(_search_task, task): task for task in tasks}
        for future in as_completed(futures):
            try:
                yield futures[future], future.result(), None
            except NoFeasibleConfigurationError as e:
                yield futures[future], None, e


def _log_failure(task, error):
    group, n = task[0], task[1]
    logger.error(f"Search: {group} n={utils.shape_label(n)} failed: {error}")


def _shape_arg(args):
    if args.disc:
        return "disc"
    if args.n is None:
        raise ValueError("Give --n N or --disc")
    if args.n < 3:
        raise ValueError(f"A regular polygon needs n >= 3 vertices, got {args.n}")
    return args.n


def cmd_search(args) -> int:
    n = _shape_arg(args)
    groups = parse_groups(args.groups)
    settings = build_settings(args)
    tasks = [_task(args, g, n, settings) for g in groups]
    failed = 0
    for task, output, error in _run_tasks(tasks, args.workers):
        if error is not None:
            _log_failure(task, error)
            failed += 1
            continue
        group, shape_n, record, trace = output
        path = _write_result(args.out, group, shape_n, record, trace)
        report = record["report"]
        print(f"{group} n={utils.shape_label(shape_n)}: density {utils.format_truncated(report['density'])} "
              f"({report['contacts']} contacts) -> {path}")
    return EXIT_USAGE if failed else EXIT_OK


def cmd_verify(args) -> int:
    from packing import Configuration, estimate_density_mc, verify

    data = utils.load_json(args.certificate)
    if isinstance(data, dict) and "certificate" in data:
        data = data["certificate"]
    configuration = Configuration.from_certificate(data)
    report = verify(configuration, tau=args.tau)
    payload = report.to_dict()
    if args.mc:
        payload["density_mc"] = estimate_density_mc(configuration, samples=args.mc, seed=args.seed)
    print(utils.to_json(payload))
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def cmd_table(args) -> int:
    from optimizer import rank_table
    from reporting import (class_bound_checks, compare_with_reference, density_series,
                           density_table)

    n_values: List[object] = parse_n_values(args.n_values) if args.n_values else []
    if args.disc:
        n_values.append("disc")
    if not n_values:
        raise ValueError("Give --n-values and/or --disc")
    groups = parse_groups(args.groups)
    settings = build_settings(args)
    tasks = [_task(args, g, n, settings) for n in n_values for g in groups]
    logger.info(f"Table: {len(tasks)} searches on {args.workers} workers")

    results, failed = {}, []
    for task, output, error in _run_tasks(tasks, args.workers):
        if error is not None:
            _log_failure(task, error)
            failed.append((task[0], task[1]))
            continue
        group, n, record, trace = output
        _write_result(args.out, group, n, record, trace)
        results[(group, n)] = record["report"]["density"]
    if not results:
        logger.error("Table: every search failed; no tables written")
        return EXIT_USAGE

    ranks = rank_table({**results, **{cell: math.nan for cell in failed}}, n_values, groups)
    utils.save_atomic(os.path.join(args.out, "rank_table.csv"), ranks.to_csv(index=False))
    table = density_table(results)
    utils.save_atomic(os.path.join(args.out, "density_table.csv"), table.to_csv())
    utils.save_atomic(os.path.join(args.out, "density_series.csv"),
                      density_series(results).to_csv(index=False))
    utils.save_atomic(os.path.join(args.out, "published_comparison.csv"),
                      compare_with_reference(results).to_csv(index=False))
    checks = class_bound_checks(results)
    utils.save_atomic(os.path.join(args.out, "class_checks.csv"), checks.to_csv(index=False))
    print(table.to_string())
    if not checks.empty and not checks["holds"].all():
        logger.warning("Table: some class bounds do not hold; see class_checks.csv")
    return EXIT_USAGE if failed else EXIT_OK


def cmd_render(args) -> int:
    from packing import Configuration
    from reporting import render_svg

    data = utils.load_json(args.certificate)
    if isinstance(data, dict) and "certificate" in data:
        data = data["certificate"]
    configuration = Configuration.from_certificate(data)
    cells_x, cells_y = parse_cells(args.cells)
    svg = render_svg(configuration, cells_x, cells_y, tau=args.tau)
    out = args.out or os.path.splitext(args.certificate)[0] + ".svg"
    utils.save_atomic(out, svg)
    print(out)
    return EXIT_OK


def cmd_ratios(args) -> int:
    from reporting import load_results, ratio_report

    results = load_results(args.results)
    report = ratio_report(results)
    print(report.to_string(index=False))
    if args.csv:
        utils.save_atomic(args.csv, report.to_csv(index=False))
    return EXIT_OK


def _add_search_options(parser):
    shape = parser.add_mutually_exclusive_group()
    shape.add_argument("--n", type=int, default=None, help="Vertex count of the regular polygon.")
    shape.add_argument("--disc", action="store_true", help="Search the disc instead of a polygon.")
    parser.add_argument("--group", "--groups", dest="groups", default="all",
                        help="Plane group name, comma list, or 'all' (default all).")
    parser.add_argument("--seed", type=int, default=config.DEFAULT_SEED, help="Random seed.")
    parser.add_argument("--preset", choices=sorted(config.PRESETS), default="fast",
                        help="Iteration budget profile (default fast).")
    parser.add_argument("--iters", type=int, default=None, help="Override the iteration cap.")
    parser.add_argument("--refine-rounds", type=int, default=None, help="Override the refinement rounds.")
    parser.add_argument("--kl-budget", type=float, default=None, help="Initial KL trust-region radius.")
    parser.add_argument("--elite-frac", type=float, default=None, help="Elite fraction in (0, 1].")
    parser.add_argument("--lmin", type=float, default=None, help="Minimum cell length.")
    parser.add_argument("--lmax", type=float, default=None, help="Maximum cell length.")
    parser.add_argument("--gamma-min", type=float, default=None,
                        help="Minimum cell angle in radians (default pi/3 oblique, pi/6 rhombic).")
    parser.add_argument("--gamma-max", type=float, default=None,
                        help="Maximum cell angle in radians (default 2pi/3 oblique, 5pi/6 rhombic).")
    parser.add_argument("--out", default=config.DEFAULT_OUT_DIR, help="Output directory.")
    parser.add_argument("--workers", type=int, default=config.WORKERS,
                        help="Parallel searches (default PACKING_WORKERS or CPU count).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Densest packings of regular polygons and discs in the 17 plane groups.")
    parser.add_argument("--log-level", default=config.LOG_LEVEL,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], type=str.upper)
    sub = parser.add_subparsers(dest="command", required=True)

    search = sub.add_parser("search", help="Search one shape in one or more plane groups.")
    _add_search_options(search)
    search.set_defaults(func=cmd_search)

    verify = sub.add_parser("verify", help="Check a certificate; exit 1 if infeasible.")
    verify.add_argument("certificate", help="Certificate or search result JSON.")
    verify.add_argument("--tau", type=float, default=None, help="Overlap tolerance (default 1e-9 x diameter).")
    verify.add_argument("--mc", type=int, default=0, help="Also estimate the density with this many samples.")
    verify.add_argument("--seed", type=int, default=0, help="Seed for --mc.")
    verify.set_defaults(func=cmd_verify)

    table = sub.add_parser("table", help="Search every (group, n) pair and write the rank table.")
    _add_search_options(table)
    table.add_argument("--n-values", default=None, help="Vertex counts, e.g. 3-8 or 3,5,12.")
    table.set_defaults(func=cmd_table)

    render = sub.add_parser("render", help="Draw a certificate as SVG.")
    render.add_argument("certificate", help="Certificate or search result JSON.")
    render.add_argument("--cells", default="3x3", help="Cells drawn, e.g. 3x3.")
    render.add_argument("--tau", type=float, default=None, help="Overlap tolerance for highlighting.")
    render.add_argument("--out", default=None, help="SVG path (default next to the certificate).")
    render.set_defaults(func=cmd_render)

    ratios = sub.add_parser("ratios", help="Check density-ratio identities over a results directory.")
    ratios.add_argument("results", help="Directory of search result JSON files.")
    ratios.add_argument("--csv", default=None, help="Also write the report as CSV.")
    ratios.set_defaults(func=cmd_ratios)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    from optimizer import NoFeasibleConfigurationError

    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, NoFeasibleConfigurationError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
