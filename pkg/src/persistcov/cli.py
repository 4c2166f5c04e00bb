"""Command-line entry point: ``persistcov simulate|validate|compare``."""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

from .errors import ScenarioError, SimulationAborted
from .runner import field_dumper, run, write_outputs
from .scenario import load_scenario, validation_problems


def _simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    overrides = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.duration is not None:
        overrides["duration"] = args.duration
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.log_every is not None:
        overrides["log_every"] = args.log_every
    if args.cell_size is not None:
        overrides["cell_size"] = args.cell_size
    if overrides:
        scenario = scenario.with_overrides(**overrides)
        problems = validation_problems(scenario)
        if problems:
            raise ScenarioError(problems)

    out = Path(args.out)
    dump = field_dumper(out / "fields") if args.dump_fields else None
    try:
        result = run(scenario, dump, args.dump_fields or 0)
    except SimulationAborted as exc:
        write_outputs(exc.result, out)
        print(f"aborted: {exc}", file=sys.stderr)
        return 2
    write_outputs(result, out)
    m = result.monitors
    print(f"{scenario.name}: {len(result.rows)} rows -> {out}")
    print(f"  min agent distance {m.min_agent_dist:.4g}, min obstacle distance {m.min_obstacle_dist:.4g}")
    print(f"  normalized xi in [{m.xi_norm_min:.4g}, {m.xi_norm_max:.4g}]")
    print(f"  max(I_hat - I) = {m.max_overestimate:.3g}, min(xi_hat - xi) = {m.min_xi_gap:.3g}")
    return 0


def _validate(args) -> int:
    scenario = load_scenario(args.scenario)
    print(f"{scenario.name}: ok ({len(scenario.agents)} agents, {len(scenario.all_obstacles)} obstacles, "
          f"grid {scenario.grid.nx}x{scenario.grid.ny})")
    return 0


def _read_csv(path: Path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    return rows[0], [[float(v) for v in r] for r in rows[1:]]


def compare_files(a: Path, b: Path, tol: float) -> tuple[float, list[str]]:
    """Largest absolute difference over the columns both files share, and a
    list of problems (shape mismatches, columns above ``tol``)."""
    ha, ra = _read_csv(a)
    hb, rb = _read_csv(b)
    problems = []
    if len(ra) != len(rb):
        problems.append(f"{a.name}: {len(ra)} rows vs {len(rb)} rows")
    common = [c for c in ha if c in hb]
    if len(common) != len(ha) or len(common) != len(hb):
        problems.append(f"{a.name}: column sets differ")
    worst = 0.0
    for c in common:
        ia, ib = ha.index(c), hb.index(c)
        diff = max((abs(x[ia] - y[ib]) for x, y in zip(ra, rb)), default=0.0)
        if math.isnan(diff) or diff > tol:
            problems.append(f"{a.name}: column {c} differs by {diff:.3g} > {tol:g}")
        worst = max(worst, diff)
    return worst, problems


def _compare(args) -> int:
    a, b = Path(args.log1), Path(args.log2)
    if a.is_dir() and b.is_dir():
        names = sorted(p.name for p in a.glob("*.csv") if (b / p.name).exists())
        pairs = [(a / n, b / n) for n in names]
        if not pairs:
            print("no common csv files to compare", file=sys.stderr)
            return 1
    else:
        pairs = [(a, b)]
    problems, worst = [], 0.0
    for x, y in pairs:
        w, p = compare_files(x, y, args.tol)
        worst = max(worst, w)
        problems += p
        print(f"{x.name}: max abs difference {w:.3g}")
    for p in problems:
        print(p, file=sys.stderr)
    return 1 if problems else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="persistcov", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write logs")
    p.add_argument("scenario", help="scenario file, or a bundled name such as paper_sec5")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mode", choices=["centralized", "decentralized"])
    p.add_argument("--duration", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--cell-size", type=float, help="grid resolution in metres")
    p.add_argument("--dump-fields", type=int, metavar="N", default=0,
                   help="write I and every estimate every N ticks")
    p.add_argument("--log-every", type=int, metavar="N")
    p.set_defaults(func=_simulate)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=_validate)

    p = sub.add_parser("compare", help="diff two logs (files or output directories)")
    p.add_argument("log1")
    p.add_argument("log2")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print("invalid scenario:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
