"""Command-line front end: solve, exact, export-mip, gen, bench, sensitivity."""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import random
import sys
import time
from pathlib import Path

from . import exact as exact_mod
from .ga import GaParams
from .model import (
    Instance,
    InstanceError,
    SolverError,
    generate_random,
    load_instance,
    random_stations,
    with_stations,
    write_instance,
    write_solution,
)
from .pipeline import HhaConfig, run_hha
from .vns import VnsParams

BENCH_COLUMNS = [
    "instance",
    "targets",
    "fleet_size",
    "stations",
    "seed",
    "objective",
    "total_distance",
    "recharges",
    "wall_seconds",
]

SENSITIVITY_COLUMNS = ["sweep", "value", "seed", "objective", "total_distance"]


def _config_from_args(args, seed: int) -> HhaConfig:
    return HhaConfig(
        vns=VnsParams(li_max=args.li_max, ls_max=args.ls_max),
        ga=GaParams(
            population_size=args.pop_size,
            max_generations=args.generations,
            stall_generations=args.stall,
            post_improve_count=min(GaParams().post_improve_count, args.pop_size),
        ),
        seed=seed,
        time_limit=getattr(args, "time_limit", None),
    )


def _add_tuning_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--li-max", type=int, default=VnsParams().li_max)
    p.add_argument("--ls-max", type=int, default=VnsParams().ls_max)
    p.add_argument("--pop-size", type=int, default=GaParams().population_size)
    p.add_argument("--generations", type=int, default=GaParams().max_generations)
    p.add_argument("--stall", type=int, default=GaParams().stall_generations)


def cmd_solve(args) -> int:
    try:
        inst = load_instance(args.instance)
    except (OSError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    config = _config_from_args(args, args.seed)
    try:
        solution, stats = run_hha(inst, config)
    except SolverError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    out = Path(args.out) if args.out else Path(args.instance).with_suffix(".sol")
    out.write_text(write_solution(solution, inst), encoding="utf-8")
    Path(str(out) + ".stats.json").write_text(stats.to_json(), encoding="utf-8")
    print(f"objective {solution.objective!r} total {solution.total_distance!r} -> {out}")
    return 0


def cmd_exact(args) -> int:
    try:
        inst = load_instance(args.instance)
        solution = exact_mod.exact_minmax(inst)
    except (OSError, InstanceError, ValueError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = write_solution(solution, inst)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_export_mip(args) -> int:
    try:
        inst = load_instance(args.instance)
    except (OSError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = exact_mod.export_mip(inst, prop1=not args.bigq)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_gen(args) -> int:
    try:
        inst = generate_random(args.seed, args.targets, args.evs, args.stations)
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = write_instance(inst)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _bench_one(task):
    path, seed, args_dict = task
    inst = load_instance(path)
    config = HhaConfig(
        vns=VnsParams(li_max=args_dict["li_max"], ls_max=args_dict["ls_max"]),
        ga=GaParams(
            population_size=args_dict["pop_size"],
            max_generations=args_dict["generations"],
            stall_generations=args_dict["stall"],
            post_improve_count=min(GaParams().post_improve_count, args_dict["pop_size"]),
        ),
        seed=seed,
    )
    start = time.perf_counter()
    solution, _ = run_hha(inst, config)
    wall = time.perf_counter() - start
    return {
        "instance": inst.name,
        "targets": inst.n_targets,
        "fleet_size": inst.fleet_size,
        "stations": inst.n_stations,
        "seed": seed,
        "objective": repr(solution.objective),
        "total_distance": repr(solution.total_distance),
        "recharges": solution.recharges,
        "wall_seconds": f"{wall:.3f}",
    }


def cmd_bench(args) -> int:
    directory = Path(args.directory)
    files = sorted(directory.glob("*.mevrp")) + sorted(directory.glob("*.txt"))
    if not files:
        print(f"error: no instance files in {directory}", file=sys.stderr)
        return 2
    args_dict = {
        "li_max": args.li_max,
        "ls_max": args.ls_max,
        "pop_size": args.pop_size,
        "generations": args.generations,
        "stall": args.stall,
    }
    tasks = []
    skipped = 0
    for f in files:
        try:
            load_instance(f)
        except (InstanceError, OSError) as exc:
            print(f"warning: skipping {f}: {exc}", file=sys.stderr)
            skipped += 1
            continue
        for seed in range(args.seeds):
            tasks.append((f, seed, args_dict))
    if not tasks:
        print("error: all instance files failed to parse", file=sys.stderr)
        return 2
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(_bench_one, tasks))
    else:
        records = [_bench_one(t) for t in tasks]
    records.sort(key=lambda r: (r["instance"], r["seed"]))

    writer = csv.DictWriter(_open_out(args.out), fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(rec)
    objectives = [float(r["objective"]) for r in records]
    totals = [float(r["total_distance"]) for r in records]
    walls = [float(r["wall_seconds"]) for r in records]
    writer.writerow(
        {
            "instance": "MEAN",
            "targets": "",
            "fleet_size": "",
            "stations": "",
            "seed": "",
            "objective": repr(sum(objectives) / len(objectives)),
            "total_distance": repr(sum(totals) / len(totals)),
            "recharges": "",
            "wall_seconds": f"{sum(walls) / len(walls):.3f}",
        }
    )
    return 0


def _usable_station_pool(inst: Instance, lo: int, hi: int, seed: int):
    """Seeded station pool whose every prefix >= lo keeps the instance solvable."""
    import numpy as np

    from .reachability import build_modified_costs

    rng = random.Random(seed)
    for _ in range(200):
        pool = random_stations(rng, hi, avoid=[inst.depot, *inst.targets])
        mc = build_modified_costs(with_stations(inst, pool[:lo]))
        if np.isfinite(mc.cprime[0, 1 : inst.n_targets + 1]).all():
            return pool
    raise SolverError(f"could not draw a usable {hi}-station pool for {inst.name}")


def sensitivity_rows(
    inst: Instance,
    sweep: str,
    lo: int,
    hi: int,
    seeds: int,
    config_for_seed,
) -> list[dict]:
    """One row per (sweep value, seed); station sets are nested per seed.

    Station pools are seeded-random but screened so that already the smallest
    prefix leaves every target reachable; larger prefixes only add chargers.
    """
    from dataclasses import replace

    rows = []
    for seed in range(seeds):
        if sweep == "stations":
            pool = _usable_station_pool(inst, lo, hi, seed)
        for value in range(lo, hi + 1):
            if sweep == "evs":
                variant = replace(inst, fleet_size=value)
            else:
                variant = with_stations(inst, pool[:value])
            solution, _ = run_hha(variant, config_for_seed(seed))
            rows.append(
                {
                    "sweep": sweep,
                    "value": value,
                    "seed": seed,
                    "objective": repr(solution.objective),
                    "total_distance": repr(solution.total_distance),
                }
            )
    return rows


def cmd_sensitivity(args) -> int:
    if args.to < args.frm:
        print("error: empty sweep range", file=sys.stderr)
        return 2
    try:
        inst = load_instance(args.instance)
    except (OSError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    def config_for_seed(seed: int) -> HhaConfig:
        return _config_from_args(args, seed)

    rows = sensitivity_rows(inst, args.sweep, args.frm, args.to, args.seeds, config_for_seed)
    writer = csv.DictWriter(_open_out(args.out), fieldnames=SENSITIVITY_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return 0


def _open_out(path: str | None):
    if path:
        return open(path, "w", encoding="utf-8", newline="")
    return sys.stdout


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mevrp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the hybrid heuristic on an instance file")
    p.add_argument("instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--out", default=None)
    _add_tuning_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("exact", help="solve a tiny instance to optimality")
    p.add_argument("instance")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("export-mip", help="write the arc-flow model in LP format")
    p.add_argument("instance")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--prop1", action="store_true", default=True)
    mode.add_argument("--bigq", action="store_true", default=False)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_export_mip)

    p = sub.add_parser("gen", help="generate a random instance")
    p.add_argument("--targets", type=int, required=True)
    p.add_argument("--evs", type=int, required=True)
    p.add_argument("--stations", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="run every instance in a directory")
    p.add_argument("directory")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    _add_tuning_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sensitivity", help="sweep fleet size or station count")
    p.add_argument("instance")
    p.add_argument("--sweep", choices=["evs", "stations"], required=True)
    p.add_argument("--from", dest="frm", type=int, required=True)
    p.add_argument("--to", type=int, required=True)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--out", default=None)
    _add_tuning_flags(p)
    p.set_defaults(func=cmd_sensitivity)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
