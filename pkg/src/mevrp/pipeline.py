"""End-to-end hybrid run: construction, neighborhood search, genetic
improvement, and station repositioning, with run statistics."""

from __future__ import annotations

import json
import math
import random
import time
from dataclasses import dataclass, field

from .charging import build_solution, optimize_station_placement, repair_route
from .construction import assign_residue, balanced_assignment, order_route, perturb_depot
from .ga import Chromosome, GaParams, ga_run
from .model import Instance, Solution, SolverError
from .reachability import ModifiedCosts, build_modified_costs
from .vns import VnsParams, vns_search

DEFAULT_RADIUS_FRACTION = 0.01
CONSTRUCTION_RETRIES = 3


@dataclass(frozen=True)
class HhaConfig:
    """Tuned defaults for the full hybrid run."""

    vns: VnsParams = VnsParams()
    ga: GaParams = GaParams()
    perturb_radius: float | None = None
    seed: int = 0
    time_limit: float | None = None


@dataclass
class RunStats:
    phase_seconds: dict[str, float] = field(default_factory=dict)
    phase_objective: dict[str, float] = field(default_factory=dict)
    evaluations: dict[str, int] = field(default_factory=dict)
    recharges: int = 0
    objective: float = 0.0
    total_distance: float = 0.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "phase_seconds": self.phase_seconds,
                "phase_objective": self.phase_objective,
                "evaluations": self.evaluations,
                "recharges": self.recharges,
                "objective": self.objective,
                "total_distance": self.total_distance,
            },
            indent=2,
            sort_keys=True,
        )


def default_radius(inst: Instance) -> float:
    """Perturbation radius: one percent of the instance's coordinate span."""
    pts = [inst.point(i) for i in range(inst.n_nodes)]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    span = max(max(xs) - min(xs), max(ys) - min(ys))
    return DEFAULT_RADIUS_FRACTION * span if span > 0 else 1.0


def construct_initial(inst: Instance, mc: ModifiedCosts, config: HhaConfig) -> Solution:
    """Balanced assignment, residue placement, per-route ordering, repair.

    Routes the repair cannot fix are dissolved: their targets move to the
    cheapest insertion points of the surviving routes and the repair is
    retried a bounded number of times.
    """
    radius = config.perturb_radius if config.perturb_radius is not None else default_radius(inst)
    depots = perturb_depot(inst, radius)
    assignment = assign_residue(balanced_assignment(depots, inst, mc), inst, mc)
    routes = [list(order_route(g, inst, mc)) for g in assignment.groups]

    for _ in range(CONSTRUCTION_RETRIES):
        statuses = [repair_route(r, inst) for r in routes]
        bad = [i for i, s in enumerate(statuses) if not s.feasible]
        if not bad:
            break
        good = [i for i, s in enumerate(statuses) if s.feasible]
        if not good:
            raise SolverError(
                f"construction failed: no repairable route; stranded targets "
                f"{sorted(t for i in bad for t in routes[i])}"
            )
        for i in bad:
            orphans, routes[i] = routes[i], []
            for t in orphans:
                best = None  # (cost, route, position)
                for ri in good:
                    seq = [0, *routes[ri], 0]
                    for pos in range(len(routes[ri]) + 1):
                        a, b = seq[pos], seq[pos + 1]
                        cost = (
                            math.dist(inst.point(a), inst.point(t))
                            + math.dist(inst.point(t), inst.point(b))
                            - math.dist(inst.point(a), inst.point(b))
                        )
                        if best is None or cost < best[0]:
                            best = (cost, ri, pos)
                routes[best[1]].insert(best[2], t)
    else:
        statuses = [repair_route(r, inst) for r in routes]
        stranded = sorted(t for i, s in enumerate(statuses) if not s.feasible for t in routes[i])
        if stranded:
            raise SolverError(f"construction failed: unreachable targets {stranded}")

    solution = build_solution(routes, inst)
    if solution is None:
        raise SolverError("construction failed: repaired routes did not re-validate")
    return solution


def _solution_from_chromosome(ch: Chromosome, inst: Instance) -> Solution | None:
    return build_solution(ch.routes, inst)


def run_hha(inst: Instance, config: HhaConfig) -> tuple[Solution, RunStats]:
    """Full hybrid run; deterministic for a given (instance, config)."""
    stats = RunStats()
    rng = random.Random(config.seed)
    t0 = time.monotonic()
    deadline = t0 + config.time_limit if config.time_limit is not None else None

    mc = build_modified_costs(inst)
    initial = construct_initial(inst, mc, config)
    stats.phase_seconds["construction"] = time.monotonic() - t0
    stats.phase_objective["construction"] = initial.objective

    t1 = time.monotonic()
    pool = vns_search(initial, config.vns, rng, inst, mc, deadline=deadline)
    stats.phase_seconds["vns"] = time.monotonic() - t1
    stats.phase_objective["vns"] = pool.incumbent.objective
    stats.evaluations["vns_candidates"] = pool.evaluations

    t2 = time.monotonic()
    ga_evals: list[int] = []
    population = ga_run(
        pool, config.ga, rng, inst, mc, deadline=deadline, eval_counter=ga_evals
    )
    stats.phase_seconds["ga"] = time.monotonic() - t2
    stats.phase_objective["ga"] = population[0].fitness
    stats.evaluations["ga_fitness"] = ga_evals[0] if ga_evals else 0

    t3 = time.monotonic()
    best: Solution = pool.incumbent
    for ch in population[: config.ga.post_improve_count]:
        if ch.fitness is None or ch.fitness == float("inf"):
            continue
        sol = _solution_from_chromosome(ch, inst)
        if sol is None:
            continue
        plans = tuple(optimize_station_placement(p, inst) for p in sol.plans)
        lengths = [p.length for p in plans]
        improved = Solution(
            routes=sol.routes,
            plans=plans,
            objective=max(lengths),
            total_distance=sum(lengths),
        )
        if improved.objective < best.objective:
            best = improved
    stats.phase_seconds["post"] = time.monotonic() - t3
    stats.phase_objective["post"] = best.objective

    stats.recharges = best.recharges
    stats.objective = best.objective
    stats.total_distance = best.total_distance
    return best, stats
