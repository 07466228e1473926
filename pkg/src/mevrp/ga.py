"""Genetic improvement phase over the VNS pool.

Chromosomes use path representation: one target sequence per EV, operated on
through the giant tour (all routes concatenated). Fitness is the longest
repaired route length, so infeasible chromosomes price themselves out.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass

from .charging import repair_route
from .construction import order_route
from .model import Instance
from .reachability import ModifiedCosts
from .vns import SolutionPool

INF = float("inf")


@dataclass(frozen=True)
class GaParams:
    population_size: int = 55
    crossover_rate: float = 0.6
    mutation_rate: float = 0.2
    max_generations: int = 200
    stall_generations: int = 30
    post_improve_count: int = 15

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if not 0 <= self.crossover_rate <= 1 or not 0 <= self.mutation_rate <= 1:
            raise ValueError("rates must lie in [0, 1]")
        if self.post_improve_count > self.population_size:
            raise ValueError("post_improve_count cannot exceed population_size")


@dataclass(frozen=True)
class Chromosome:
    routes: tuple[tuple[int, ...], ...]
    fitness: float | None = None

    def giant_tour(self) -> tuple[int, ...]:
        return tuple(t for r in self.routes for t in r)

    def sizes(self) -> tuple[int, ...]:
        return tuple(len(r) for r in self.routes)


def split_tour(giant: tuple[int, ...], sizes: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    routes = []
    at = 0
    for s in sizes:
        routes.append(tuple(giant[at : at + s]))
        at += s
    return tuple(routes)


def fitness(ch: Chromosome, inst: Instance, mc: ModifiedCosts) -> float:
    """Longest repaired route length; infinite when any route cannot be repaired."""
    worst = 0.0
    for route in ch.routes:
        status = repair_route(route, inst)
        if not status.feasible:
            return INF
        worst = max(worst, status.plan.length)
    return worst


def evaluate(ch: Chromosome, inst: Instance, mc: ModifiedCosts) -> Chromosome:
    if ch.fitness is not None:
        return ch
    return Chromosome(ch.routes, fitness(ch, inst, mc))


def roulette_select(pool: list[Chromosome], rng: random.Random) -> Chromosome:
    """Sample with probability proportional to 1/fitness (minimization)."""
    weights = [0.0 if ch.fitness in (None, INF) else 1.0 / ch.fitness for ch in pool]
    total = sum(weights)
    if total <= 0:
        raise ValueError("no chromosome with finite fitness to select from")
    pick = rng.random() * total
    acc = 0.0
    for ch, w in zip(pool, weights):
        acc += w
        if acc >= pick:
            return ch
    return pool[-1]


def order_crossover(
    p1: Chromosome, p2: Chromosome, rng: random.Random
) -> tuple[Chromosome, Chromosome]:
    """Order crossover on the giant tours.

    Each child keeps one parent's cut segment in place and fills the rest in
    the other parent's relative order, starting after the second cut point.
    Children are re-split using their segment donor's route sizes; fitness is
    left unset for the caller to evaluate after re-routing and repair.
    """
    g1, g2 = p1.giant_tour(), p2.giant_tour()
    n = len(g1)
    if n < 2:
        return Chromosome(p1.routes), Chromosome(p2.routes)
    a, b = sorted(rng.sample(range(n + 1), 2))

    def ox(keeper: tuple[int, ...], filler: tuple[int, ...]) -> tuple[int, ...]:
        child: list[int | None] = [None] * n
        child[a:b] = keeper[a:b]
        held = set(keeper[a:b])
        fill = [g for g in (filler[b:] + filler[:b]) if g not in held]
        positions = [i for i in itertools.chain(range(b, n), range(0, a))]
        for pos, gene in zip(positions, fill):
            child[pos] = gene
        return tuple(child)

    c1 = split_tour(ox(g1, g2), p1.sizes())
    c2 = split_tour(ox(g2, g1), p2.sizes())
    return Chromosome(c1), Chromosome(c2)


def heuristic_mutation(
    p: Chromosome, rng: random.Random, inst: Instance, mc: ModifiedCosts
) -> Chromosome:
    """Try all arrangements of three random genes; keep the fittest."""
    giant = list(p.giant_tour())
    n = len(giant)
    if n < 3:
        return evaluate(p, inst, mc)
    positions = sorted(rng.sample(range(n), 3))
    values = [giant[i] for i in positions]
    best: Chromosome | None = None
    for perm in itertools.permutations(values):
        cand = list(giant)
        for pos, gene in zip(positions, perm):
            cand[pos] = gene
        ch = evaluate(Chromosome(split_tour(tuple(cand), p.sizes())), inst, mc)
        if best is None or ch.fitness < best.fitness:
            best = ch
    return best


def inversion_mutation(p: Chromosome, rng: random.Random) -> Chromosome:
    """Reverse a random giant-tour sub-string; route boundaries preserved."""
    giant = list(p.giant_tour())
    n = len(giant)
    if n < 2:
        return Chromosome(p.routes)
    i, j = sorted((rng.randrange(n), rng.randrange(n)))
    giant[i : j + 1] = reversed(giant[i : j + 1])
    return Chromosome(split_tour(tuple(giant), p.sizes()))


def _reorder(ch: Chromosome, inst: Instance, mc: ModifiedCosts) -> Chromosome:
    routes = tuple(order_route(r, inst, mc) for r in ch.routes)
    return Chromosome(routes)


def _partition_key(routes: tuple[tuple[int, ...], ...]) -> tuple:
    return tuple(sorted(tuple(sorted(r)) for r in routes))


def _shape_key(routes: tuple[tuple[int, ...], ...]) -> tuple:
    return tuple(sorted(len(r) for r in routes))


def _truncate(members: list[Chromosome], size: int) -> list[Chromosome]:
    """Fittest-first survival, one representative per target partition.

    Keeping only the best-priced order per partition stops clone flooding
    and spreads the fixed population budget over distinct assignments. The
    crossover and mutation operators inherit their parents' per-route
    cardinalities, so a route-size shape that dies out can never reappear;
    the best member of each shape is therefore retained unconditionally.
    """
    ranked: list[Chromosome] = []
    seen: set[tuple] = set()
    for ch in sorted(members, key=lambda ch: (ch.fitness, ch.routes)):
        key = _partition_key(ch.routes)
        if key in seen:
            continue
        seen.add(key)
        ranked.append(ch)
    if len(ranked) <= size:
        return ranked
    protected = {}  # shape -> rank of its best member
    for i, ch in enumerate(ranked):
        protected.setdefault(_shape_key(ch.routes), i)
    slots = set(protected.values())
    for i in range(len(ranked)):
        if len(slots) >= size:
            break
        slots.add(i)
    return [ranked[i] for i in sorted(slots)][:size]


def ga_run(
    pool: SolutionPool,
    params: GaParams,
    rng: random.Random,
    inst: Instance,
    mc: ModifiedCosts,
    *,
    deadline: float | None = None,
    eval_counter: list[int] | None = None,
) -> list[Chromosome]:
    """Evolve the pool and return the final population, fittest first.

    The population is seeded from the pool (padded with inversion mutants
    when the pool is small), then per generation: roulette selection,
    order crossover with probability ``crossover_rate``, each mutation with
    probability ``mutation_rate / 2``; offspring are merged with the parents
    and the fittest ``population_size`` survive.
    """
    if len(pool) == 0:
        raise ValueError("cannot seed the population from an empty pool")
    evals = 0

    def ev(ch: Chromosome) -> Chromosome:
        nonlocal evals
        if ch.fitness is None:
            evals += 1
        return evaluate(ch, inst, mc)

    seeds = [Chromosome(s.routes, s.objective) for s in pool.sorted()]
    population = seeds[: params.population_size]
    taken = {ch.routes for ch in population}
    attempts = 0
    while len(population) < params.population_size and attempts < 20 * params.population_size:
        attempts += 1
        base = population[rng.randrange(len(population))]
        mutant = inversion_mutation(base, rng)
        if mutant.routes in taken:
            continue
        taken.add(mutant.routes)
        population.append(ev(mutant))
    population = _truncate(population, params.population_size)

    best = population[0].fitness
    stall = 0
    for _ in range(params.max_generations):
        if deadline is not None and time.monotonic() > deadline:
            break
        offspring: list[Chromosome] = []
        for _ in range(params.population_size):
            p1 = roulette_select(population, rng)
            p2 = roulette_select(population, rng)
            if rng.random() < params.crossover_rate:
                c1, c2 = order_crossover(p1, p2, rng)
                offspring.append(ev(_reorder(c1, inst, mc)))
                offspring.append(ev(_reorder(c2, inst, mc)))
            for parent in (p1, p2):
                if rng.random() < params.mutation_rate / 2:
                    mutant = heuristic_mutation(parent, rng, inst, mc)
                    evals += 6
                    offspring.append(ev(_reorder(mutant, inst, mc)))
                if rng.random() < params.mutation_rate / 2:
                    offspring.append(ev(_reorder(inversion_mutation(parent, rng), inst, mc)))
        population = _truncate(population + offspring, params.population_size)
        if population[0].fitness < best - 1e-9:
            best = population[0].fitness
            stall = 0
        else:
            stall += 1
            if stall >= params.stall_generations:
                break
    if eval_counter is not None:
        eval_counter.append(evals)
    return population
