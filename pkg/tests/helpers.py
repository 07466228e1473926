"""Shared test oracles, independent of the library's own code paths."""

from __future__ import annotations

import itertools
import math

from mevrp.model import Instance


def simulate_walk(nodes, inst: Instance):
    """Independent charge/distance re-simulation of a node walk.

    Returns (length, arrival_charges); raises AssertionError on any charge
    violation. Recharges to capacity on departing the depot or any station.
    """
    cap = inst.battery_capacity
    first_station = inst.n_targets + 1
    z = cap
    length = 0.0
    arrivals = [z]
    for a, b in zip(nodes, nodes[1:]):
        d = math.dist(inst.point(a), inst.point(b))
        e = inst.consumption_rate * d
        z -= e
        assert z >= 0, f"charge violation on {a}->{b}: {z}"
        assert z <= cap
        length += d
        arrivals.append(z)
        if b >= first_station or b == 0:
            z = cap
    return length, arrivals


def check_solution(sol, inst: Instance):
    """Full structural + charge validation of a Solution."""
    seen = []
    for route, plan in zip(sol.routes, sol.plans):
        seen.extend(route)
        targets_in_plan = [n for n in plan.nodes if 1 <= n <= inst.n_targets]
        assert list(route) == targets_in_plan, "plan reorders its route"
        if len(plan.nodes) > 1:
            assert plan.nodes[0] == 0 and plan.nodes[-1] == 0
        length, _ = simulate_walk(plan.nodes, inst)
        assert math.isclose(length, plan.length, rel_tol=0, abs_tol=1e-9)
    assert sorted(seen) == sorted(inst.target_nodes()), "target coverage broken"
    assert math.isclose(sol.objective, max(p.length for p in sol.plans), abs_tol=1e-9)
    assert math.isclose(sol.total_distance, sum(p.length for p in sol.plans), abs_tol=1e-9)


def walk_is_feasible(nodes, inst: Instance) -> bool:
    try:
        simulate_walk(nodes, inst)
        return True
    except AssertionError:
        return False


def brute_force_recharge(order, inst: Instance):
    """Exhaustive station-insertion enumeration for a fixed target order.

    Depth-first over per-gap station chains (no station repeated within one
    gap; chains bounded by the station count), pruning only provably dead
    branches (charge below zero). Returns (best_length, best_walk) or None.
    """
    seq = [0, *order, 0]
    stations = list(inst.station_nodes())
    cap = inst.battery_capacity
    best: list = [math.inf, None]

    def leg(a, b):
        d = math.dist(inst.point(a), inst.point(b))
        return d, inst.consumption_rate * d

    def explore(gap, at, charge, length, walk):
        if length >= best[0]:
            return
        if gap == len(seq) - 1:
            best[0] = length
            best[1] = list(walk)
            return
        target = seq[gap + 1]

        def chains(node, z, add, visited, trail):
            d, e = leg(node, target)
            if z >= e:
                yield add + d, trail
            for s in stations:
                if s in visited:
                    continue
                d_s, e_s = leg(node, s)
                if z >= e_s:
                    yield from chains(s, cap, add + d_s, visited | {s}, trail + [s])

        for add, trail in chains(at, charge, 0.0, set(), []):
            d_last, e_last = leg(trail[-1] if trail else at, target)
            arrive = (cap if trail else charge) - e_last
            explore(gap + 1, target, arrive, length + add, walk + trail + [target])

    explore(0, 0, cap, 0.0, [0])
    if best[1] is None:
        return None
    return best[0], best[1]


def brute_force_minmax(inst: Instance):
    """Permutation-level brute force: all partitions, all orders, recharge by
    the exhaustive walk oracle. Viable only for tiny instances."""
    targets = list(inst.target_nodes())
    m = inst.fleet_size
    best = math.inf

    def route_cost(group):
        if not group:
            return 0.0
        out = math.inf
        for perm in itertools.permutations(group):
            res = brute_force_recharge(perm, inst)
            if res is not None:
                out = min(out, res[0])
        return out

    cache: dict[frozenset, float] = {}

    def cost(group):
        key = frozenset(group)
        if key not in cache:
            cache[key] = route_cost(tuple(group))
        return cache[key]

    def partitions(items, bins):
        if bins == 1:
            yield [items]
            return
        if not items:
            yield [[] for _ in range(bins)]
            return
        head, rest = items[0], items[1:]
        for sub in partitions(rest, bins):
            for i in range(bins):
                out = [list(g) for g in sub]
                out[i].append(head)
                yield out

    for parts in partitions(targets, m):
        canon = {frozenset(g) for g in parts}
        best = min(best, max(cost(g) for g in canon) if canon else 0.0)
    return best
