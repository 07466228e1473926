"""Initial solution construction: depot perturbation, load-balanced target
assignment, residue placement, and per-route TSP ordering."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import Instance, Point, SolverError
from .reachability import ModifiedCosts, costs_from_point

INF = float("inf")


@dataclass(frozen=True)
class Assignment:
    """Disjoint target groups, one per EV, plus the not-yet-placed residue."""

    groups: tuple[frozenset[int], ...]
    residue: tuple[int, ...]


def perturb_depot(inst: Instance, radius: float) -> list[Point]:
    """K copies of the depot spread evenly on a small circle.

    A single-EV fleet keeps the depot itself; otherwise copy k sits at angle
    2*pi*k/K starting from angle 0.
    """
    if radius <= 0:
        raise ValueError("perturbation radius must be positive")
    k = inst.fleet_size
    if k == 1:
        return [inst.depot]
    cx, cy = inst.depot
    return [
        (cx + radius * math.cos(2 * math.pi * i / k), cy + radius * math.sin(2 * math.pi * i / k))
        for i in range(k)
    ]


def balanced_assignment(depots: Sequence[Point], inst: Instance, mc: ModifiedCosts) -> Assignment:
    """Optimal balanced assignment of targets to depot copies.

    Each of the K depot copies receives exactly floor(|T|/K) targets at
    minimum total modified cost; the r leftover targets are withheld as
    residue. The residue is chosen as the r targets with the largest regret
    (gap between best and second-best depot cost), so the balance constraint
    binds where the depot choice matters least. Solved as a transportation
    problem (depot copies replicated to unit supplies, successive shortest
    augmenting paths).
    """
    k = len(depots)
    targets = list(inst.target_nodes())
    n = len(targets)
    cost = np.vstack([costs_from_point(d, inst, mc)[1 : n + 1] for d in depots])

    unreachable = [t for col, t in enumerate(targets) if not np.isfinite(cost[:, col]).any()]
    if unreachable:
        raise SolverError(f"targets unreachable from every depot copy: {unreachable}")

    p, r = divmod(n, k)
    regret: dict[int, float] = {}
    for col, t in enumerate(targets):
        finite = np.sort(cost[:, col][np.isfinite(cost[:, col])])
        regret[t] = INF if len(finite) < 2 else float(finite[1] - finite[0])
    withheld = sorted(targets, key=lambda t: (-regret[t], t))[:r]
    kept = [t for t in targets if t not in set(withheld)]

    groups: list[set[int]] = [set() for _ in range(k)]
    if p > 0:
        kept_cols = [targets.index(t) for t in kept]
        expanded = np.repeat(cost[:, kept_cols], p, axis=0)
        try:
            rows, cols = linear_sum_assignment(expanded)
        except ValueError as exc:
            raise SolverError(f"balanced assignment infeasible: {exc}") from exc
        for row, col in zip(rows, cols):
            groups[row // p].add(kept[col])
    return Assignment(
        groups=tuple(frozenset(g) for g in groups),
        residue=tuple(withheld),
    )


def _insertion_cost(route: Sequence[int], pos: int, t: int, inst: Instance) -> float:
    """Detour length of inserting t between route[pos-1] and route[pos]."""
    seq = [0, *route, 0]
    a, b = seq[pos], seq[pos + 1]
    pa, pb, pt_ = inst.point(a), inst.point(b), inst.point(t)
    return math.dist(pa, pt_) + math.dist(pt_, pb) - math.dist(pa, pb)


def assign_residue(a: Assignment, inst: Instance, mc: ModifiedCosts) -> Assignment:
    """Place each residue target into the group whose route absorbs it cheapest.

    Groups are routed internally to evaluate the insertion detours; the
    returned Assignment has an empty residue and the same group count.
    """
    if not a.residue:
        return a
    routes = [order_route(g, inst, mc) for g in a.groups]
    routes = [list(r) for r in routes]
    for t in sorted(a.residue):
        best = None  # (cost, group index, position)
        for gi, route in enumerate(routes):
            for pos in range(len(route) + 1):
                c = _insertion_cost(route, pos, t, inst)
                if best is None or c < best[0]:
                    best = (c, gi, pos)
        _, gi, pos = best
        routes[gi].insert(pos, t)
    return Assignment(
        groups=tuple(frozenset(r) for r in routes),
        residue=(),
    )


# ---------------------------------------------------------------------------
# Per-route ordering on the modified costs


def order_route(
    targets: Sequence[int] | frozenset[int],
    inst: Instance,
    mc: ModifiedCosts,
    trace: list[float] | None = None,
) -> tuple[int, ...]:
    """Depot-anchored tour order: nearest neighbor, then 2-opt and Or-opt
    (segments of 1-3) until no move improves. Deterministic for a given set."""
    nodes = sorted(targets)
    if not nodes:
        return ()
    c = mc.cprime
    for a, b in itertools.combinations([0, *nodes], 2):
        if not math.isfinite(c[a, b]):
            raise SolverError(f"no charge-feasible path between nodes {a} and {b}")

    # Nearest-neighbor construction from the depot.
    remaining = set(nodes)
    tour = []
    cur = 0
    while remaining:
        nxt = min(remaining, key=lambda t: (c[cur, t], t))
        tour.append(nxt)
        remaining.remove(nxt)
        cur = nxt

    def tour_len(t: list[int]) -> float:
        seq = [0, *t, 0]
        return sum(float(c[x, y]) for x, y in zip(seq, seq[1:]))

    if trace is not None:
        trace.append(tour_len(tour))

    n = len(tour)
    improved = True
    while improved:
        improved = False
        seq = [0, *tour, 0]
        # 2-opt: reverse tour[i..j]; endpoints against depot-anchored seq.
        for i in range(n - 1):
            if improved:
                break
            for j in range(i + 1, n):
                a, b = seq[i], seq[i + 1]
                y, d = seq[j + 1], seq[j + 2]
                delta = c[a, y] + c[b, d] - c[a, b] - c[y, d]
                if delta < -1e-12:
                    tour[i : j + 1] = reversed(tour[i : j + 1])
                    improved = True
                    if trace is not None:
                        trace.append(tour_len(tour))
                    break
        if improved:
            continue
        # Or-opt: relocate segments of length 1..3.
        for seg in (1, 2, 3):
            if improved:
                break
            for i in range(n - seg + 1):
                if improved:
                    break
                segment = tour[i : i + seg]
                rest = tour[:i] + tour[i + seg :]
                base = tour_len(tour)
                for j in range(len(rest) + 1):
                    if j == i:
                        continue
                    cand = rest[:j] + segment + rest[j:]
                    if tour_len(cand) < base - 1e-12:
                        tour = cand
                        improved = True
                        if trace is not None:
                            trace.append(tour_len(tour))
                        break
    return tuple(tour)


def held_karp(
    targets: Sequence[int] | frozenset[int], inst: Instance, mc: ModifiedCosts
) -> tuple[tuple[int, ...], float]:
    """Exact minimum depot-anchored tour over the modified costs (<= 15 targets)."""
    nodes = sorted(targets)
    n = len(nodes)
    if n > 15:
        raise ValueError(f"held_karp limited to 15 targets, got {n}")
    if n == 0:
        return (), 0.0
    c = mc.cprime
    # dp[mask][last] = (cost, parent)
    dp: list[dict[int, tuple[float, int]]] = [dict() for _ in range(1 << n)]
    for i in range(n):
        dp[1 << i][i] = (float(c[0, nodes[i]]), -1)
    for mask in range(1, 1 << n):
        entry = dp[mask]
        if not entry:
            continue
        for last, (cost, _) in list(entry.items()):
            for j in range(n):
                bit = 1 << j
                if mask & bit:
                    continue
                cand = cost + float(c[nodes[last], nodes[j]])
                cur = dp[mask | bit].get(j)
                if cur is None or cand < cur[0]:
                    dp[mask | bit][j] = (cand, last)
    full = (1 << n) - 1
    best_last = min(dp[full], key=lambda j: dp[full][j][0] + float(c[nodes[j], 0]))
    best_cost = dp[full][best_last][0] + float(c[nodes[best_last], 0])
    orderrev = []
    mask, last = full, best_last
    while last != -1:
        orderrev.append(nodes[last])
        mask, last = mask ^ (1 << last), dp[mask][last][1]
    return tuple(reversed(orderrev)), best_cost
