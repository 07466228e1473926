"""Variable neighborhood search over complete solutions.

Insertion neighborhoods move one, two, or three targets out of the longest
route; a randomized swap phase runs between neighborhood escalations. The
search feeds a pool of high-quality solutions to the genetic phase.
"""

from __future__ import annotations

import itertools
import math
import random
import time
from dataclasses import dataclass

from .charging import build_solution
from .construction import order_route
from .model import Instance, Solution
from .reachability import ModifiedCosts

INF = float("inf")


@dataclass(frozen=True)
class VnsParams:
    li_max: int = 40
    ls_max: int = 25
    pool_slack: float = 0.15

    def __post_init__(self) -> None:
        if self.li_max < 1:
            raise ValueError("li_max must be at least 1")
        if self.ls_max < 0:
            raise ValueError("ls_max must be non-negative")
        if not 0 <= self.pool_slack < 1:
            raise ValueError("pool_slack must lie in [0, 1)")


def _route_key(routes: tuple[tuple[int, ...], ...]) -> tuple:
    return tuple(sorted(routes))


class SolutionPool:
    """Distinct solutions within a slack band of the best one seen.

    Improving solutions always enter and tighten the band; non-improving ones
    enter only while within (1 + slack) of the incumbent. Entries that fall
    outside the band after an improvement are pruned, so the band invariant
    holds at all times.
    """

    def __init__(self, slack: float = 0.15):
        self.slack = slack
        self.entries: dict[tuple, Solution] = {}
        self.incumbent: Solution | None = None
        self.evaluations = 0
        self.incumbent_trace: list[float] = []

    def __len__(self) -> int:
        return len(self.entries)

    def count_eval(self) -> None:
        self.evaluations += 1

    def admit(self, sol: Solution) -> bool:
        if self.incumbent is None or sol.objective < self.incumbent.objective:
            self.incumbent = sol
            self.entries[_route_key(sol.routes)] = sol
            bound = (1 + self.slack) * sol.objective
            self.entries = {k: s for k, s in self.entries.items() if s.objective <= bound}
            return True
        if sol.objective <= (1 + self.slack) * self.incumbent.objective:
            self.entries.setdefault(_route_key(sol.routes), sol)
            return True
        return False

    def sorted(self) -> list[Solution]:
        return sorted(self.entries.values(), key=lambda s: (s.objective, _route_key(s.routes)))


# ---------------------------------------------------------------------------
# Move primitives


def removal_savings(route: tuple[int, ...] | list[int], position: int, inst: Instance) -> float:
    """Length saved by deleting the target at ``position`` from the route."""
    seq = [0, *route, 0]
    j, i, k = seq[position], seq[position + 1], seq[position + 2]
    pj, pi, pk = inst.point(j), inst.point(i), inst.point(k)
    return math.dist(pj, pi) + math.dist(pi, pk) - math.dist(pj, pk)


def cheapest_insertion(
    target: int, route: tuple[int, ...] | list[int], inst: Instance
) -> tuple[int, float]:
    """Position (0..len) and detour cost of the cheapest insertion of target."""
    seq = [0, *route, 0]
    pt = inst.point(target)
    best_pos, best_cost = 0, INF
    for pos in range(len(route) + 1):
        pa, pb = inst.point(seq[pos]), inst.point(seq[pos + 1])
        cost = math.dist(pa, pt) + math.dist(pt, pb) - math.dist(pa, pb)
        if cost < best_cost - 1e-12:
            best_pos, best_cost = pos, cost
    return best_pos, best_cost


def _longest_route(sol: Solution) -> int:
    lengths = [p.length for p in sol.plans]
    return lengths.index(max(lengths))


def neighborhood_insertion(
    sol: Solution,
    k: int,
    inst: Instance,
    mc: ModifiedCosts,
    *,
    pool: SolutionPool | None = None,
    max_evals: int | None = None,
) -> Solution | None:
    """First improving k-target relocation out of the longest route.

    Candidate target sets are scanned in decreasing removal-savings order;
    each moved target goes to its cheapest-insertion route, donor and
    receivers are re-ordered and re-repaired, and the first feasible
    candidate that strictly improves the objective is returned. None when
    the scan (capped at ``max_evals`` evaluations) finds none.
    """
    donor_idx = _longest_route(sol)
    donor = sol.routes[donor_idx]
    if len(donor) < k:
        return None
    savings = {t: removal_savings(donor, pos, inst) for pos, t in enumerate(donor)}
    combos = sorted(
        itertools.combinations(sorted(donor), k),
        key=lambda ts: (-sum(savings[t] for t in ts), ts),
    )
    evals = 0
    for combo in combos:
        moved = sorted(combo, key=lambda t: (-savings[t], t))
        routes = [list(r) for r in sol.routes]
        routes[donor_idx] = [t for t in donor if t not in combo]
        ok = True
        for t in moved:
            best = None  # (cost, route index, position)
            for ri, route in enumerate(routes):
                if ri == donor_idx:
                    continue
                pos, cost = cheapest_insertion(t, route, inst)
                if best is None or cost < best[0] - 1e-12:
                    best = (cost, ri, pos)
            if best is None:
                ok = False
                break
            routes[best[1]].insert(best[2], t)
        if not ok:
            continue
        touched = {donor_idx} | {ri for ri in range(len(routes)) if set(routes[ri]) != set(sol.routes[ri])}
        for ri in touched:
            routes[ri] = list(order_route(routes[ri], inst, mc))
        cand = build_solution(routes, inst)
        evals += 1
        if pool is not None:
            pool.count_eval()
        if cand is not None:
            if pool is not None:
                pool.admit(cand)
            if cand.objective < sol.objective - 1e-9:
                return cand
        if max_evals is not None and evals >= max_evals:
            return None
    return None


def neighborhood_swap(
    sol: Solution,
    rng: random.Random,
    inst: Instance,
    mc: ModifiedCosts,
    *,
    pool: SolutionPool | None = None,
) -> Solution | None:
    """Exchange a random longest-route target with the best-matching target
    of the cheapest-insertion route; returns the repaired result or None."""
    nonempty = [i for i, r in enumerate(sol.routes) if r]
    if len(nonempty) < 2:
        return None
    donor_idx = _longest_route(sol)
    donor = sol.routes[donor_idx]
    t = donor[rng.randrange(len(donor))]

    best_recv = None  # (cost, route index)
    for ri in nonempty:
        if ri == donor_idx:
            continue
        _, cost = cheapest_insertion(t, sol.routes[ri], inst)
        if best_recv is None or cost < best_recv[0] - 1e-12:
            best_recv = (cost, ri)
    recv_idx = best_recv[1]
    receiver = sol.routes[recv_idx]

    c = mc.cprime

    def est_len(targets: list[int]) -> float:
        seq = [0, *order_route(targets, inst, mc), 0]
        return sum(float(c[a, b]) for a, b in zip(seq, seq[1:]))

    t_pos = donor.index(t)
    best_u = None  # (estimated max, position of u)
    for u_pos, u in enumerate(receiver):
        d_est = est_len([u if x == t else x for x in donor])
        r_est = est_len([t if x == u else x for x in receiver])
        score = max(d_est, r_est)
        if best_u is None or score < best_u[0] - 1e-12:
            best_u = (score, u_pos)
    u = receiver[best_u[1]]

    routes = [list(r) for r in sol.routes]
    routes[donor_idx][t_pos] = u
    routes[recv_idx][best_u[1]] = t
    routes[donor_idx] = list(order_route(routes[donor_idx], inst, mc))
    routes[recv_idx] = list(order_route(routes[recv_idx], inst, mc))
    cand = build_solution(routes, inst)
    if pool is not None:
        pool.count_eval()
        if cand is not None:
            pool.admit(cand)
    return cand


def vns_search(
    initial: Solution,
    params: VnsParams,
    rng: random.Random,
    inst: Instance,
    mc: ModifiedCosts,
    *,
    deadline: float | None = None,
) -> SolutionPool:
    """Escalating insertion neighborhoods with swap phases in between.

    Improvements reset the search to the one-target neighborhood; after the
    three-target neighborhood and its swap budget are exhausted without an
    improvement the search stops. Every evaluated feasible candidate is
    offered to the pool, which keeps those within the slack band.
    """
    pool = SolutionPool(params.pool_slack)
    pool.admit(initial)
    pool.incumbent_trace.append(initial.objective)
    inc = initial
    k = 1
    while True:
        if deadline is not None and time.monotonic() > deadline:
            break
        cand = neighborhood_insertion(
            inc, k, inst, mc, pool=pool, max_evals=params.li_max
        )
        if cand is not None:
            inc = cand
            pool.incumbent_trace.append(inc.objective)
            k = 1
            continue
        if k == 3:
            break
        # Swap phase between neighborhood escalations: improvements reset the
        # swap counter, so the phase ends on ls_max consecutive failures.
        improved = False
        fails = 0
        while fails < params.ls_max:
            if deadline is not None and time.monotonic() > deadline:
                break
            swapped = neighborhood_swap(inc, rng, inst, mc, pool=pool)
            if swapped is not None and swapped.objective < inc.objective - 1e-9:
                inc = swapped
                pool.incumbent_trace.append(inc.objective)
                improved = True
                fails = 0
            else:
                fails += 1
        if improved:
            k = 1
            continue
        k += 1
    return pool
