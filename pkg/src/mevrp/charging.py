"""Charge-feasibility repair of target orders, exact recharging plans, and
post-improvement repositioning of station visits.

All three operations keep the target order fixed; they only decide where (and
whether) station visits are spliced in between consecutive order nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import Instance, Solution

INF = float("inf")

BACKWARD_TO_DEPOT = "backward-to-depot"
STATIONS_EXHAUSTED = "all-stations-exhausted-on-edge"
TARGET_EXIT_IMPOSSIBLE = "target-exit-impossible"

REASONS = (BACKWARD_TO_DEPOT, STATIONS_EXHAUSTED, TARGET_EXIT_IMPOSSIBLE)


@dataclass(frozen=True)
class RechargingPlan:
    """A route expanded with station visits and the charge bookkeeping.

    ``nodes`` starts and ends at the depot (a single-element (0,) sequence
    means an idle EV). ``arrival_charge[k]`` is the charge on arrival at
    ``nodes[k]``; charge resets to capacity on departure from the depot and
    from every station.
    """

    nodes: tuple[int, ...]
    leg_energies: tuple[float, ...]
    arrival_charge: tuple[float, ...]
    length: float
    recharges: int

    def targets(self, inst: Instance) -> tuple[int, ...]:
        return tuple(n for n in self.nodes if 1 <= n <= inst.n_targets)


@dataclass(frozen=True)
class RepairStatus:
    """Outcome of the feasibility repair: a plan, or a reason it failed."""

    plan: RechargingPlan | None
    reason: str | None = None

    @property
    def feasible(self) -> bool:
        return self.plan is not None


def _empty_plan(inst: Instance) -> RechargingPlan:
    return RechargingPlan(
        nodes=(0,),
        leg_energies=(),
        arrival_charge=(inst.battery_capacity,),
        length=0.0,
        recharges=0,
    )


def build_plan(nodes: Sequence[int], inst: Instance) -> RechargingPlan:
    """Simulate a depot-anchored walk into a plan; raises if charge dips below 0."""
    if len(nodes) == 1:
        return _empty_plan(inst)
    cap = inst.battery_capacity
    first_station = inst.n_targets + 1
    z = cap
    legs: list[float] = []
    arrivals: list[float] = [cap]
    length = 0.0
    recharges = 0
    for a, b in zip(nodes, nodes[1:]):
        e = inst.energy(inst.point(a), inst.point(b))
        z -= e
        if z < 0:
            raise ValueError(f"walk {nodes} runs out of charge on leg {a}->{b}")
        legs.append(e)
        arrivals.append(z)
        length += math.dist(inst.point(a), inst.point(b))
        if b >= first_station:
            recharges += 1
            z = cap
    return RechargingPlan(
        nodes=tuple(nodes),
        leg_energies=tuple(legs),
        arrival_charge=tuple(arrivals),
        length=length,
        recharges=recharges,
    )


def _nearest_to(node: int, inst: Instance, exclude: Iterable[int] = ()) -> int | None:
    """Nearest station node to a node, lowest index on ties, or None."""
    skip = set(exclude)
    p = inst.point(node)
    best, best_e = None, INF
    for s in inst.station_nodes():
        if s in skip:
            continue
        e = inst.energy(p, inst.point(s))
        if e < best_e:
            best, best_e = s, e
    return best


def repair_route(order: Sequence[int], inst: Instance) -> RepairStatus:
    """Walk the depot-anchored order edge by edge, splicing in stations.

    A direct move is taken whenever charge allows. Otherwise the station
    nearest to the edge's head is tried (must be reachable now and leave
    enough capacity to finish the edge after a full recharge), then the
    nearest not-yet-used station to the edge's tail. If neither works the
    previous edge is undone (charge restored, its station markers cleared)
    and redone with a forced station insertion. Infeasibility is reported
    as one of three reason codes, never as an exception.
    """
    order = list(order)
    if not order:
        return RepairStatus(_empty_plan(inst))
    seq = [0, *order, 0]
    n_edges = len(seq) - 1
    cap = inst.battery_capacity
    stations = set(inst.station_nodes())

    energy = inst.energy
    pt = inst.point

    z = cap
    i = 0
    force = False
    inserted: list[int | None] = [None] * n_edges
    used: list[set[int]] = [set() for _ in range(n_edges)]
    pre_charge: list[float] = [cap] * n_edges  # charge when departing seq[i]
    backward_moves = 0
    max_backward = 2 * len(order)

    while i < n_edges:
        u, v = seq[i], seq[i + 1]
        pre_charge[i] = z
        f_uv = energy(pt(u), pt(v))
        moved = False
        if not force and z >= f_uv:
            inserted[i] = None
            z -= f_uv
            moved = True
        else:
            s2 = _nearest_to(v, inst, exclude=used[i])
            if (
                s2 is not None
                and z >= energy(pt(u), pt(s2))
                and cap >= energy(pt(s2), pt(v))
            ):
                inserted[i] = s2
                used[i].add(s2)
                z = cap - energy(pt(s2), pt(v))
                moved = True
            else:
                s3 = _nearest_to(u, inst, exclude=used[i] | ({s2} if s2 is not None else set()))
                if (
                    s3 is not None
                    and z >= energy(pt(u), pt(s3))
                    and cap >= energy(pt(s3), pt(v))
                ):
                    inserted[i] = s3
                    used[i].add(s3)
                    z = cap - energy(pt(s3), pt(v))
                    moved = True
        if moved:
            i += 1
            force = False
            continue

        # Forward move failed on edge i.
        reachable = {s for s in stations if z >= energy(pt(u), pt(s))}
        if i == 0:
            reason = TARGET_EXIT_IMPOSSIBLE if not reachable else BACKWARD_TO_DEPOT
            return RepairStatus(None, reason)
        if not reachable and inserted[i - 1] is not None and inserted[i - 1] == _nearest_to(u, inst):
            # Cannot exit this target, and its closest station is the one the
            # previous edge already visited; backing up cannot do better.
            return RepairStatus(None, TARGET_EXIT_IMPOSSIBLE)
        if stations and used[i] >= stations:
            return RepairStatus(None, STATIONS_EXHAUSTED)
        backward_moves += 1
        if backward_moves > max_backward:
            return RepairStatus(None, STATIONS_EXHAUSTED)
        # Undo edge i-1: restore charge, clear its markers, redo with a
        # forced station insertion.
        i -= 1
        z = pre_charge[i]
        inserted[i] = None
        used[i].clear()
        force = True

    walk: list[int] = [0]
    for e in range(n_edges):
        if inserted[e] is not None:
            walk.append(inserted[e])
        walk.append(seq[e + 1])
    return RepairStatus(build_plan(walk, inst))


# ---------------------------------------------------------------------------
# Exact recharging plans for a fixed order


def _chain_options(u: int, v: int, inst: Instance, mc) -> list[tuple[float, float, int, int]]:
    """Station-chain detours for one gap: (entry energy, added length, a, b).

    Entry requires current charge >= energy(u, a); interior hops obey the
    per-hop capacity bound via the precomputed station chain matrix; the
    exit leg b -> v must fit in a full battery. Dominated options are pruned.
    """
    cap = inst.battery_capacity
    rate = inst.consumption_rate
    s0 = inst.n_targets + 1
    opts: list[tuple[float, float, float, int, int]] = []
    for a in inst.station_nodes():
        e_in = rate * float(mc.dist[u, a])
        if e_in > cap:
            continue
        for b in inst.station_nodes():
            mid = float(mc.station_dist[a - s0, b - s0])
            if not math.isfinite(mid):
                continue
            e_out = rate * float(mc.dist[b, v])
            if e_out > cap:
                continue
            add = float(mc.dist[u, a]) + mid + float(mc.dist[b, v])
            opts.append((e_in, add, cap - e_out, a, b))
    pruned: list[tuple[float, float, float, int, int]] = []
    for o in sorted(opts):
        if not any(
            p[0] <= o[0] and p[1] <= o[1] and p[2] >= o[2] for p in pruned
        ):
            pruned.append(o)
    return [(o[0], o[1], o[3], o[4]) for o in pruned]


def optimal_recharge(order: Sequence[int], inst: Instance, mc) -> RechargingPlan | None:
    """Minimum-length recharging plan preserving the target order.

    Dynamic program over (position, last full-recharge anchor); between-target
    station chains are priced by shortest paths on the station graph. Returns
    None when no plan exists.
    """
    order = list(order)
    if not order:
        return _empty_plan(inst)
    seq = [0, *order, 0]
    n_pos = len(seq)
    cap = inst.battery_capacity
    rate = inst.consumption_rate

    pref = [0.0] * n_pos  # direct-leg energy prefix sums
    for k in range(1, n_pos):
        pref[k] = pref[k - 1] + rate * float(mc.dist[seq[k - 1], seq[k]])

    def charge_at(k: int, anchor: tuple[int, int] | None) -> float:
        if anchor is None:
            return cap - pref[k]
        g, b = anchor
        return cap - rate * float(mc.dist[b, seq[g + 1]]) - (pref[k] - pref[g + 1])

    # dp[k][anchor] = (length, parent anchor, chain spliced into gap k-1)
    dp: list[dict[tuple[int, int] | None, tuple[float, tuple[int, int] | None, tuple[int, ...]]]] = [
        {} for _ in range(n_pos)
    ]
    dp[0][None] = (0.0, None, ())
    for k in range(n_pos - 1):
        if not dp[k]:
            continue
        u, v = seq[k], seq[k + 1]
        direct_len = float(mc.dist[u, v])
        direct_e = rate * direct_len
        options = _chain_options(u, v, inst, mc)
        for anchor, (length, _, _) in dp[k].items():
            z = charge_at(k, anchor)
            if z >= direct_e:
                cand = length + direct_len
                cur = dp[k + 1].get(anchor)
                if cur is None or cand < cur[0]:
                    dp[k + 1][anchor] = (cand, anchor, ())
            for e_in, add, a, b in options:
                if e_in > z:
                    continue
                new_anchor = (k, b)
                cand = length + add
                cur = dp[k + 1].get(new_anchor)
                if cur is None or cand < cur[0]:
                    dp[k + 1][new_anchor] = (cand, anchor, mc.station_path(a, b))

    if not dp[n_pos - 1]:
        return None
    best_anchor = min(dp[n_pos - 1], key=lambda a: dp[n_pos - 1][a][0])
    chains: list[tuple[int, ...]] = [()] * (n_pos - 1)
    anchor = best_anchor
    for k in range(n_pos - 1, 0, -1):
        _, parent, chain = dp[k][anchor]
        chains[k - 1] = chain
        anchor = parent
    walk: list[int] = [0]
    for k in range(n_pos - 1):
        walk.extend(chains[k])
        walk.append(seq[k + 1])
    return build_plan(walk, inst)


# ---------------------------------------------------------------------------
# Post-improvement: reposition station visits, target order unchanged


def optimize_station_placement(plan: RechargingPlan, inst: Instance) -> RechargingPlan:
    """Re-place station visits along the plan's target order.

    Walks the order gap by gap, carrying feasible partial routes as
    (length, remaining-charge) records: each gap is either traversed directly
    or through one eligible station (eligible: directly reachable from the
    preceding node with the charge on hand, and able to reach the following
    node after a full recharge). The shortest completed feasible route is
    returned; the input plan is kept whenever nothing strictly shorter turns
    up, so the result never gets longer. Multi-station chains inside a single
    gap are never generated; those remain the recharge DP's business.
    """
    if plan.recharges == 0:
        return plan
    order = plan.targets(inst)
    seq = [0, *order, 0]
    cap = inst.battery_capacity
    stations = list(inst.station_nodes())

    def leg(a: int, b: int) -> tuple[float, float]:
        d = math.dist(inst.point(a), inst.point(b))
        return d, inst.consumption_rate * d

    # Partial = (length, charge, nodes); all partials in a batch sit at the
    # same position of the order, so (length, charge) dominance is sound.
    partials: list[tuple[float, float, list[int]]] = [(0.0, cap, [0])]
    for g in range(len(seq) - 1):
        u, v = seq[g], seq[g + 1]
        d_uv, e_uv = leg(u, v)
        batch: list[tuple[float, float, list[int]]] = []
        for length, z, nodes in partials:
            if z >= e_uv:
                batch.append((length + d_uv, z - e_uv, nodes + [v]))
            for s in stations:
                d_in, e_in = leg(u, s)
                d_out, e_out = leg(s, v)
                if z < e_in or cap < e_out:
                    continue
                batch.append((length + d_in + d_out, cap - e_out, nodes + [s, v]))
        if not batch:
            return plan
        batch.sort(key=lambda p: (p[0], -p[1]))
        partials = []
        best_charge = -INF
        for p in batch:
            if p[1] > best_charge + 1e-12:
                partials.append(p)
                best_charge = p[1]

    best = min(partials, key=lambda p: p[0])
    if best[0] >= plan.length - 1e-12:
        return plan
    return build_plan(best[2], inst)


# ---------------------------------------------------------------------------
# Assembling whole solutions


def route_statuses(routes: Sequence[Sequence[int]], inst: Instance) -> list[RepairStatus]:
    return [repair_route(r, inst) for r in routes]


def build_solution(routes: Sequence[Sequence[int]], inst: Instance) -> Solution | None:
    """Repair every route and assemble a Solution; None if any route fails."""
    plans: list[RechargingPlan] = []
    for r in routes:
        status = repair_route(r, inst)
        if not status.feasible:
            return None
        plans.append(status.plan)
    lengths = [p.length for p in plans]
    return Solution(
        routes=tuple(tuple(r) for r in routes),
        plans=tuple(plans),
        objective=max(lengths),
        total_distance=sum(lengths),
    )
