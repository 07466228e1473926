"""Ground-truth tooling: an exact min-max oracle for tiny instances, the
connectivity-cut separation routine for integer solutions, and a solver
agnostic LP-format exporter of the arc-flow model."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .charging import _chain_options, optimal_recharge
from .model import Instance, Solution
from .reachability import ModifiedCosts, build_modified_costs

INF = float("inf")

EXACT_MAX_TARGETS = 10
EXACT_MAX_FLEET = 3


@dataclass(frozen=True)
class IntegerSolutionView:
    """Integral arc/station usage per EV, as an external solver reports it."""

    edges: tuple[frozenset[tuple[int, int]], ...]
    stations: tuple[frozenset[int], ...]

    @property
    def n_evs(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class Cut:
    """A vertex subset witnessing a violated connectivity requirement.

    ``stations`` lists the used stations inside the subset; when it is empty
    the subset is a pure target subtour (flagged separately because the
    subset-form constraint is only defined for station-bearing subsets).
    """

    ev: int
    subset: frozenset[int]
    stations: tuple[int, ...]


def _strongly_connected_components(
    nodes: Iterable[int], out_edges: dict[int, list[int]]
) -> list[frozenset[int]]:
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    onstack: set[int] = set()
    stack: list[int] = []
    comps: list[frozenset[int]] = []
    counter = itertools.count()
    for root in nodes:
        if root in index:
            continue
        index[root] = low[root] = next(counter)
        stack.append(root)
        onstack.add(root)
        work: list[tuple[int, Iterable[int]]] = [(root, iter(out_edges.get(root, ())))]
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = next(counter)
                    stack.append(w)
                    onstack.add(w)
                    work.append((w, iter(out_edges.get(w, ()))))
                    advanced = True
                    break
                if w in onstack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    onstack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(frozenset(comp))
    return comps


def separate_connectivity(view: IntegerSolutionView, inst: Instance) -> list[Cut]:
    """Find violated connectivity requirements in an integral solution.

    Per EV, the graph over targets, the depot, and that EV's used stations is
    scanned for strongly connected components detached from the depot. Every
    such component that touches the EV's arcs or flagged stations yields one
    Cut; components holding a used station certify the subset-form violation,
    target-only components are emitted with an empty station list.
    """
    cuts: list[Cut] = []
    for ev in range(view.n_evs):
        used_stations = set(view.stations[ev])
        nodes = set(inst.target_nodes()) | {0} | used_stations
        out_edges: dict[int, list[int]] = {}
        touched: set[int] = set(used_stations)
        for i, j in sorted(view.edges[ev]):
            if i in nodes and j in nodes:
                out_edges.setdefault(i, []).append(j)
                touched.add(i)
                touched.add(j)
        for comp in _strongly_connected_components(sorted(nodes), out_edges):
            if 0 in comp or not (comp & touched):
                continue
            cuts.append(
                Cut(
                    ev=ev,
                    subset=comp,
                    stations=tuple(sorted(comp & used_stations)),
                )
            )
    cuts.sort(key=lambda c: (c.ev, min(c.subset)))
    return cuts


def format_cuts(cuts: Sequence[Cut]) -> str:
    """Structured text form of a cut list for external callback harnesses."""
    lines = []
    for c in cuts:
        subset = ",".join(str(n) for n in sorted(c.subset))
        stations = ",".join(str(n) for n in c.stations)
        lines.append(f"CUT ev={c.ev} stations={stations} subset={subset}")
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# LP-format model export


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def _row(name: str, terms: list[tuple[float, str]], sense: str, rhs: float) -> str:
    parts = [f" {name}:"]
    first = True
    for coef, var in terms:
        if coef == 0:
            continue
        if first:
            lead = "-" if coef < 0 else ""
            parts.append(f" {lead}{_fmt(abs(coef))} {var}")
            first = False
        else:
            sign = "-" if coef < 0 else "+"
            parts.append(f" {sign} {_fmt(abs(coef))} {var}")
    parts.append(f" {sense} {_fmt(rhs)}")
    return "".join(parts)


def export_mip(inst: Instance, prop1: bool = True) -> str:
    """Emit the arc-flow model as an LP-format text file.

    With ``prop1`` (default) the big-constant station-activation rows are
    replaced by per-arc linking rows и the station-use variables get relaxed
    [0, 1] bounds; otherwise the aggregated rows with constant q = |T| are
    written and the station-use variables stay binary. Subset connectivity
    rows are intentionally absent: the header directs users to add them
    lazily from integer solutions via the separation routine.
    """
    V = list(range(inst.n_nodes))
    T = list(inst.target_nodes())
    S = list(inst.station_nodes())
    D = [0, *S]
    M = list(range(inst.fleet_size))
    edges = [(i, j) for i in V for j in V if i != j]
    dist = {
        (i, j): ((inst.point(i)[0] - inst.point(j)[0]) ** 2 + (inst.point(i)[1] - inst.point(j)[1]) ** 2)
        ** 0.5
        for (i, j) in edges
    }
    rate = inst.consumption_rate
    cap = inst.battery_capacity

    def x(i: int, j: int, m: int) -> str:
        return f"x_{i}_{j}_{m}"

    def z(i: int, j: int, m: int) -> str:
        return f"z_{i}_{j}_{m}"

    def y(d: int, m: int) -> str:
        return f"y_{d}_{m}"

    out: list[str] = [
        f"\\ Min-max EV routing model: {inst.name}",
        "\\ Subset connectivity rows are omitted on purpose; add them lazily",
        "\\ from integer solutions using the connectivity separation routine.",
        f"\\ mode: {'per-arc station linking, relaxed station-use bounds' if prop1 else 'aggregated station activation with q = |T|'}",
        "Minimize",
        " obj: w",
        "Subject To",
    ]

    for m in M:
        terms = [(1.0, "w")] + [(-dist[i, j], x(i, j, m)) for (i, j) in edges]
        out.append(_row(f"maxlink_{m}", terms, ">=", 0.0))
    for m in M:
        for d in S:
            terms = [(1.0, x(d, i, m)) for i in V if i != d]
            terms += [(-1.0, x(i, d, m)) for i in V if i != d]
            out.append(_row(f"stdeg_{d}_{m}", terms, "=", 0.0))
    if prop1:
        for m in M:
            for d in S:
                for i in [0, *T]:
                    out.append(
                        _row(f"stlink_{d}_{i}_{m}", [(1.0, x(d, i, m)), (-1.0, y(d, m))], "<=", 0.0)
                    )
    else:
        q = float(inst.n_targets)
        for m in M:
            for d in S:
                terms = [(1.0, x(d, i, m)) for i in V if i != d]
                terms.append((-q, y(d, m)))
                out.append(_row(f"stact_{d}_{m}", terms, "<=", 0.0))
    for m in M:
        out.append(_row(f"depout_{m}", [(1.0, x(0, i, m)) for i in V if i != 0], "=", 1.0))
        out.append(_row(f"depin_{m}", [(1.0, x(i, 0, m)) for i in V if i != 0], "=", 1.0))
    for j in T:
        terms = [(1.0, x(i, j, m)) for m in M for i in V if i != j]
        out.append(_row(f"tin_{j}", terms, "=", 1.0))
        terms = [(1.0, x(j, i, m)) for m in M for i in V if i != j]
        out.append(_row(f"tout_{j}", terms, "=", 1.0))
    for m in M:
        for i in T:
            terms = [(1.0, z(i, j, m)) for j in V if j != i]
            terms += [(-1.0, z(j, i, m)) for j in V if j != i]
            terms += [(-rate * dist[i, j], x(i, j, m)) for j in V if j != i]
            out.append(_row(f"flow_{i}_{m}", terms, "=", 0.0))
    for m in M:
        for (i, j) in edges:
            out.append(_row(f"zcap_{i}_{j}_{m}", [(1.0, z(i, j, m)), (-cap, x(i, j, m))], "<=", 0.0))
    for m in M:
        for d in D:
            for i in T:
                out.append(
                    _row(
                        f"zinit_{d}_{i}_{m}",
                        [(1.0, z(d, i, m)), (-rate * dist[d, i], x(d, i, m))],
                        "=",
                        0.0,
                    )
                )

    out.append("Bounds")
    if prop1:
        for m in M:
            for d in S:
                out.append(f" 0 <= {y(d, m)} <= 1")
    out.append("Binaries")
    binaries = [x(i, j, m) for m in M for (i, j) in edges]
    if not prop1:
        binaries += [y(d, m) for m in M for d in S]
    for chunk_start in range(0, len(binaries), 8):
        out.append(" " + " ".join(binaries[chunk_start : chunk_start + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Exact min-max oracle


def _route_costs(inst: Instance, mc: ModifiedCosts) -> tuple[list[float], dict]:
    """Optimal closed-route length for every target subset, by a label DP.

    State is (visited mask, last target); labels are (length, charge) pairs
    with Pareto dominance. Chains between consecutive visits are priced by
    the station shortest-path matrix, so every order-preserving recharge
    plan is covered. Returns per-mask costs and the data needed to rebuild
    the minimizing visit order.
    """
    targets = list(inst.target_nodes())
    n = len(targets)
    cap = inst.battery_capacity
    rate = inst.consumption_rate
    dist = mc.dist

    nodes = [0, *targets]
    opts = {
        (u, v): _chain_options(u, v, inst, mc)
        for u in nodes
        for v in nodes
        if u != v
    }

    # labels[mask][last] = list of [length, charge, prev_last, prev_idx, alive]
    labels: list[dict[int, list[list]]] = [dict() for _ in range(1 << n)]

    def add_label(mask: int, last: int, lab: list) -> None:
        bucket = labels[mask].setdefault(last, [])
        for other in bucket:
            if other[4] and other[0] <= lab[0] + 1e-12 and other[1] >= lab[1] - 1e-12:
                return
        for other in bucket:
            if other[4] and lab[0] <= other[0] + 1e-12 and lab[1] >= other[1] - 1e-12:
                other[4] = False
        bucket.append(lab)

    for j, t in enumerate(targets):
        e = rate * float(dist[0, t])
        if e <= cap:
            add_label(1 << j, j, [float(dist[0, t]), cap - e, -1, -1, True])
        for e_in, add, _a, b in opts[(0, t)]:
            if e_in <= cap:
                add_label(
                    1 << j, j, [add, cap - rate * float(dist[b, t]), -1, -1, True]
                )

    for mask in range(1, 1 << n):
        for last, bucket in labels[mask].items():
            u = targets[last]
            for idx, lab in enumerate(bucket):
                if not lab[4]:
                    continue
                length, charge = lab[0], lab[1]
                for j in range(n):
                    bit = 1 << j
                    if mask & bit:
                        continue
                    v = targets[j]
                    e = rate * float(dist[u, v])
                    if e <= charge:
                        add_label(
                            mask | bit, j, [length + float(dist[u, v]), charge - e, last, idx, True]
                        )
                    for e_in, add, _a, b in opts[(u, v)]:
                        if e_in <= charge:
                            add_label(
                                mask | bit,
                                j,
                                [length + add, cap - rate * float(dist[b, v]), last, idx, True],
                            )

    costs = [INF] * (1 << n)
    closing: dict[int, tuple[int, int]] = {}
    costs[0] = 0.0
    for mask in range(1, 1 << n):
        best = INF
        best_at: tuple[int, int] | None = None
        for last, bucket in labels[mask].items():
            u = targets[last]
            for idx, lab in enumerate(bucket):
                length, charge = lab[0], lab[1]
                e = rate * float(dist[u, 0])
                if e <= charge and length + float(dist[u, 0]) < best:
                    best = length + float(dist[u, 0])
                    best_at = (last, idx)
                for e_in, add, _a, _b in opts[(u, 0)]:
                    if e_in <= charge and length + add < best:
                        best = length + add
                        best_at = (last, idx)
        costs[mask] = best
        if best_at is not None:
            closing[mask] = best_at
    return costs, {"labels": labels, "closing": closing, "targets": targets}


def _rebuild_order(mask: int, dp: dict) -> tuple[int, ...]:
    labels, closing, targets = dp["labels"], dp["closing"], dp["targets"]
    last, idx = closing[mask]
    order: list[int] = []
    while last != -1:
        order.append(targets[last])
        lab = labels[mask][last][idx]
        mask ^= 1 << last
        last, idx = lab[2], lab[3]
    return tuple(reversed(order))


def _submasks_with_low_bit(mask: int):
    low = mask & -mask
    rest = mask ^ low
    sub = rest
    while True:
        yield sub | low
        if sub == 0:
            return
        sub = (sub - 1) & rest


def exact_minmax(inst: Instance) -> Solution:
    """Provably optimal min-max solution by exhaustive partition enumeration.

    Every split of the targets into at most fleet_size groups (enumerated
    once per EV-relabeling class) is priced with the optimal closed-route
    length of each group; the recharging semantics match the arc-flow model
    (full recharge at stations, linear consumption, order-preserving station
    chains between consecutive visits).
    """
    n = inst.n_targets
    m = inst.fleet_size
    if n > EXACT_MAX_TARGETS or m > EXACT_MAX_FLEET:
        raise ValueError(
            f"exact_minmax guard: at most {EXACT_MAX_TARGETS} targets and "
            f"{EXACT_MAX_FLEET} EVs (got {n}, {m})"
        )
    mc = build_modified_costs(inst)
    costs, dp = _route_costs(inst, mc)
    full = (1 << n) - 1

    best_obj = INF
    best_parts: tuple[int, ...] | None = None

    def consider(parts: tuple[int, ...]) -> None:
        nonlocal best_obj, best_parts
        obj = max(costs[p] for p in parts)
        key = tuple(sorted(parts, reverse=True))
        if obj < best_obj - 1e-12 or (
            abs(obj - best_obj) <= 1e-12 and (best_parts is None or key < best_parts)
        ):
            best_obj = obj
            best_parts = key

    if m == 1:
        consider((full,))
    elif m == 2:
        for s1 in _submasks_with_low_bit(full):
            consider((s1, full ^ s1))
    else:
        for s1 in _submasks_with_low_bit(full):
            rest = full ^ s1
            if rest == 0:
                consider((s1, 0, 0))
                continue
            for s2 in _submasks_with_low_bit(rest):
                consider((s1, s2, rest ^ s2))

    if best_parts is None or not all(costs[p] < INF for p in best_parts):
        from .model import SolverError

        bad = [t for j, t in enumerate(dp["targets"]) if costs[1 << j] == INF]
        raise SolverError(f"no feasible exact solution; unreachable targets: {bad}")

    routes: list[tuple[int, ...]] = []
    plans = []
    for part in best_parts:
        order = _rebuild_order(part, dp) if part else ()
        plan = optimal_recharge(order, inst, mc)
        routes.append(order)
        plans.append(plan)
    while len(routes) < m:
        routes.append(())
        plans.append(optimal_recharge((), inst, mc))
    lengths = [p.length for p in plans]
    return Solution(
        routes=tuple(routes),
        plans=tuple(plans),
        objective=max(lengths),
        total_distance=sum(lengths),
    )
