"""Nearest-station data and the charge-feasibility-aware modified cost matrix.

Two nodes are directly reachable when the leg's energy fits inside the
battery after reserving, at both endpoints, enough charge to bail out to the
nearest station. Pairs that fail the test are priced by the shortest
station-chained detour; pairs with no detour get an infinite cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Instance, InstanceError, Point

INF = float("inf")


@dataclass(frozen=True)
class ModifiedCosts:
    """Per-pair charge-feasible travel costs on the full node set.

    ``fmin[i]`` is the energy from node i to its nearest station,
    ``nearest[i]`` that station's node index. ``cprime`` is the |V|x|V|
    modified cost matrix (infinite entries mean no charge-feasible path) and
    ``via`` maps detour pairs to the station node sequence realizing them.
    ``dist`` is the plain Euclidean matrix; ``station_dist`` holds
    station-to-station chain distances restricted to per-hop energies <= F.
    """

    fmin: tuple[float, ...]
    nearest: tuple[int, ...]
    cprime: np.ndarray
    via: dict[tuple[int, int], tuple[int, ...]]
    dist: np.ndarray
    station_dist: np.ndarray
    _station_next: np.ndarray

    def cost(self, i: int, j: int) -> float:
        return float(self.cprime[i, j])

    def station_path(self, a: int, b: int) -> tuple[int, ...]:
        """Station node sequence from station a to station b, inclusive."""
        n_off = len(self.fmin) - self.station_dist.shape[0]
        ai, bi = a - n_off, b - n_off
        if not math.isfinite(self.station_dist[ai, bi]):
            raise InstanceError(f"stations {a} and {b} are not chain-connected")
        path = [a]
        while ai != bi:
            ai = int(self._station_next[ai, bi])
            path.append(ai + n_off)
        return tuple(path)


def nearest_station(i: int, inst: Instance) -> tuple[int, float]:
    """Station node minimizing energy from node i; ties go to the lowest index."""
    if inst.n_stations == 0:
        raise InstanceError("instance has no charging stations")
    p = inst.point(i)
    best_node, best_e = -1, INF
    for s in inst.station_nodes():
        e = inst.energy(p, inst.point(s))
        if e < best_e:
            best_node, best_e = s, e
    return best_node, best_e


def direct_reachable(i: int, j: int, mc: ModifiedCosts, inst: Instance) -> bool:
    """True iff the i->j leg fits after both endpoints' bail-out reserves."""
    e = inst.consumption_rate * float(mc.dist[i, j])
    return e <= inst.battery_capacity - mc.fmin[i] - mc.fmin[j]


def _station_chain_matrix(dist_ss: np.ndarray, rate: float, capacity: float) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs shortest chains among stations; hops with energy > F are cut."""
    s = dist_ss.shape[0]
    chain = np.where(rate * dist_ss <= capacity, dist_ss, INF)
    np.fill_diagonal(chain, 0.0)
    nxt = np.tile(np.arange(s), (s, 1))
    nxt[~np.isfinite(chain)] = -1
    np.fill_diagonal(nxt, np.arange(s))
    for k in range(s):
        through = chain[:, k : k + 1] + chain[k : k + 1, :]
        better = through < chain
        chain = np.where(better, through, chain)
        nxt = np.where(better, nxt[:, k : k + 1], nxt)
    return chain, nxt


def build_modified_costs(inst: Instance) -> ModifiedCosts:
    """Compute the full modified cost matrix for an instance."""
    pts = np.array([inst.point(i) for i in range(inst.n_nodes)])
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    rate, cap = inst.consumption_rate, inst.battery_capacity
    n = inst.n_nodes
    s0 = inst.n_targets + 1
    n_s = inst.n_stations

    if n_s == 0:
        fmin = np.full(n, INF)
        nearest = np.full(n, -1, dtype=int)
        station_dist = np.zeros((0, 0))
        nxt = np.zeros((0, 0), dtype=int)
        cprime = np.where(np.eye(n, dtype=bool), 0.0, INF)
        return ModifiedCosts(
            fmin=tuple(fmin),
            nearest=tuple(int(x) for x in nearest),
            cprime=cprime,
            via={},
            dist=dist,
            station_dist=station_dist,
            _station_next=nxt,
        )

    e_to_station = rate * dist[:, s0:]
    fmin = e_to_station.min(axis=1)
    nearest = s0 + e_to_station.argmin(axis=1)

    direct = rate * dist <= cap - fmin[:, None] - fmin[None, :]

    station_dist, nxt = _station_chain_matrix(dist[s0:, s0:], rate, cap)

    # Detour pricing: enter some station a from i (reserve fmin[i]), chain to
    # station b, leave for j (reserve fmin[j]); minimized over (a, b).
    entry = np.where(rate * dist[:, s0:] <= cap - fmin[:, None], dist[:, s0:], INF)
    exit_ = np.where(rate * dist[s0:, :] <= cap - fmin[None, :], dist[s0:, :], INF)
    to_b = entry[:, :, None] + station_dist[None, :, :]  # i x a x b
    best_to_b = to_b.min(axis=1)  # i x b
    arg_a = to_b.argmin(axis=1)
    full = best_to_b[:, :, None] + exit_[None, :, :]  # i x b x j
    detour = full.min(axis=1)
    arg_b = full.argmin(axis=1)

    cprime = np.where(direct, dist, detour)
    np.fill_diagonal(cprime, 0.0)

    via: dict[tuple[int, int], tuple[int, ...]] = {}
    nondirect = ~direct & np.isfinite(detour)
    np.fill_diagonal(nondirect, False)
    for i, j in zip(*np.nonzero(nondirect)):
        b = int(arg_b[i, j])
        a = int(arg_a[i, b])
        chain = [a]
        while a != b:
            a = int(nxt[a, b])
            chain.append(a)
        via[(int(i), int(j))] = tuple(s0 + k for k in chain)

    return ModifiedCosts(
        fmin=tuple(float(x) for x in fmin),
        nearest=tuple(int(x) for x in nearest),
        cprime=cprime,
        via=via,
        dist=dist,
        station_dist=station_dist,
        _station_next=nxt,
    )


def costs_from_point(p: Point, inst: Instance, mc: ModifiedCosts) -> np.ndarray:
    """Modified costs from an arbitrary point to every node.

    Used for perturbed depot copies, which are not instance nodes. The point
    gets the same bail-out reserve treatment as a real node.
    """
    rate, cap = inst.consumption_rate, inst.battery_capacity
    pts = np.array([inst.point(i) for i in range(inst.n_nodes)])
    d = np.sqrt(((pts - np.array(p)) ** 2).sum(axis=1))
    s0 = inst.n_targets + 1
    if inst.n_stations == 0:
        return np.full(inst.n_nodes, INF)
    d_st = d[s0:]
    fmin_p = rate * d_st.min()
    fmin = np.array(mc.fmin)
    direct = rate * d <= cap - fmin_p - fmin
    entry = np.where(rate * d_st <= cap - fmin_p, d_st, INF)
    exit_ = np.where(rate * mc.dist[s0:, :] <= cap - fmin[None, :], mc.dist[s0:, :], INF)
    best_to_b = (entry[:, None] + mc.station_dist).min(axis=0)
    detour = (best_to_b[:, None] + exit_).min(axis=0)
    return np.where(direct, d, detour)
