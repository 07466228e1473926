import math
import random

import numpy as np
import pytest

from mevrp.model import Instance, generate_random
from mevrp.reachability import (
    build_modified_costs,
    costs_from_point,
    direct_reachable,
    nearest_station,
)

INF = float("inf")


def make(depot, targets, stations, cap=100.0, rate=0.8, fleet=1):
    return Instance("t", depot, tuple(targets), tuple(stations), fleet, cap, rate)


def test_nearest_station_derived():
    inst = make((50, 50), [(10.0, 10.0)], [(0.0, 0.0), (20.0, 20.0)])
    node, fmin = nearest_station(1, inst)
    # Equidistant stations: the tie goes to the lower station index.
    assert node == 2
    assert fmin == pytest.approx(0.8 * math.sqrt(200), abs=1e-4)
    assert fmin == pytest.approx(11.3137, abs=1e-4)


def test_nearest_station_single():
    inst = make((50, 50), [(10.0, 10.0)], [(10.0, 11.0)], rate=0.8)
    node, fmin = nearest_station(1, inst)
    assert node == 2
    assert fmin == pytest.approx(0.8)


def test_nearest_station_requires_stations():
    inst = make((50, 50), [(10.0, 10.0)], [])
    with pytest.raises(Exception):
        nearest_station(1, inst)


def test_direct_reachable_hand_cases():
    # Far pair with one mid station: energy 96 exceeds 100 - 48 - 48.
    inst = make((50, 10), [(0.0, 0.0), (120.0, 0.0)], [(60.0, 0.0)], rate=0.8)
    mc = build_modified_costs(inst)
    assert not direct_reachable(1, 2, mc, inst)
    # Close pair around a central station: 16 <= 100 - 8 - 8.
    inst2 = make((10, 10), [(40.0, 50.0), (60.0, 50.0)], [(50.0, 50.0)], rate=0.8)
    mc2 = build_modified_costs(inst2)
    assert direct_reachable(1, 2, mc2, inst2)


def test_direct_unreachable_when_energy_exceeds_capacity():
    inst = make((50, 10), [(0.0, 0.0), (200.0, 0.0)], [(100.0, 0.0)], rate=1.0)
    mc = build_modified_costs(inst)
    assert not direct_reachable(1, 2, mc, inst)


def test_modified_costs_collinear_detour():
    inst = make((50, 90), [(0.0, 0.0), (120.0, 0.0)], [(60.0, 0.0)], rate=0.8)
    mc = build_modified_costs(inst)
    assert mc.cprime[1, 2] == pytest.approx(120.0)
    assert mc.via[(1, 2)] == (3,)


def test_modified_costs_direct_pair():
    inst = make((10, 10), [(40.0, 50.0), (60.0, 50.0)], [(50.0, 50.0)], rate=0.8)
    mc = build_modified_costs(inst)
    assert mc.cprime[1, 2] == pytest.approx(20.0)
    assert (1, 2) not in mc.via


def test_modified_costs_unreachable_is_infinite():
    # No station within range of target 1: every non-direct pair is cut off.
    inst = make((0, 0), [(300.0, 0.0), (600.0, 0.0)], [(450.0, 0.0)], cap=100, rate=1.0)
    mc = build_modified_costs(inst)
    assert mc.cprime[1, 2] == INF
    assert mc.cprime[0, 1] == INF


def _oracle_pair_cost(i, j, inst):
    """Independent per-pair auxiliary-graph shortest path (Floyd-Warshall)."""
    cap, rate = inst.battery_capacity, inst.consumption_rate
    pts = [inst.point(n) for n in range(inst.n_nodes)]
    stations = list(inst.station_nodes())

    def e(a, b):
        return rate * math.dist(pts[a], pts[b])

    def fmin(n):
        return min(e(n, s) for s in stations)

    if e(i, j) <= cap - fmin(i) - fmin(j):
        return math.dist(pts[i], pts[j])
    nodes = [i, j, *stations]
    idx = {n: k for k, n in enumerate(nodes)}
    size = len(nodes)
    dist = [[INF] * size for _ in range(size)]
    for k in range(size):
        dist[k][k] = 0.0
    for s in stations:
        if e(i, s) <= cap - fmin(i):
            dist[idx[i]][idx[s]] = math.dist(pts[i], pts[s])
        if e(s, j) <= cap - fmin(j):
            dist[idx[s]][idx[j]] = math.dist(pts[s], pts[j])
        for s2 in stations:
            if s != s2 and e(s, s2) <= cap:
                dist[idx[s]][idx[s2]] = math.dist(pts[s], pts[s2])
    for k in range(size):
        for a in range(size):
            for b in range(size):
                through = dist[a][k] + dist[k][b]
                if through < dist[a][b]:
                    dist[a][b] = through
    return dist[idx[i]][idx[j]]


@pytest.mark.parametrize("seed", range(6))
def test_floyd_warshall_oracle_equivalence(seed):
    rng = random.Random(seed)
    inst = generate_random(seed, rng.randint(4, 20), 2, rng.randint(2, 6))
    mc = build_modified_costs(inst)
    for i in range(inst.n_nodes):
        for j in range(inst.n_nodes):
            if i == j:
                continue
            want = _oracle_pair_cost(i, j, inst)
            got = float(mc.cprime[i, j])
            if math.isinf(want):
                assert math.isinf(got)
            else:
                assert got == pytest.approx(want, abs=1e-9)


def test_cprime_exactly_symmetric():
    inst = generate_random(5, 15, 2, 5)
    mc = build_modified_costs(inst)
    assert np.array_equal(mc.cprime, mc.cprime.T)


def test_station_removal_monotone():
    rng = random.Random(1)
    for seed in range(5):
        inst = generate_random(seed, 8, 2, 5)
        mc_full = build_modified_costs(inst)
        keep = sorted(rng.sample(range(5), rng.randint(1, 4)))
        sub = Instance(
            inst.name,
            inst.depot,
            inst.targets,
            tuple(inst.stations[k] for k in keep),
            inst.fleet_size,
            inst.battery_capacity,
            inst.consumption_rate,
        )
        mc_sub = build_modified_costs(sub)
        n = 1 + inst.n_targets
        for i in range(n):
            for j in range(n):
                assert mc_sub.cprime[i, j] >= mc_full.cprime[i, j] - 1e-9


def test_via_chains_are_traversable():
    inst = generate_random(9, 12, 2, 3)
    mc = build_modified_costs(inst)
    for (i, j), chain in mc.via.items():
        assert all(s in set(inst.station_nodes()) for s in chain)
        walk = [i, *chain, j]
        total = sum(math.dist(inst.point(a), inst.point(b)) for a, b in zip(walk, walk[1:]))
        assert total == pytest.approx(float(mc.cprime[i, j]), abs=1e-9)


def test_costs_from_point_matches_node_row():
    inst = generate_random(3, 10, 2, 5)
    mc = build_modified_costs(inst)
    row = costs_from_point(inst.depot, inst, mc)
    for j in range(1, inst.n_nodes):
        assert row[j] == pytest.approx(float(mc.cprime[0, j]), abs=1e-9)
