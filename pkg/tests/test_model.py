import math
import random

import pytest
from hypothesis import given, strategies as st

from mevrp.model import (
    Instance,
    InstanceError,
    distance,
    energy,
    generate_random,
    node_label,
    parse_instance,
    parse_node_label,
    read_solution,
    write_instance,
    write_solution,
)
from mevrp.charging import build_solution

from helpers import simulate_walk


def test_distance_345():
    assert distance((50, 50), (53, 54)) == 5.0


def test_distance_identity():
    assert distance((7.25, -3.5), (7.25, -3.5)) == 0.0


def test_distance_axis():
    assert distance((0, 0), (100, 0)) == 100.0


def test_energy_examples():
    inst = generate_random(0, 5, 2, 5)
    assert inst.consumption_rate == 0.8
    assert energy((50, 50), (53, 54), inst) == pytest.approx(4.0)
    one = Instance("r1", (0.0, 0.0), ((1.0, 1.0),), ((3.0, 3.0),), 1, 10.0, 1.0)
    assert energy((0, 0), (1, 1), one) == distance((0, 0), (1, 1))
    assert energy((0, 0), (100, 0), inst) == pytest.approx(80.0)


def test_metric_properties_random_triples():
    rng = random.Random(42)
    inst = generate_random(0, 3, 1, 5)
    for _ in range(10_000):
        a = (rng.uniform(0, 100), rng.uniform(0, 100))
        b = (rng.uniform(0, 100), rng.uniform(0, 100))
        c = (rng.uniform(0, 100), rng.uniform(0, 100))
        assert distance(a, b) == distance(b, a)
        assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9
        assert energy(a, b, inst) == energy(b, a, inst)
        assert energy(a, c, inst) <= energy(a, b, inst) + energy(b, c, inst) + 1e-9


def test_generate_deterministic():
    a = generate_random(7, 10, 2, 5)
    b = generate_random(7, 10, 2, 5)
    assert a == b
    assert write_instance(a) == write_instance(b)


def test_generate_paper_constants():
    for seed in range(5):
        inst = generate_random(seed, 10, 2, 5)
        assert inst.depot == (50.0, 50.0)
        assert inst.battery_capacity == 100.0
        assert inst.consumption_rate == 0.8
        assert all(0 <= x <= 100 and 0 <= y <= 100 for x, y in inst.targets)


def test_generate_supported_sizes():
    for n in range(10, 55, 5):
        inst = generate_random(1, n, 4, 5)
        assert inst.n_targets == n


def test_generate_rejects_zero_targets():
    with pytest.raises(InstanceError):
        generate_random(0, 0, 2, 5)


def test_node_indexing_contract():
    inst = generate_random(3, 8, 2, 4)
    assert inst.point(0) == inst.depot
    assert inst.point(1) == inst.targets[0]
    assert inst.point(inst.n_targets) == inst.targets[-1]
    assert inst.point(inst.n_targets + 1) == inst.stations[0]
    assert list(inst.station_nodes()) == list(range(9, 13))


def test_duplicate_points_rejected():
    with pytest.raises(InstanceError):
        Instance("dup", (0.0, 0.0), ((1.0, 1.0), (1.0, 1.0)), (), 1, 10.0, 1.0)


MINIMAL = """NAME : tiny
TYPE : MEVRP
DIMENSION : 2
STATIONS : 1
CAPACITY : 100.0
CONSUMPTION_RATE : 0.8
FLEET_SIZE : 1
NODE_COORD_SECTION
1 50.0 50.0
2 60.0 50.0
STATION_COORD_SECTION
1 25.0 25.0
EOF
"""


def test_parse_minimal():
    inst = parse_instance(MINIMAL)
    assert inst.n_targets == 1
    assert inst.n_stations == 1
    assert inst.depot == (50.0, 50.0)
    assert inst.fleet_size == 1


def test_parse_dimension_mismatch_names_line():
    bad = MINIMAL.replace("DIMENSION : 2", "DIMENSION : 3")
    with pytest.raises(InstanceError) as err:
        parse_instance(bad)
    assert "line" in str(err.value)


def test_parse_missing_section():
    bad = MINIMAL.replace("STATION_COORD_SECTION\n1 25.0 25.0\n", "")
    with pytest.raises(InstanceError):
        parse_instance(bad)


def test_parse_duplicate_coordinates_rejected():
    bad = MINIMAL.replace("2 60.0 50.0", "2 50.0 50.0")
    with pytest.raises(InstanceError):
        parse_instance(bad)


def test_parse_wrong_type_rejected():
    bad = MINIMAL.replace("TYPE : MEVRP", "TYPE : TSP")
    with pytest.raises(InstanceError):
        parse_instance(bad)


@given(st.integers(0, 10_000), st.integers(1, 30), st.integers(1, 6), st.integers(0, 7))
def test_roundtrip_parse_serialize(seed, n_targets, fleet, n_stations):
    inst = generate_random(seed, n_targets, fleet, n_stations)
    assert parse_instance(write_instance(inst)) == inst


def test_node_labels_roundtrip():
    inst = generate_random(2, 6, 2, 3)
    for node in range(inst.n_nodes):
        assert parse_node_label(node_label(node, inst), inst) == node


def test_write_solution_empty_route_and_consistency():
    inst = generate_random(3, 4, 3, 5)
    sol = build_solution([(1, 2), (3, 4), ()], inst)
    text = write_solution(sol, inst)
    parsed = read_solution(text, inst)
    assert len(parsed["routes"]) == 3
    assert parsed["routes"][2]["nodes"] == [0]
    assert parsed["objective"] == pytest.approx(
        max(r["distance"] for r in parsed["routes"])
    )


def test_solution_roundtrip_resimulates():
    inst = generate_random(11, 8, 2, 5)
    sol = build_solution([(1, 2, 3, 4), (5, 6, 7, 8)], inst)
    parsed = read_solution(write_solution(sol, inst), inst)
    for rec in parsed["routes"]:
        length, _ = simulate_walk(rec["nodes"], inst)
        assert length == pytest.approx(rec["distance"], abs=1e-9)
    assert parsed["total_distance"] == pytest.approx(
        sum(r["distance"] for r in parsed["routes"])
    )
