"""Problem data model: instances, geometry, file IO, and solution records.

Node indexing is fixed across the whole package: node 0 is the depot,
nodes 1..len(targets) are targets (in listing order), and nodes
len(targets)+1 .. len(targets)+len(stations) are charging stations.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Iterable

if TYPE_CHECKING:
    from .charging import RechargingPlan

Point = tuple[float, float]

GRID_SIZE = 100.0
DEFAULT_DEPOT: Point = (50.0, 50.0)
DEFAULT_CAPACITY = 100.0
DEFAULT_RATE = 0.8

# Station layout for generated instances: one per quadrant plus a southern
# fill-in. Generated instances always place chargers at a prefix of this list;
# counts beyond it fall back to seeded-random locations.
FIXED_STATIONS: tuple[Point, ...] = (
    (25.0, 25.0),
    (25.0, 75.0),
    (75.0, 25.0),
    (75.0, 75.0),
    (50.0, 10.0),
)


class InstanceError(ValueError):
    """Invalid instance data or malformed instance file."""


class SolverError(RuntimeError):
    """No feasible solution could be constructed."""


def distance(a: Point, b: Point) -> float:
    """Euclidean distance between two points."""
    return math.dist(a, b)


@dataclass(frozen=True)
class Instance:
    """Immutable problem data; safe to share across concurrent runs."""

    name: str
    depot: Point
    targets: tuple[Point, ...]
    stations: tuple[Point, ...]
    fleet_size: int
    battery_capacity: float
    consumption_rate: float

    def __post_init__(self) -> None:
        if self.fleet_size < 1:
            raise InstanceError("fleet_size must be at least 1")
        if self.battery_capacity <= 0:
            raise InstanceError("battery_capacity must be positive")
        if self.consumption_rate <= 0:
            raise InstanceError("consumption_rate must be positive")
        if not self.targets:
            raise InstanceError("instance needs at least one target")
        points = [self.depot, *self.targets, *self.stations]
        if len(set(points)) != len(points):
            raise InstanceError("duplicate node coordinates are not allowed")

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    @property
    def n_nodes(self) -> int:
        return 1 + len(self.targets) + len(self.stations)

    def point(self, node: int) -> Point:
        """Coordinates of a node index (depot, target, or station)."""
        if node == 0:
            return self.depot
        if 1 <= node <= self.n_targets:
            return self.targets[node - 1]
        if node <= self.n_targets + self.n_stations:
            return self.stations[node - self.n_targets - 1]
        raise IndexError(f"node index {node} out of range")

    def target_nodes(self) -> range:
        return range(1, self.n_targets + 1)

    def station_nodes(self) -> range:
        first = self.n_targets + 1
        return range(first, first + self.n_stations)

    def energy(self, a: Point, b: Point) -> float:
        return self.consumption_rate * math.dist(a, b)


def energy(a: Point, b: Point, inst: Instance) -> float:
    """Charge needed to travel between two points at the instance's rate."""
    return inst.consumption_rate * math.dist(a, b)


@dataclass(frozen=True)
class Solution:
    """One target-index sequence per EV plus the expanded recharging plans.

    ``objective`` is the longest plan length (the quantity being minimized);
    ``total_distance`` is the sum of plan lengths.
    """

    routes: tuple[tuple[int, ...], ...]
    plans: tuple["RechargingPlan", ...]
    objective: float
    total_distance: float

    @property
    def recharges(self) -> int:
        return sum(p.recharges for p in self.plans)


# ---------------------------------------------------------------------------
# Instance generation


def generate_random(seed: int, n_targets: int, fleet_size: int, n_stations: int) -> Instance:
    """Random instance on the unit benchmark grid.

    Depot at (50, 50); targets uniform on [0, 100]^2; capacity 100; rate 0.8.
    The first five stations come from the fixed layout; any further stations
    are drawn from the same seeded stream. Same seed, same instance.
    """
    if n_targets < 1:
        raise InstanceError("n_targets must be at least 1")
    rng = random.Random(seed)
    taken = {DEFAULT_DEPOT}
    taken.update(FIXED_STATIONS[:n_stations])
    targets: list[Point] = []
    while len(targets) < n_targets:
        p = (rng.uniform(0.0, GRID_SIZE), rng.uniform(0.0, GRID_SIZE))
        if p not in taken:
            taken.add(p)
            targets.append(p)
    stations = list(FIXED_STATIONS[:n_stations])
    while len(stations) < n_stations:
        p = (rng.uniform(0.0, GRID_SIZE), rng.uniform(0.0, GRID_SIZE))
        if p not in taken:
            taken.add(p)
            stations.append(p)
    return Instance(
        name=f"random-t{n_targets}-m{fleet_size}-s{n_stations}-seed{seed}",
        depot=DEFAULT_DEPOT,
        targets=tuple(targets),
        stations=tuple(stations),
        fleet_size=fleet_size,
        battery_capacity=DEFAULT_CAPACITY,
        consumption_rate=DEFAULT_RATE,
    )


def random_stations(rng: random.Random, count: int, avoid: Iterable[Point] = ()) -> tuple[Point, ...]:
    """Seeded-random station locations on the benchmark grid."""
    taken = set(avoid)
    out: list[Point] = []
    while len(out) < count:
        p = (rng.uniform(0.0, GRID_SIZE), rng.uniform(0.0, GRID_SIZE))
        if p not in taken:
            taken.add(p)
            out.append(p)
    return tuple(out)


def with_stations(inst: Instance, stations: tuple[Point, ...], name: str | None = None) -> Instance:
    return replace(inst, stations=stations, name=name or inst.name)


# ---------------------------------------------------------------------------
# Instance file format (line oriented, TSPLIB flavored)

_HEADER_KEYS = (
    "NAME",
    "TYPE",
    "DIMENSION",
    "STATIONS",
    "CAPACITY",
    "CONSUMPTION_RATE",
    "FLEET_SIZE",
)


def _parse_error(lineno: int, message: str) -> InstanceError:
    return InstanceError(f"line {lineno}: {message}")


def parse_instance(text: str) -> Instance:
    """Parse an instance file; raises InstanceError naming the bad line."""
    lines = text.splitlines()
    header: dict[str, str] = {}
    idx = 0

    def next_content() -> tuple[int, str]:
        nonlocal idx
        while idx < len(lines):
            stripped = lines[idx].strip()
            idx += 1
            if stripped:
                return idx, stripped
        raise _parse_error(len(lines), "unexpected end of file")

    seen_keys = 0
    while seen_keys < len(_HEADER_KEYS):
        lineno, line = next_content()
        if ":" not in line:
            raise _parse_error(lineno, f"expected 'KEY : value' header, got {line!r}")
        key, value = (part.strip() for part in line.split(":", 1))
        if key not in _HEADER_KEYS:
            raise _parse_error(lineno, f"unknown header key {key!r}")
        if key in header:
            raise _parse_error(lineno, f"duplicate header key {key!r}")
        header[key] = value
        seen_keys += 1

    if header["TYPE"] != "MEVRP":
        raise InstanceError(f"unsupported TYPE {header['TYPE']!r} (expected MEVRP)")
    try:
        dimension = int(header["DIMENSION"])
        n_stations = int(header["STATIONS"])
        capacity = float(header["CAPACITY"])
        rate = float(header["CONSUMPTION_RATE"])
        fleet = int(header["FLEET_SIZE"])
    except ValueError as exc:
        raise InstanceError(f"malformed header value: {exc}") from exc

    def read_section(tag: str, count: int, first_index: int) -> list[Point]:
        lineno, line = next_content()
        if line != tag:
            raise _parse_error(lineno, f"expected {tag}, got {line!r}")
        pts: list[Point] = []
        for offset in range(count):
            lineno, line = next_content()
            parts = line.split()
            if len(parts) != 3:
                raise _parse_error(lineno, f"expected 'index x y', got {line!r}")
            try:
                index = int(parts[0])
                x, y = float(parts[1]), float(parts[2])
            except ValueError:
                raise _parse_error(lineno, f"non-numeric coordinate line {line!r}") from None
            if index != first_index + offset:
                raise _parse_error(lineno, f"expected index {first_index + offset}, got {index}")
            pts.append((x, y))
        return pts

    coords = read_section("NODE_COORD_SECTION", dimension, 1)
    stations = read_section("STATION_COORD_SECTION", n_stations, 1)
    lineno, line = next_content()
    if line != "EOF":
        raise _parse_error(lineno, f"expected EOF, got {line!r}")

    try:
        return Instance(
            name=header["NAME"],
            depot=coords[0],
            targets=tuple(coords[1:]),
            stations=tuple(stations),
            fleet_size=fleet,
            battery_capacity=capacity,
            consumption_rate=rate,
        )
    except InstanceError as exc:
        raise InstanceError(f"invalid instance data: {exc}") from exc


def write_instance(inst: Instance) -> str:
    """Serialize an instance; parse_instance(write_instance(x)) == x."""
    out = [
        f"NAME : {inst.name}",
        "TYPE : MEVRP",
        f"DIMENSION : {1 + inst.n_targets}",
        f"STATIONS : {inst.n_stations}",
        f"CAPACITY : {inst.battery_capacity!r}",
        f"CONSUMPTION_RATE : {inst.consumption_rate!r}",
        f"FLEET_SIZE : {inst.fleet_size}",
        "NODE_COORD_SECTION",
    ]
    for i, (x, y) in enumerate([inst.depot, *inst.targets], start=1):
        out.append(f"{i} {x!r} {y!r}")
    out.append("STATION_COORD_SECTION")
    for i, (x, y) in enumerate(inst.stations, start=1):
        out.append(f"{i} {x!r} {y!r}")
    out.append("EOF")
    return "\n".join(out) + "\n"


def load_instance(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_instance(fh.read())


# ---------------------------------------------------------------------------
# Solution files


def node_label(node: int, inst: Instance) -> str:
    """D/T/S-prefixed label: D0, T<node index>, S<station ordinal>."""
    if node == 0:
        return "D0"
    if node <= inst.n_targets:
        return f"T{node}"
    return f"S{node - inst.n_targets}"


def parse_node_label(label: str, inst: Instance) -> int:
    kind, digits = label[0], label[1:]
    try:
        value = int(digits)
    except ValueError:
        raise InstanceError(f"bad node label {label!r}") from None
    if kind == "D" and value == 0:
        return 0
    if kind == "T" and 1 <= value <= inst.n_targets:
        return value
    if kind == "S" and 1 <= value <= inst.n_stations:
        return inst.n_targets + value
    raise InstanceError(f"bad node label {label!r}")


def write_solution(sol: Solution, inst: Instance) -> str:
    """Structured text record: one ROUTE line per EV plus a footer."""
    out = [f"SOLUTION {inst.name}", f"FLEET_SIZE {inst.fleet_size}"]
    for rid, plan in enumerate(sol.plans, start=1):
        labels = " ".join(node_label(n, inst) for n in plan.nodes)
        out.append(
            f"ROUTE {rid} distance {plan.length!r} recharges {plan.recharges} nodes {labels}"
        )
    out.append(f"OBJECTIVE {sol.objective!r}")
    out.append(f"TOTAL_DISTANCE {sol.total_distance!r}")
    return "\n".join(out) + "\n"


def read_solution(text: str, inst: Instance) -> dict:
    """Parse a solution file back into route node sequences and figures."""
    routes: list[dict] = []
    objective = total = None
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "ROUTE":
            nodes_at = parts.index("nodes")
            routes.append(
                {
                    "id": int(parts[1]),
                    "distance": float(parts[parts.index("distance") + 1]),
                    "recharges": int(parts[parts.index("recharges") + 1]),
                    "nodes": [parse_node_label(tok, inst) for tok in parts[nodes_at + 1 :]],
                }
            )
        elif parts[0] == "OBJECTIVE":
            objective = float(parts[1])
        elif parts[0] == "TOTAL_DISTANCE":
            total = float(parts[1])
    if objective is None or total is None:
        raise InstanceError("solution file missing OBJECTIVE or TOTAL_DISTANCE footer")
    return {"routes": routes, "objective": objective, "total_distance": total}
