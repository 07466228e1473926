"""Min-max electric vehicle routing toolkit."""

from .charging import (
    RechargingPlan,
    RepairStatus,
    build_solution,
    optimal_recharge,
    optimize_station_placement,
    repair_route,
)
from .construction import Assignment, balanced_assignment, held_karp, order_route, perturb_depot
from .exact import Cut, IntegerSolutionView, exact_minmax, export_mip, separate_connectivity
from .ga import Chromosome, GaParams, ga_run
from .model import (
    Instance,
    InstanceError,
    Solution,
    SolverError,
    distance,
    energy,
    generate_random,
    load_instance,
    parse_instance,
    write_instance,
    write_solution,
)
from .pipeline import HhaConfig, RunStats, construct_initial, run_hha
from .reachability import ModifiedCosts, build_modified_costs, direct_reachable, nearest_station
from .vns import SolutionPool, VnsParams, vns_search

__all__ = [
    "Assignment",
    "Chromosome",
    "Cut",
    "GaParams",
    "HhaConfig",
    "Instance",
    "InstanceError",
    "IntegerSolutionView",
    "ModifiedCosts",
    "RechargingPlan",
    "RepairStatus",
    "RunStats",
    "Solution",
    "SolutionPool",
    "SolverError",
    "VnsParams",
    "balanced_assignment",
    "build_modified_costs",
    "build_solution",
    "construct_initial",
    "direct_reachable",
    "distance",
    "energy",
    "exact_minmax",
    "export_mip",
    "ga_run",
    "generate_random",
    "held_karp",
    "load_instance",
    "nearest_station",
    "optimal_recharge",
    "optimize_station_placement",
    "order_route",
    "parse_instance",
    "perturb_depot",
    "repair_route",
    "run_hha",
    "separate_connectivity",
    "vns_search",
    "write_instance",
    "write_solution",
]
