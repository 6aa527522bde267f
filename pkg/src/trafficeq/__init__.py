"""Equilibrium traffic assignment on capacitated road networks.

Three solvers over one data model: conditional-gradient (Frank-Wolfe) descent
of the Beckmann potential, mirror descent on the stable-dynamics dual with
optional subgradient randomization, and block-coordinate descent on the
smoothed node-potential form of the same dual. Brute-force oracles verify all
of them at desk scale.
"""

from . import exceptions
from .block_descent import (
    SmoothConfig,
    SmoothResult,
    block_lipschitz,
    potential_objective,
    recover_flows,
    recover_times,
    smoothed_block_gradient,
    smoothed_objective,
    smoothing_weights,
    solve_stable_dynamics_bcd,
)
from .costs import (
    BprLaw,
    beckmann_potential,
    edge_time_slopes,
    edge_times,
    law_of,
    sigma,
    tau,
    tau_prime,
)
from .frank_wolfe import (
    AdaptiveBudget,
    FwConfig,
    FwResult,
    FwTrace,
    fw_gap,
    solve_beckmann,
)
from .mirror_descent import (
    MdConfig,
    MdResult,
    dual_value,
    duality_gap,
    md_step,
    od_subgradient,
    origin_subgradient,
    solve_stable_dynamics_md,
    subgrad_full,
    subgrad_sample_od,
    subgrad_sample_origin,
)
from .network import (
    DemandTable,
    Diagnostics,
    Network,
    parse_demands,
    parse_network,
    serialize_network,
    validate,
)
from .oracles import beckmann_oracle, enumerate_paths, stable_dynamics_oracle
from .shortest_paths import (
    AonResult,
    ShortestPathTree,
    aggregate_tree_flows,
    all_or_nothing,
    aon_value,
    dijkstra,
    tree_path,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
