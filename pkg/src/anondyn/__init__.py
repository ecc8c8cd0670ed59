"""Simulation of anonymous dynamic networks with a leader, history trees,
and linear-time generalized counting."""

from .counting import (
    StabilizingCounting,
    TerminatingCounting,
    compute_guess,
    find_counting_cut,
    find_exposed_pairs,
    is_guesser,
    isle_of,
    stabilizing_count,
    terminating_count,
    terminating_run,
)
from .generators import (
    gen_cycle_to_path,
    gen_lower_bound_gn,
    gen_random_connected,
    gen_static_complete,
    search_naive_failure,
)
from .history import (
    GroundTruth,
    HNode,
    View,
    build_ground_truth,
    canonical_form,
    extend_and_merge,
    view_of,
    views_isomorphic,
)
from .model import (
    DynamicNetworkTrace,
    Inventory,
    MultigraphSnapshot,
    ProcessInput,
    Unknown,
    inventory,
    multi_aggregate,
    run_execution,
    validate_connectivity,
)
from .oracle import brute_force_partition, verify_counting_run, verify_ground_truth

__version__ = "0.1.0"
