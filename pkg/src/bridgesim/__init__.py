"""bridgesim: a bridging occupancy chain on a cylindrical triangular lattice.

Simulates the single-site Metropolis dynamics whose stationary law balances
boundary length against a scent gradient, detects bridge events, and checks
the combinatorial machinery behind the model (boundary-length bounds, layer
sequence transformations, convex scent approximation) against exact
brute-force oracles on small instances.
"""

from .chain import (
    ChainParams,
    InvariantViolation,
    PeelFailure,
    RunSchedule,
    StepOutcome,
    Trace,
    derive_rng,
    path_to_empty,
    run,
    step,
)
from .config import (
    Configuration,
    ScentFunction,
    boundary_edge_census,
    delta_hamiltonian,
    energy_terms,
    globally_simply_connected,
    locally_simply_connected,
    parse_snapshot,
    unoccupied_neighbor_count,
)
from .lattice import LatticeDims, Site, degree_in_lambda, neighbors
from .layerseq import (
    BoundaryProfile,
    LayerSequence,
    PiecewiseLinearFn,
    Thresholds,
    TransformTrace,
    boundary_increment,
    boundary_profile,
    bridge_transform,
    compress,
    compress_steps,
    convex_approx,
    layer_sequence,
    phase_thresholds,
    sequence_scent,
    witness_config,
)
from .observables import (
    BridgeReport,
    bridge_count,
    bridge_report,
    multi_bridge_event,
    multiple_bridges,
    no_bridge,
    render,
)
from .oracle import (
    StateSpace,
    boundary_census,
    degree_modified_distribution,
    enumerate_state_space,
    exact_distribution,
    total_variation,
    transition_matrix,
    verify_stationarity,
)

__version__ = "0.1.0"
