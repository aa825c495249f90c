"""aether3d: planning, density estimation, and latency-optimal cell association
for 3D aerial cellular networks."""

from .geometry import Box, VoxelGrid
from .lattice import (
    BasePosition,
    LatticeSpec,
    centered_reference,
    first_tier_offsets,
    generate_positions,
    nearest_cell,
    nearest_cell_map,
    neighbor_distances,
)
from .spectrum import (
    ReuseSolution,
    cochannel_groups,
    cochannel_set,
    enumerate_reuse_factors,
)
from .channel import (
    ChannelParams,
    ComputationModel,
    DroneBS,
    LatencyBreakdown,
    Network,
    QUADRATIC_COMPUTE,
    backhaul_latency,
    computation_latency,
    per_ue_rate,
    sinr,
    sinr_map,
    total_latency,
    transmission_latency,
)
from .density import (
    DensityModel,
    SampleSet,
    TruncatedGaussianSpec,
    UniformDensity,
    default_bandwidth_grid,
    fit_kde,
    integrated_squared_error,
    kde_evaluate,
    loocv_score,
    mise,
    sample_truncated_gaussian,
    select_bandwidth,
)
from .association import (
    AssociationWorkspace,
    AuditResult,
    IterationRecord,
    ObjectiveTerms,
    Partition,
    audit_optimality,
    baseline_sinr_partition,
    evaluate_objective,
    exhaustive_minimum,
    solve_association,
)
from .harness import (
    ExperimentResult,
    Scenario,
    ScenarioError,
    build_deployment,
    drift_experiment,
    load_scenario,
    run_scenario,
    sinr_cdf,
)

__version__ = "0.1.0"
