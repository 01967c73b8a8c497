"""Numerical exp-map charts, C^k topology, and descent on mapping spaces."""

from .atlas import (
    CIRCLE_ATLAS,
    TORUS2_ATLAS,
    Chart,
    DomainAtlas,
    JetTable,
    MapFormula,
    SampledMap,
    chart_jet,
    circle_atlas,
    evaluate_map,
    map_sup_distance,
    overlap_residual,
    sample_map,
    torus2_atlas,
)
from .charts import (
    DomainMap,
    OmegaKernel,
    TargetMap,
    TaylorData,
    chart_forward,
    chart_inverse,
    default_delta,
    metric_transition,
    metric_transition_derivative,
    omega_apply,
    omega_derivative,
    pullback,
    pushforward,
    taylor_identity_residual,
    taylor_remainder,
    thickening_admissible,
    transition,
    transition_derivative,
)
from .energy import (
    DescentTrace,
    EnergyFunctional,
    descend,
    dirichlet_energy,
    energy_gradient,
    fixed_chart_step,
    geodesic_residual,
    loop_values,
    winding_numbers,
)
from .errors import (
    BaseMismatch,
    BeyondInjectivityRadius,
    ConfigError,
    FiberBoxViolated,
    FormulaOutOfTarget,
    HypothesisViolated,
    MapcalcError,
    ResolutionMismatch,
    StepOutOfChart,
    TargetChartViolated,
    ThickeningViolated,
    WellDefinednessViolated,
)
from .gridfn import GridFunction, grid_jet_sup_diff, grid_norm
from .manifolds import (
    ConformalFactor,
    FiberLinearMap,
    Point,
    TangentVector,
    TargetManifold,
    as_point,
    dist,
    exp,
    fiber_transition_derivative,
    flat_torus,
    inj_radius,
    log,
    metric_inner,
    sphere,
    tangent,
)
from .sections import (
    PullbackSection,
    make_section,
    section_add,
    section_from_formula,
    section_max_diff,
    section_scale,
    section_sup,
    zero_section,
)
from .target_charts import SphereCapChart, TorusBranchChart, auto_chart
from .topology import (
    CkCover,
    CkNeighborhood,
    SectionNormReport,
    canonical_cover,
    ck_distance,
    composition_bound_probe,
    nbhd_contains,
    neighborhood,
    section_norm,
    witness_ladder,
)
