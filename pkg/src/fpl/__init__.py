"""Conservative spectral solver for the space-homogeneous Fokker-Planck-Landau
equation with hard potentials (0 <= lambda <= 1)."""

from .collision import (
    CollisionWorkspace,
    CutoffFunction,
    make_workspace,
    q_direct_oracle,
    q_hat,
    q_hat_reference,
    q_unconserved,
)
from .conserve import ConservationOperator, build_conservation
from .diagnostics import (
    DiagnosticsRecord,
    MaxwellianSpec,
    collect_record,
    entropy,
    equilibrium_distance,
    hs_norm,
    l2_weighted,
    maxwellian_field,
    moments,
    projection_tail_norm,
    stability_ratio,
    tail_bound_check,
    weighted_moment,
)
from .dynamics import (
    LandauSolver,
    SolverConfig,
    SolverState,
    bimaxwellian_field,
    default_dt,
    maxwellian_initial,
    perturbed_maxwellian_field,
    rhs_lipschitz_scale,
)
from .errors import (
    FplError,
    NumericalError,
    QuadratureError,
    StabilityError,
    UsageError,
)
from .lattice import (
    GridSpec,
    SpectralField,
    VelocityField,
    choose_domain,
    forward_transform,
    inverse_transform,
    project_modes,
    quadrature,
    set_fft_workers,
    spectral_derivative,
)
from .weights import (
    KernelParams,
    WeightTable,
    build_table,
    default_params,
    load_table,
    radial_profiles,
    save_table,
    suggested_quad_points,
)

__version__ = "0.1.0"
