"""Cross-diffusion competition systems: stability analysis and 1D simulation."""

from .analysis import (
    GrowthFit,
    LinearWindowError,
    PatternReport,
    SteadyReport,
    cosine_modes,
    dominant_mode,
    fit_growth,
    pattern_report,
    steady_check,
)
from .convergence import SweepResult, epsilon_sweep, l2_norm, matched_initial
from .diffusivity import (
    DdsParams,
    Partition,
    PartitionConvergenceError,
    TransitionRates,
    affine,
    custom,
    d_dds,
    d_minus,
    d_plus,
    dds_partials,
    dds_partition,
    grad_d_dds,
    grad_d_minus,
    grad_d_plus,
    phi,
    phi_prime,
    power_law,
    skt_linear,
)
from .kinetics import (
    Equilibrium,
    ReactionParams,
    RegimeClass,
    RegimeError,
    classify_equilibrium,
    classify_regime,
    coexistence,
    equilibria,
    jacobian,
    reaction,
    rst,
)
from .pde import (
    Controls,
    Grid1D,
    ModelSpec,
    SimState,
    SimulationError,
    Trajectory,
    exchange_step,
    fast_variant,
    initial_state,
    limit_variant,
    neumann_laplacian,
    rhs,
    simulate,
)
from .turing import (
    DdsConditionReport,
    DispersionCoeffs,
    HidingReport,
    SignStructure,
    ThresholdReport,
    UnstableBand,
    avoidance_delta_star,
    dds_necessary_condition,
    dispersion_coeffs,
    growth_rate,
    hiding_stability_check,
    mode_determinant,
    neumann_eigenvalues,
    sign_classify,
    turing_threshold_plus,
    unstable_band,
)

__version__ = "0.1.0"
