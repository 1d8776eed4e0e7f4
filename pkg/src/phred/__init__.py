"""phred: structure-preserving interpolatory model reduction for
port-Hamiltonian systems, with H2-driven shift selection, balancing
baselines and an analysis/benchmark harness."""

from .analysis import (
    FrequencyGrid,
    ResponseTable,
    Trajectory,
    default_grid,
    energy_balance,
    error_system,
    frequency_response,
    h2_norm,
    h2_norm_quadrature,
    hinf_sampled,
    make_signal,
    relative_h2_error,
    relative_hinf_error,
    simulate,
)
from .balancing import (
    BalancingData,
    balanced_truncation,
    balancing_transformation,
    effort_constraint_reduce,
    solve_lyapunov,
)
from .core import (
    InterpolationData,
    PortHamiltonianSystem,
    StateSpaceSystem,
    StateTransform,
    apply_state_transform,
    build_ph,
    eval_transfer,
    ph_to_state_space,
    power_balance,
    to_coenergy,
    transfer_derivative,
)
from .irka import (
    IrkaOptions,
    IrkaTrace,
    StabilityCertificate,
    default_init,
    h2_optimality_residuals,
    init_complex_grid,
    init_logspace_negative,
    init_perturbed_poles,
    init_reflected_poles,
    irka_general,
    irka_ph,
    range_condition_check,
    stability_certificate,
)
from .models import LadderParams, MsdParams, build_ladder, build_msd
from .reduction import (
    RealBasis,
    TangentialBasis,
    hermite_extend,
    interpolation_residuals,
    petrov_galerkin_reduce,
    ph_project,
    ph_structure_reduce,
    realify,
    tangential_basis,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
