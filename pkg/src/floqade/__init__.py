"""floqade: Floquet two-level models with eigenvalue-crossing ladders.

Spectral/crossing analysis, adiabatic-error bounds, unitary propagation,
and sweep harness with CSV/SVG reporting.
"""

from .model import (
    MINUS,
    MODIFIED,
    PLUS,
    RWA,
    Chirp,
    EigenPair,
    FloquetOperator,
    ModelSpec,
    assemble_K,
    bessel_j,
    coupling,
    eigenvalue,
    exact_eigenvector,
    mixing_angle,
)
from .spectral import (
    CrossingLedger,
    CrossingRecord,
    build_ledger,
    find_crossings,
    gap,
    partition_u,
    projector_and_L,
    reduced_commutator_RL,
    u_asymptotic,
)
from .bounds import (
    BoundReport,
    ExponentReport,
    exponent_p,
    k_of_eps,
    comparator_jump_bound,
    optimal_offset,
    startup_bound,
    tau,
    accumulation_bound,
    window_condition,
)
from .evolve import (
    EvolutionResult,
    PropagationConfig,
    adiabatic_error,
    operator_deviation,
    propagate_adiabatic,
    propagate_exact,
    w_jump_across_crossing,
)
from .harness import (
    EpsGrid,
    SweepConfig,
    SweepResult,
    export_csv,
    fit_power_law,
    render_svg,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "MINUS", "MODIFIED", "PLUS", "RWA",
    "Chirp", "EigenPair", "FloquetOperator", "ModelSpec",
    "assemble_K", "bessel_j", "coupling", "eigenvalue",
    "exact_eigenvector", "mixing_angle",
    "CrossingLedger", "CrossingRecord", "build_ledger", "find_crossings",
    "gap", "partition_u", "projector_and_L", "reduced_commutator_RL",
    "u_asymptotic",
    "BoundReport", "ExponentReport", "exponent_p", "k_of_eps",
    "comparator_jump_bound", "optimal_offset", "startup_bound", "tau",
    "accumulation_bound", "window_condition",
    "EvolutionResult", "PropagationConfig", "adiabatic_error",
    "operator_deviation", "propagate_adiabatic", "propagate_exact",
    "w_jump_across_crossing",
    "EpsGrid", "SweepConfig", "SweepResult", "export_csv", "fit_power_law",
    "render_svg", "run_sweep",
]
