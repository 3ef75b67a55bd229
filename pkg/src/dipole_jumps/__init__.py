"""Light/dark period statistics for two dipole-dipole interacting emitters.

Two level schemes are supported: the three-level D configuration
(``Scheme.TWO_D``) and the effective four-level Ba+ model
(``Scheme.FOUR_LEVEL``).  Rates between intensity periods are obtained
perturbatively from the Bloch-equation generator, from closed forms, from
a semi-analytic quantum-jump route, and from Monte Carlo trajectories.
"""

from .model import (
    Scheme,
    SystemSpec,
    DickeBasis,
    build_basis,
    coupling_constants,
    dipole_coupling,
)
from .liouville import (
    ConditionalHamiltonian,
    JumpChannel,
    Superoperator,
    assemble_liouvillian,
    build_hcond,
    build_reset_channels,
    build_superoperator,
)
from .rates import (
    QuasiStationarySet,
    RateMatrix,
    closed_form_rates,
    double_jump_rate,
    dual_states,
    optimal_rabi,
    perturbative_rates,
    quasi_stationary_states,
    transition_rates_perturbative,
    rate_sweep,
)
from .appendix import appendix_rates, emission_probability, unit_intensity_rate
from .trajectory import (
    PeriodSequence,
    PhotonRecord,
    classify_periods,
    empirical_statistics,
    evolve_and_jump,
    periods_from_labels,
    run_trajectory,
    sojourn_statistics,
)

__all__ = [
    "Scheme",
    "SystemSpec",
    "DickeBasis",
    "build_basis",
    "coupling_constants",
    "dipole_coupling",
    "ConditionalHamiltonian",
    "JumpChannel",
    "Superoperator",
    "assemble_liouvillian",
    "build_hcond",
    "build_reset_channels",
    "build_superoperator",
    "QuasiStationarySet",
    "RateMatrix",
    "closed_form_rates",
    "double_jump_rate",
    "dual_states",
    "optimal_rabi",
    "perturbative_rates",
    "quasi_stationary_states",
    "transition_rates_perturbative",
    "rate_sweep",
    "appendix_rates",
    "emission_probability",
    "unit_intensity_rate",
    "PeriodSequence",
    "PhotonRecord",
    "classify_periods",
    "empirical_statistics",
    "evolve_and_jump",
    "periods_from_labels",
    "run_trajectory",
    "sojourn_statistics",
]

__version__ = "0.1.0"
