"""Spectral gaps and Hoeffding-type concentration bounds for
continuous-time Markov chains, with exact-simulation verification.

The three layers:

* exact linear algebra — generators, stationary laws, spectral gaps,
  collapsed finite approximations of countable chains, skeleton kernels;
* certified tail bounds driven by the gap;
* Monte Carlo verification that the bounds hold on simulated paths.
"""

from .bounds import (LezaudComparison, VerificationReport, VerificationRow,
                     ctmc_hoeffding_bound, density_pnorm, lezaud_bound,
                     nu_initial_bound, verify)
from .errors import (ExplosionGuardError, InvalidInputError,
                     NumericalFailureError)
from .generator import (GeneratorMatrix, ObservableFunction,
                        StationaryDistribution, ValidationReport,
                        additive_symmetrization, build_birth_death,
                        build_three_state, dual_generator, is_reversible,
                        load_model, load_observable, parse_model,
                        parse_observable, stationary_distribution,
                        validate_generator)
from .simulate import (TailEstimate, TrajectorySample,
                       clopper_pearson_upper, sample_path, substream,
                       tail_probability_mc)
from .skeleton import (DtmcGapReport, SkeletonRow, SkeletonTable,
                       StochasticMatrix, dtmc_hoeffding_bound,
                       dtmc_spectral_gap, skeleton_gap_check,
                       transition_matrix_exp)
from .spectral import (BirthDeathBoundReport, CertificateReport,
                       SpectralReport, bd_closed_form_gap, bd_lower_bound,
                       dirichlet_form, drift_certificate_check,
                       rayleigh_quotient, spectral_gap, symmetrized_form)
from .truncation import (CollapsedModel, CountableModel, GapSweep, collapse,
                         collapse_function, gap_convergence_sweep)

__version__ = "0.1.0"

__all__ = [
    "BirthDeathBoundReport", "CertificateReport", "CollapsedModel",
    "CountableModel", "DtmcGapReport", "ExplosionGuardError",
    "GapSweep", "GeneratorMatrix", "InvalidInputError", "LezaudComparison",
    "NumericalFailureError", "ObservableFunction", "SkeletonRow",
    "SkeletonTable", "SpectralReport", "StationaryDistribution",
    "StochasticMatrix", "TailEstimate", "TrajectorySample",
    "ValidationReport", "VerificationReport", "VerificationRow",
    "additive_symmetrization", "bd_closed_form_gap", "bd_lower_bound",
    "build_birth_death", "build_three_state", "clopper_pearson_upper",
    "collapse", "collapse_function", "ctmc_hoeffding_bound",
    "density_pnorm", "dirichlet_form", "drift_certificate_check",
    "dtmc_hoeffding_bound", "dtmc_spectral_gap", "dual_generator",
    "gap_convergence_sweep", "is_reversible", "lezaud_bound", "load_model",
    "load_observable", "nu_initial_bound", "parse_model",
    "parse_observable", "rayleigh_quotient", "sample_path",
    "skeleton_gap_check", "spectral_gap", "stationary_distribution",
    "substream", "symmetrized_form", "tail_probability_mc",
    "transition_matrix_exp", "validate_generator", "verify",
]
