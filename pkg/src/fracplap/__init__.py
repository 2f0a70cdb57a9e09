"""Asymptotic expansions, monotone lattice discretisations and an explicit
parabolic solver for the fractional p-Laplacian, with a convergence-study
harness checked against a principal value quadrature oracle."""

from .errors import (CflViolation, ConfigurationError, ContractError, DomainCoverageError,
                     FracPLapError, InsufficientDataError, NumericalFailure,
                     ParameterDomainError, QuadratureError)
from .kernel import (OperatorParams, RateRegime, RegimeTag, a_pd, a_spd, dy_operator,
                     gamma_exponent, jp, kappa_pd, plap_closed_form, s_nu)
from .quad import QuadResult, QuadSpec, integrate_ball, integrate_sphere, integrate_tail
from .fields import Holder, ScalarField, builtin_field
from .expansion import (ExpansionKind, ExpansionResult, bs_expansion, identity_check_J1,
                        identity_check_J2, mvp_fractional, mvp_local_surface,
                        mvp_local_volume, reference_fraclap, reference_plap)
from .lattice import (Extension, ExtensionKind, GridSpec, WeightKind, WeightTable,
                      build_weights, load_weights, save_weights, summability_report)
from .discrete_op import FieldSample, apply_discrete, apply_discrete_many, consistency_error
from .evolve import (CflMode, CflModeKind, EvolutionProblem, SchemeConfig, cfl_tau,
                     interpolate, paired_run, run, time_modulus_check)
from .study import (EocReport, consistency_sweep, eoc, fig1_table, fig2_study, mu_select,
                    refinement_cauchy)

__version__ = "0.1.0"
