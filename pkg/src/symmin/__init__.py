"""Constrained quasi-linear minimization with rearrangement-based symmetry audits.

The library discretizes the constrained minimization of E(u) = int j(u,|Du|)
- int F(|x|,u) over {int G(u) = 1, u >= 0} on uniform cell-centered grids,
implements Schwarz symmetrization and two-point polarization as exact value
permutations, and checks numerically that computed minimizers are radially
decreasing after translation.
"""

from .grid import (CellField, GridDomain, GridError, GridFunction,
                   export_csv, forward_differences, grad_lp_norm,
                   gradient_magnitude, integrate, load_grid_function, lp_norm,
                   make_domain, save_grid_function, w1p_norm)
from .rearrange import (GridExactPolarizer, Polarizer, PolarizerSequence,
                        RearrangeError, distribution_function,
                        iterate_polarizations, polarize, polarize_general,
                        sample_polarizers, schwarz_symmetrize)
from .model import (AuditReport, ConditionCheck, ConstraintG, IntegrandJ,
                    ModelError, NonlinearityF, VariationalModel,
                    feasible_start, preset, register_preset, sigma_window,
                    sobolev_exponent, validate_growth)
from .energy import (ELReport, EnergyBreakdown, EnergyError, TestFunction,
                     constraint_gradient, critical_set_measure, cutoff,
                     el_residual, energy, energy_gradient, estimate_lambda,
                     make_test_bank)
from .optimize import (MinimizeOptions, MinimizeResult, OptimizeError,
                       clip_nonneg, minimize, project_constraint)
from .harness import (HarnessError, PolarizationAudit, RefinementProtocol,
                      SymmetryReport, align, polarization_audit,
                      refinement_study, symmetry_report, verify_theorem)

__version__ = "0.1.0"
