"""Numerical laboratory for dual Diophantine approximation on hypersurfaces.

Resonant-slab ball covers with f-dimensional cost accounting, lattice
convergence-series classification, Hausdorff/box dimension estimation, and
singular-Hessian fibering analysis.
"""

from .errors import (ArgumentError, BudgetError, ConfigError,
                     ConstructionError, DomainError, GradientDegeneracyError,
                     NoKernelError, SlabcoverError, UndefinedSlopeError,
                     UnsupportedRegimeError)
from .hessian import (FatCantorBody, Fiber, KernelResult, SingularReport,
                      condition_II_check, kernel_field, make_builtin,
                      singular_fraction, trace_fiber)
from .measure import (BoxCountReport, CantelliCertificate, box_dimension,
                      cantelli_certificate, f_cost, limsup_membership,
                      membership_hits, pushforward_cover)
from .model import (ApproxFunction, Box, CompactWindow, DimensionFunction,
                    Hypersurface, Polynomial, Shift, check_condition_I,
                    eval_F, eval_f, eval_psi, eval_surface, quasi_norm)
from .resonant import (BallCover, CoverReport, HField, Regime, build_h,
                       classify_regime, count_admissible_p, cover_slab,
                       cover_sublevel)
from .series import (SeriesReport, ambient_term, dim_bound, lower_order,
                     series_scan, shell_count, shell_points, surface_term)

__version__ = "0.1.0"
