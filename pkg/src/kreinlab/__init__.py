"""Dirichlet spectra of measure-geometric Laplacians on intervals and rectangles."""

from .fem import (Mesh, MeshError, assemble_measure_mass, assemble_stiffness, build_mesh, evaluate,
                  interpolate)
from .green import (DiskKernel, GreenError, GreenRouteUnsupported, GreenSingularityError, IntervalKernel,
                    RectangleKernel, boundary_decay_check, check_green_condition, continuity_modulus_check,
                    discretize, green_apply, green_eval, kernel_for, nystrom_solve)
from .measure import (AreaComponent, AtomComponent, Box, IFSComponent, Measure, MeasureError,
                      SegmentComponent, estimate_dim_inf, integrate, total_mass)
from .nodal import NodalReport, count_nodal_domains, nodal_reports, verify_courant
from .spectral import (ConvergenceError, KernelVectorError, Spectrum, constrained_min_check,
                       rayleigh_quotient, solve)
from .validate import (ClosedFormExample, TestBump, ex6_3, ex6_4, ex6_5, maximum_principle_check, mollify,
                       sphere_average, weak_residual)

__version__ = "0.1.0"
