"""fpdg: positivity-preserving semi-implicit DG solver on velocity space.

A 2D discontinuous Galerkin discretization of linear convection-diffusion
kinetic models (interior-penalty diffusion, upwind-dissipation convection,
first-order implicit/explicit splitting) with a conservative two-stage
positivity postprocessor built on relaxed Douglas-Rachford splitting.
"""
from .basis import BasisSet, legendre_basis
from .coefficients import (
    CoefficientProvider,
    SpeciesParams,
    anisotropic_provider,
    diffusion_tensor_maxwellian,
    maxwellian,
    maxwellian_background_provider,
    ou_identity_provider,
    rosenbluth_G,
    rosenbluth_H,
)
from .errors import ConfigError, ConvergenceError, InfeasibleError, SolverError
from .fields import DGField
from .mesh import Mesh, build_mesh
from .operators import (
    apply_convection,
    assemble_convection,
    assemble_mass,
    assemble_nipg,
)
from .positivity import (
    LimiterProblem,
    detect_bad_cells,
    dr_parameters,
    dr_solve,
    limit_cell_averages,
    qp_oracle,
    zhang_shu_limit,
)
from .quadrature import Quadrature1D, gauss_rule
from .stepping import RunResult, StepConfig, Stepper, project_initial, run, step

__version__ = "0.1.0"
