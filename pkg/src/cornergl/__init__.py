"""Surface superconductivity near almost-flat corners.

Effective models for the corner energy in the surface superconductivity
regime 1 < b < 1/Theta0: the finite-interval 1D boundary-layer problem,
the cost-function positivity checks, the wedge geometry Gamma_beta(L, ell),
the 2D Ginzburg-Landau minimization with fixed magnetic potential, and the
desk-scale test of the linear law  E_corner = -(pi - beta) E_corr.
"""

from .effective1d import (
    THETA0,
    Effective1DSolution,
    Grid1D,
    Profile1D,
    compute_ecorr,
    energy_1d,
    halfline_solution,
    minimize_1d,
    neumann_residuals,
    phase_integral,
    solve_profile,
)
from .costfn import (
    BoundReport,
    CostFunctionData,
    PositivityReport,
    build_cost_function,
    verify_F0_bound,
    verify_positivity,
)
from .geometry import (
    Mesh,
    PatchCoords,
    PolarCoords,
    WedgeGeometry,
    build_wedge,
    generate_mesh,
    map_coordinates,
    save_mesh_off,
    save_mesh_txt,
)
from .glsolver import (
    ComplexField,
    CornerEnergyResult,
    GLOptions,
    GLSystem,
    boundary_data,
    dirichlet_mask_values,
    gl_energy,
    gl_gradient,
    magnetic_potential,
    minimize_gl,
    psistar_extension,
    psistar_values,
    save_field,
    trial_state_values,
)
from .analysis import (
    DecayFit,
    SplittingReport,
    SweepReport,
    SweepRow,
    TrialState,
    agmon_fit,
    conjecture_sweep,
    run_corner_case,
    splitting_diagnostic,
    trial_energy,
    trial_energy_extrapolated,
    trial_state,
)
from . import errors, reporting

__version__ = "0.1.0"
