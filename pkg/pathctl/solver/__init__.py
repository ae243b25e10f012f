from pathctl.solver.models import GameParams, HamiltonianInputs, LQParams, SolverDefaults, SolverGrid
from pathctl.solver.surfaces import GameSurfaces, Surfaces, load_surfaces, save_surfaces
from pathctl.solver.convergence import (
    ConvergenceRow,
    ConvergenceTable,
    Probe,
    make_probes,
    residual_ladder,
    select_by_residual,
)
from pathctl.solver.lq_delay import (
    CrossFactorSelection,
    classical_riccati,
    eval_derivatives,
    eval_value,
    feedback_coefficients,
    hamiltonian,
    hjb_residual,
    modified_hamiltonian,
    optimal_control,
    probe_residual,
    select_cross_factor,
    solve_f_system,
)
