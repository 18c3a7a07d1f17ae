"""Structure-exploiting interior-point solver for KYP semidefinite programs.

The Lyapunov matrix of the KYP inequality is eliminated in favour of the
anti-stabilizing solution of the associated algebraic Riccati equation, so
the barrier method only iterates over the multiplier vector.
"""
from .barrier import (InfeasibleCertificate, SolverConfig, SolveReport, evaluate_barrier,
                      feasibility_margins, gradient, hessian, line_search, newton_step,
                      phase1, solve)
from .calculus import RiccatiPair, compute_pair, derivatives
from .equations import (LyapunovSolver, RiccatiSolution, riccati_residual, solve_lyapunov,
                        solve_riccati)
from .errors import (DimensionError, IllConditioned, KypError, LineSearchFailed,
                     NearSingularY, NoFeasiblePoint, NotInDomain, OutOfDomain,
                     SingularPencil)
from .model import AffineMatrixFamily, KypProblem, validate_problem
from .synthesis import (PlantModel, SynthesisSpec, assemble_kyp_sdp,
                        build_actuator_uncertainty, check_multiplier_conditions,
                        generate_mass_spring_chain, probe_start)
from .verification import (check_frequency_domain, check_kyp_lmi, equivalence_probe,
                           fd_check, grid_search_oracle)

__version__ = "0.1.0"

__all__ = [
    "InfeasibleCertificate", "SolverConfig", "SolveReport", "evaluate_barrier",
    "feasibility_margins", "gradient", "hessian", "line_search", "newton_step", "phase1",
    "solve", "RiccatiPair", "compute_pair", "derivatives", "LyapunovSolver",
    "RiccatiSolution", "riccati_residual", "solve_lyapunov", "solve_riccati",
    "DimensionError", "IllConditioned", "KypError", "LineSearchFailed", "NearSingularY",
    "NoFeasiblePoint", "NotInDomain", "OutOfDomain", "SingularPencil",
    "AffineMatrixFamily", "KypProblem", "validate_problem", "PlantModel", "SynthesisSpec",
    "assemble_kyp_sdp", "build_actuator_uncertainty", "check_multiplier_conditions",
    "generate_mass_spring_chain", "probe_start", "check_frequency_domain", "check_kyp_lmi",
    "equivalence_probe", "fd_check", "grid_search_oracle",
]
