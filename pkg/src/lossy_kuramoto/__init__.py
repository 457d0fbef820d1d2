"""Simulator and stability analyzer for phase-oscillator networks with lossy couplings."""

from .dynamics import (PhaseState, Trajectory, active_power, advance,
                       detect_synchronization, draw_initial_phases, integrate,
                       rhs, rhs_sine_form, wrap_to_pi)
from .equilibrium import EquilibriumResult, UniquenessResult, check_uniqueness, solve
from .errors import (ConfigError, InconclusiveError, IntegrationDivergedError,
                     InternalConsistencyError, LossyKuramotoError,
                     NearBifurcationError, NoConvergenceError, StructuralError,
                     ValidationError)
from .manifold import (ManifoldProbe, distance_to_manifold, manifold_offset,
                       probe_convergence, write_probe_csv)
from .network import (DEFAULT_RANGES, DerivedModel, NetworkSpec,
                      ParameterRanges, derive, generate_random, load_network,
                      psi_max, save_network)
from .stability import (ComparisonOutcome, JacobianReport, LaplacianFlags,
                        SpectralSummary, StabilityVerdict,
                        algebraic_connectivity, check_laplacian_structure,
                        compare_connectivity, connectivity_comparison,
                        coupling_jacobian, coupling_strength_laplacian,
                        edge_margin_met, finite_difference_check, jacobian,
                        spectral_analysis, synchronization_condition)

__version__ = "0.1.0"

__all__ = [
    "PhaseState", "Trajectory", "active_power", "advance",
    "detect_synchronization", "draw_initial_phases", "integrate", "rhs",
    "rhs_sine_form", "wrap_to_pi",
    "EquilibriumResult", "UniquenessResult", "check_uniqueness", "solve",
    "ConfigError", "InconclusiveError", "IntegrationDivergedError",
    "InternalConsistencyError", "LossyKuramotoError", "NearBifurcationError",
    "NoConvergenceError", "StructuralError", "ValidationError",
    "ManifoldProbe", "distance_to_manifold", "manifold_offset",
    "probe_convergence", "write_probe_csv",
    "DEFAULT_RANGES", "DerivedModel", "NetworkSpec", "ParameterRanges",
    "derive", "generate_random", "load_network", "psi_max", "save_network",
    "ComparisonOutcome", "JacobianReport", "LaplacianFlags", "SpectralSummary",
    "StabilityVerdict", "algebraic_connectivity", "check_laplacian_structure",
    "compare_connectivity", "connectivity_comparison", "coupling_jacobian",
    "coupling_strength_laplacian", "edge_margin_met", "finite_difference_check",
    "jacobian", "spectral_analysis", "synchronization_condition",
    "__version__",
]
