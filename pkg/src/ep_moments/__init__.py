"""Moment evolution matrices of quadratic Liouvillians, moments-based
non-Hermitian Hamiltonians, dissipative lattice synthesis, exceptional-point
analysis, and a brute-force truncated-Fock Lindblad oracle."""

from .ladder import ClosureError
from .model import (Finding, ModelFormatError, QuadraticSystem,
                    ValidationReport, check_anti_pt, is_u1_symmetric,
                    parse_model, serialize_model, validate, zero_system)
from .moments import (EvolutionMatrix, MomentBasis, MomentIndex,
                      evolution_matrix, first_moment_matrix, first_order_basis,
                      kronecker_sum, matrix_from_json, matrix_to_json,
                      moment_power, propagate_moments, reduce)
from .nhh import (LatticeModel, NhhMatrix, adjacency_summary, build_m_n,
                  cubic_cancellation_residual, first_moment_of_lattice,
                  lattice_from_json, lattice_to_graphml, lattice_to_json,
                  nhh_from_matrix_u1, nhh_generic, remove_trace,
                  synthesize_lattice)
from .oracle import (DensityMatrix, FockSpace, SimConfig, Trajectory,
                     VerificationReport, build_space, coherent_state,
                     integrate, lindblad_rhs, moment_trajectory,
                     step_halving_deviation, verify_moments)
from .spectral import (EigenCluster, EPReport, SweepTable, analyze,
                       closed_form_lambda, eigen, ep_order, multiplicities,
                       sweep, sweep_from_csv, sweep_to_csv)

__version__ = "0.1.0"
