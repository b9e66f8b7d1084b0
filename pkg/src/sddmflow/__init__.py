"""Distributed SDDM solvers and approximate Newton methods for network flow."""

from .chain import (InverseChain, build_exact_chain, chain_length,
                    loewner_approx_factor, parallel_e_solve, parallel_r_solve,
                    verify_chain)
from .distsolve import (NodeInput, PowerRow, comp0, comp1, e_dist_r_solve,
                        node_inputs_from_system, r_dist_r_solve,
                        solve_grounded_system)
from .graphs import (DirectedNetwork, SpectralSummary, SplitMatrix,
                     WeightedGraph, generate_random_network, ground, is_sddm,
                     laplacian, r_hop_neighborhood, spectral_summary)
from .harness import CostReport, Transcript, assert_locality, message_stats
from .netflow import (CostFunction, FlowProblem, dual_gradient, dual_hessian,
                      dual_value, feasibility, lipschitz_constant_B,
                      primal_from_dual, primal_objective)
from .optimize import (ConvergenceConstants, OptimizerConfig, RunTrace,
                       convergence_constants, exact_newton_direction,
                       gradient_step, neumann_newton_direction,
                       phase_classifier, run_optimizer, sddm_newton_direction)

__version__ = "0.1.0"
