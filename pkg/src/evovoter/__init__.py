"""Evolving voter model on thick random graphs: fast event-level simulation
plus exact drift enumeration, pair-approximation and two-plane
master-equation analysis of the quasi-stationary regime."""

from ._backend import USING_JIT, backend_name
from .graph import OpinionGraph, TripleCounts
from .dynamics import (ModelParams, CounterConfig, RunResult, StepEvent, Stepper,
                       run, run_counter_construction, run_replicas, step,
                       spawn_rng, build_graph, p_threshold, stubborn_refresh_prob,
                       d_max_check)
from .stats import (Trajectory, ArchFit, CubicFit, NuCEstimate, arch_points,
                    fit_arch, fit_arch_xy, fit_cubic, fit_cubic_xy,
                    arch_endpoints_to_nu_c, classify_run)
from .oracle import (DriftReport, enumerate_drift, drift_formula,
                     drift_formula_approx, verify_identity_sum, make_fixtures,
                     verify_fixtures)
from .pair_approx import (PaEquilibrium, PaTrajectory, pa_nu_c, pa_equilibrium,
                          pa_identity_residuals, pa_integrate,
                          neighbor_count_correlation)
from .moments import (MomentState, CoefficientGrid, derive_from_Ub,
                      check_relations, recr_residual, order3_residuals,
                      empirical_moments, moments_from_sums, predicted_row,
                      table_rows, table_csv, neighbor_second_moment_inequality,
                      REFERENCE_SIM_MOMENTS, TABLE_NU)
from .ame import (AmeParams, PlaneSystem, CensoredJumpError, plane_system,
                  fixed_point, jump_time_sample, jump_time_sample_detail,
                  forward_simulate, forward_cycles, backward_iterate,
                  backward_point, stationary_estimate, finite_L_two_plane,
                  histogram_csv, path_csv)

__version__ = "0.1.0"
