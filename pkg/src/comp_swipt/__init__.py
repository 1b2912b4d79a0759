"""Sparse multi-point beamforming with wireless power transfer.

The pipeline: sample a network (`network`), pose the joint backhaul/power
problem as an SDP (`sdp`), solve it with the bundled conic interior-point
method (`solver`), iterate reweighting for group sparsity (`reweighted`),
and compare against enumeration and cooperation baselines (`baselines`)
under a seeded Monte Carlo harness (`harness`).
"""

from .baselines import (AssignmentEnumeration, EnumerationCapError,
                        ExhaustiveResult, colocated_system, exhaustive_search,
                        full_cooperation)
from .beams import (BeamformerSet, check_feasibility, compute_backhaul,
                    compute_harvested, compute_sinr, evaluate_objective)
from .coneprog import (ConeProgram, ConeSolution, ProgramBuilder, SolveStatus,
                       dual_multiplier, dual_slack)
from .harness import (ExperimentConfig, MetricsRecord, emit_results,
                      load_config, run_experiment, summarize)
from .network import (ChannelSet, Topology, build_topology, sample_channels)
from .params import (SystemParams, system_params_from_dict,
                     system_params_to_dict)
from .report import SolutionReport, dump_report, load_report, make_report
from .reweighted import (InfeasibleInstanceError, IterationTrace,
                         SolverBreakdownError, lower_bounds, run,
                         update_weights)
from .sdp import (ActivationMask, WeightMatrix, build_sdp,
                  extract_beamformers, verify_rank_certificate)
from .solver import check_kkt, solve

__version__ = "0.1.0"

__all__ = [
    "ActivationMask", "AssignmentEnumeration", "BeamformerSet", "ChannelSet",
    "ConeProgram", "ConeSolution", "EnumerationCapError", "ExhaustiveResult",
    "ExperimentConfig", "InfeasibleInstanceError", "IterationTrace",
    "MetricsRecord", "ProgramBuilder", "SolutionReport", "SolveStatus",
    "SolverBreakdownError", "SystemParams", "Topology", "WeightMatrix",
    "build_sdp", "build_topology", "check_feasibility", "check_kkt",
    "colocated_system", "compute_backhaul", "compute_harvested",
    "compute_sinr", "dual_multiplier", "dual_slack", "dump_report",
    "emit_results", "evaluate_objective", "exhaustive_search",
    "extract_beamformers", "full_cooperation", "load_config", "load_report",
    "lower_bounds", "make_report", "run", "run_experiment", "sample_channels",
    "solve", "summarize", "system_params_from_dict", "system_params_to_dict",
    "update_weights", "verify_rank_certificate",
]
