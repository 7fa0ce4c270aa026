"""Switching CACC synthesis and lossy-channel platoon simulation."""

from lossycacc.model import DiscreteModel, VehicleParams, continuous_error_matrices, discretize
from lossycacc.lifting import LiftedModel, assemble_lifted_state, lift
from lossycacc.synthesis import NominalGains, RiccatiSolution, min_gamma, solve_hinf_riccati, synthesize_gains
from lossycacc.stochastic import GainSet, dc_gain, expectation_matching_gains, f1_exact_timevarying, f1_static_approx
from lossycacc.observer import ObserverGains, observer_step, synthesize_uio
from lossycacc.metrics import StabilityReport, closed_loop_norm, l2_ratios
from lossycacc.simulator import EnsembleSummary, SimConfig, SimRun, run_monte_carlo, run_scenario
from lossycacc.design import Design, design

__version__ = "0.1.0"

__all__ = [
    "Design",
    "EnsembleSummary",
    "SimConfig",
    "SimRun",
    "StabilityReport",
    "closed_loop_norm",
    "design",
    "l2_ratios",
    "run_monte_carlo",
    "run_scenario",
    "DiscreteModel",
    "GainSet",
    "LiftedModel",
    "NominalGains",
    "ObserverGains",
    "RiccatiSolution",
    "VehicleParams",
    "assemble_lifted_state",
    "continuous_error_matrices",
    "dc_gain",
    "discretize",
    "expectation_matching_gains",
    "f1_exact_timevarying",
    "f1_static_approx",
    "lift",
    "min_gamma",
    "observer_step",
    "solve_hinf_riccati",
    "synthesize_gains",
    "synthesize_uio",
]
