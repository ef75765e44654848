"""Soliton dynamics of the forced stochastic KdV equation."""
from .grid import Grid, WeightConfig, inner_product, l2_norm, spectral_derivative, weighted_h1_norm, weighted_l2_norm
from .soliton import AmplitudeWindow, SolitonParams
from .noise import CovarianceKernel, build_kernel, sample_increment
from .solver import ForcingProfile, SimConfig, SplitStepSolver, StepError, energy, step
from .modulation import (Decomposition, DecompositionError, ExitTimes, ModulationCoefficients,
                         ReducedSDE, assemble_K, decompose, drift_coefficients, exit_times,
                         integrate_reduced_sde, stochastic_coefficients)
from .trajectory import TrajectoryRecord, simulate_batch, simulate_trajectory
from .spectral import WeightedOperator, build_weighted_operator, semigroup_decay_check, spectral_gap
from .harness import EnsembleStats, ExperimentConfig, load_config, run_ensemble, summarize, write_outputs

__version__ = "0.1.0"
