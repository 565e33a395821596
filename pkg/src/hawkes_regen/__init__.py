"""Regenerative analysis of linear Hawkes processes.

Simulation by clusters, exact A-regeneration times through the associated
M/G/infinity queue, Takacs-type transforms and moments of the regeneration
time, sliding-window estimators and an explicit deviation bound.
"""

from .concentration import ConcentrationInput, bound_terms, deviation_bound, epsilon_eta
from .errors import *  # noqa: F401,F403
from .estimators import (
    Clamped,
    Constant,
    Count,
    CountIndicator,
    PairKernel,
    PairKernelW,
    boundary_identity,
    boundary_identity_residual,
    estimate_pi_cycles,
    f_w_functional,
    pair_statistic,
    sliding_average,
)
from .queue import (
    Degenerate,
    Empirical,
    ExpDom,
    compensator,
    convergence_abscissa,
    delay_bound,
    exp_moment_tau,
    integral_I,
    kummer_J,
    laplace_busy,
    laplace_tau,
    mean_tau,
    second_moment_tau,
    shift_relations,
)
from .regen import Cycle, RegenReport, busy_sweep, certify, extract_cycles, regeneration_times
from .simulate import Cluster, PathRecord, sample_cluster, sample_cluster_stats, simulate_path, spawn_rng
from .transfer import (
    Exponential,
    Tabulated,
    UniformBox,
    Zero,
    exp_moment,
    l1_norm,
    mean_moment,
    sample_delay,
    theta_star,
    transfer_from_config,
)

__version__ = "0.1.0"
