"""Multicanonical (Wang-Landau) and equi-energy samplers with a finite-state kernel lab."""

from ._backend import BACKEND
from .ee import EEConfig, ee_accept, ee_step, replay_jumps, run_ladder
from .estimate import (comparison_table, conditional_reweighted_mean, improvement,
                       replication_experiment, ring_decomposed_estimate, ring_probs_from_weights)
from .mcs import (flat_check, gamma_at, normalized_weights, run_mcs, temp_swap_accept,
                  update_weight, within_temp_accept, WeightTable)
from .samples import SampleSet
from .target import (DoubleWell, FiniteModel, GaussianMixture, LadderConfig, ring_index,
                     true_ring_masses)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DoubleWell", "EEConfig", "FiniteModel", "GaussianMixture", "LadderConfig",
    "SampleSet", "WeightTable", "comparison_table", "conditional_reweighted_mean", "ee_accept",
    "ee_step", "flat_check", "gamma_at", "improvement", "normalized_weights", "replay_jumps",
    "replication_experiment", "ring_decomposed_estimate", "ring_index", "ring_probs_from_weights",
    "run_ladder", "run_mcs", "temp_swap_accept", "true_ring_masses", "update_weight",
    "within_temp_accept",
]
