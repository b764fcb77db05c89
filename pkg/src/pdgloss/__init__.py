"""Probabilistic dependency graphs, their inconsistency, and the loss
functions it generates."""

from .core import (
    Cpd,
    Edge,
    JointTable,
    Pdg,
    Variable,
    build_pdg,
    conditional,
    marginal,
    pushforward,
)
from .scoring import (
    gamma_score,
    gamma_score_expectation,
    ideficiency,
    incompatibility,
    to_bits,
)
from .solver import (
    FeasibleFamily,
    SolveResult,
    chernoff_divergence,
    feasible_family,
    limit_gamma_inf,
    min_gamma_score,
    min_inconsistency,
)
from .closedform import (
    GaussianSpec,
    alpha_to_confidences,
    complete_square,
    confidences_to_alpha,
    pdg_divergence,
    power_mean,
    renyi_divergence,
    two_gaussian_inconsistency,
)
from .factorgraph import (
    Factor,
    WeightedFactorGraph,
    fg_to_pdg,
    free_energy_identity,
    partition_function,
)
from .losses import Dataset, LossReport

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
