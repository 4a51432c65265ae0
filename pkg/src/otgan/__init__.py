"""Mini-batch energy distance over entropic optimal transport, with
adversarial training of a generator against a learned transport cost."""

from .distances import BatchQuad, LossBreakdown, energy_distance_euclidean, med_loss
from .nets import AdamState, Gradients, Mlp, adam_step, init_mlp
from .numerics import Rng
from .transport import (
    CostSpec,
    SinkhornConfig,
    SinkhornResult,
    exact_assignment,
    pairwise_cost,
    plan_entropy,
    random_match_distance,
    sinkhorn,
)

__all__ = [
    "AdamState",
    "BatchQuad",
    "CostSpec",
    "Gradients",
    "LossBreakdown",
    "Mlp",
    "Rng",
    "SinkhornConfig",
    "SinkhornResult",
    "adam_step",
    "energy_distance_euclidean",
    "exact_assignment",
    "init_mlp",
    "med_loss",
    "pairwise_cost",
    "plan_entropy",
    "random_match_distance",
    "sinkhorn",
]

__version__ = "0.1.0"
