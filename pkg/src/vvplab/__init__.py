"""Hard instances and reductions for convex vector-valued linear prediction."""

__version__ = "0.1.0"

from .core import (ConstructionError, DimensionError, InstanceTooLarge, LearnerContract, ScoInstance,
                   StructuredMatrix, VvpInstance, empirical_loss, frobenius_distance, matvec,
                   population_loss, project_frobenius_ball)
from .shatter import ShatterInstance, ShatterParams, build_instance, labeling_matrix, verify_shattering
from .signsets import CircleEmbedding, SignVectorSet, build_sign_set, circle_point, pad_embed

__all__ = [
    "CircleEmbedding",
    "ConstructionError",
    "DimensionError",
    "InstanceTooLarge",
    "LearnerContract",
    "ScoInstance",
    "ShatterInstance",
    "ShatterParams",
    "SignVectorSet",
    "StructuredMatrix",
    "VvpInstance",
    "build_instance",
    "build_sign_set",
    "circle_point",
    "empirical_loss",
    "frobenius_distance",
    "labeling_matrix",
    "matvec",
    "pad_embed",
    "population_loss",
    "project_frobenius_ball",
    "verify_shattering",
]
