"""Differentiable object counting from attention weights and box proposals."""

from .counting import CountGrads, CountParams, ForwardTrace, Scene, backward, forward
from .geometry import Box, distance_matrix, iou
from .plf import PLF, plf_eval, plf_grad, plf_init_identity, plf_sample

__all__ = [
    "Box",
    "CountGrads",
    "CountParams",
    "ForwardTrace",
    "PLF",
    "Scene",
    "backward",
    "distance_matrix",
    "forward",
    "iou",
    "plf_eval",
    "plf_grad",
    "plf_init_identity",
    "plf_sample",
]
