"""Legendre-Galerkin spectral solver and a residual-trained coefficient network."""

from .forcing import sample_batch, trig_four
from .galerkin import (
    BoundaryCondition,
    assemble,
    assemble_2d,
    load_vector,
    make_basis,
    reconstruct,
    solve_exact,
)
from .legendre import gll_rule, legendre_deriv, legendre_eval
from .network import Architecture, forward, forward_batch, init_params
from .training import TrainConfig, empirical_loss, make_loss_config, train

__version__ = "0.1.0"

__all__ = [
    "Architecture",
    "BoundaryCondition",
    "TrainConfig",
    "assemble",
    "assemble_2d",
    "empirical_loss",
    "forward",
    "forward_batch",
    "gll_rule",
    "init_params",
    "legendre_deriv",
    "legendre_eval",
    "load_vector",
    "make_basis",
    "make_loss_config",
    "reconstruct",
    "sample_batch",
    "solve_exact",
    "train",
    "trig_four",
]
