"""Decentralized projected gradient descent with delayed stochastic gradients.

Nodes of a network each hold a convex loss and exchange iterates with their
neighbours through a doubly stochastic mixing matrix; every node steps along
a possibly stale, noisy gradient and projects onto a box.  The package
provides the simulator, the objective families, delay models, numerical
bound evaluation and a straight-ray tomography generator.
"""
from .analysis import bound_constants, disagreement_bound, fit_loglog_rate, geometric_weighted_sum, optimal_eta
from .delay import DelayModel
from .kernels import BACKEND
from .network import build_topology, make_mixing, validate_mixing
from .objectives import Problem, make_objective, synthetic_problem
from .solver import StepSizePolicy, async_timing_run, centralized_reference, run
from .tomo import generate_tomo_problem

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DelayModel", "Problem", "StepSizePolicy", "async_timing_run", "bound_constants",
    "build_topology", "centralized_reference", "disagreement_bound", "fit_loglog_rate",
    "generate_tomo_problem", "geometric_weighted_sum", "make_mixing", "make_objective", "optimal_eta",
    "run", "synthetic_problem", "validate_mixing",
]
