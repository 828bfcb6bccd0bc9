"""Particle-based Wasserstein gradient flow for nonlinear A- and D-optimal experimental design."""

from .core import (
    Bins, DesignPoint, DiagonalStripe, Ensemble, ForwardModel, PerChannelUniform, UniformBox, rng,
    sample_ensemble,
)
from .criteria import (
    Criterion, criterion_value, fisher_empirical, particle_velocities, particle_velocity,
)
from .errors import (
    ConfigError, HessUnavailable, NonFiniteParameter, NonFiniteState, OEDError, SingularFisher,
    SingularHessian, SingularOperator,
)
from .flow import FlowConfig, FlowResult, IterationRecord, run, run_benchmark, run_brute_force, run_streamlined
from .inversion import inner_gd, loss, loss_grad, loss_hessian, sigma_velocity

__version__ = "0.1.0"
