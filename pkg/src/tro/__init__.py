"""Multistage clipped SGD that exploits a known target risk.

The learner is told a risk level ``eps_prior`` that some hypothesis attains
and uses it to shrink its search ball stage after stage, clipping gradient
coordinates at a level tied to the current radius.
"""

from .baselines import BaselineConfig, run_baseline
from .estimators import ProjectedSGDRegressor, TargetRiskRegressor
from .exceptions import (
    InfeasibleDomainError,
    InfeasibleTargetError,
    InvalidConfigError,
    InvalidInputError,
    NumericalFailureError,
    PreconditionError,
    TROError,
)
from .losses import LossModel, loss, loss_grad
from .results import RunResult, read_run, write_run
from .synthdata import make_instance, population_risk, sample
from .targetrisk import AlgoConfig, DerivedParams, derive_params, run_algorithm, run_stage
from .vectorspace import Ball, project_ball, project_intersection

__version__ = "0.1.0"

__all__ = [
    "AlgoConfig",
    "Ball",
    "BaselineConfig",
    "DerivedParams",
    "InfeasibleDomainError",
    "InfeasibleTargetError",
    "InvalidConfigError",
    "InvalidInputError",
    "LossModel",
    "NumericalFailureError",
    "PreconditionError",
    "ProjectedSGDRegressor",
    "RunResult",
    "TROError",
    "TargetRiskRegressor",
    "derive_params",
    "loss",
    "loss_grad",
    "make_instance",
    "population_risk",
    "project_ball",
    "project_intersection",
    "read_run",
    "run_algorithm",
    "run_baseline",
    "run_stage",
    "sample",
    "write_run",
]
