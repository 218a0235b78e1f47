"""JSON experiment configuration.

Schema checks (types, ranges, cross-field rules) run in pydantic so that
every violation is reported with its field path. Feasibility of the target
risk needs the instance and is checked separately by
:func:`check_targets`.
"""

import json
import os
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, model_validator

from .baselines import KINDS, SGD, BaselineConfig
from .losses import LOSS_KINDS, SQUARED
from .synthdata import check_feasible, make_instance
from .targetrisk import CONSTANTS_MODES, THEOREM, AlgoConfig

SEED_ENV = "TRO_SEED"
MAX_SEED = 2**32 - 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, strict=True)


class InstanceSection(_Section):
    dim: PositiveInt
    cond_number: float = Field(1.0, ge=1.0)
    noise_sigma: float = Field(0.0, ge=0.0)
    radius_R: PositiveFloat = 1.0
    seed: int = Field(0, ge=0, le=MAX_SEED)
    loss: Literal[LOSS_KINDS] = SQUARED
    l2: float = Field(0.0, ge=0.0)

    @model_validator(mode="after")
    def _loss_fields(self):
        if self.dim == 1 and self.cond_number != 1.0:
            raise ValueError("a one-dimensional instance has cond_number 1")
        if self.loss == SQUARED and self.l2 != 0.0:
            raise ValueError("l2 applies to the logistic-l2 loss only")
        if self.loss != SQUARED and self.noise_sigma != 0.0:
            raise ValueError("noise_sigma applies to the squared loss only")
        if self.loss != SQUARED and not self.l2 > 0.0:
            raise ValueError("logistic-l2 needs l2 > 0")
        return self


class AlgorithmSection(_Section):
    eps_prior: PositiveFloat
    epsilon: float = Field(0.5, gt=0.0, lt=1.0)
    tau: float = Field(0.5, gt=0.0, lt=1.0)
    delta: float = Field(0.05, gt=0.0, lt=1.0)
    constants_mode: Literal[CONSTANTS_MODES] = THEOREM
    t1: Optional[PositiveInt] = None
    m: Optional[PositiveInt] = None
    diagnostics: bool = False

    @model_validator(mode="after")
    def _overrides(self):
        if self.constants_mode == THEOREM and (self.t1 is not None or self.m is not None):
            raise ValueError("t1 and m may only be set with constants_mode 'practical'")
        return self

    def algo_config(self, radius_R, eps_prior=None):
        return AlgoConfig(
            eps_prior=self.eps_prior if eps_prior is None else eps_prior,
            epsilon=self.epsilon,
            tau=self.tau,
            delta=self.delta,
            radius_R=radius_R,
            constants_mode=self.constants_mode,
            t1_override=self.t1,
            m_override=self.m,
        )


class BaselineSection(_Section):
    kind: Literal[KINDS] = SGD
    name: Optional[str] = Field(None, min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")
    total_budget: PositiveInt = 100_000
    step_rule: Optional[str] = None
    step_c: PositiveFloat = 1.0
    averaging: Optional[str] = None
    first_epoch: PositiveInt = 4

    @model_validator(mode="after")
    def _combination(self):
        self.baseline_config(1.0)
        return self

    @property
    def label(self):
        return self.name or self.kind

    def baseline_config(self, radius_R, total_budget=None):
        return BaselineConfig(
            kind=self.kind,
            total_budget=self.total_budget if total_budget is None else total_budget,
            step_rule=self.step_rule,
            step_c=self.step_c,
            averaging=self.averaging,
            first_epoch=self.first_epoch,
            radius_R=radius_R,
        )


class SweepSection(_Section):
    eps_prior: List[PositiveFloat] = Field(min_length=1)
    replicas: PositiveInt = 10
    max_budget: Optional[PositiveInt] = None

    @model_validator(mode="after")
    def _distinct(self):
        if len(set(self.eps_prior)) != len(self.eps_prior):
            raise ValueError("eps_prior values must be distinct")
        return self


class OutputSection(_Section):
    dir: str = "out"


class ExperimentConfig(_Section):
    """Top-level config.

    ``run`` executes the algorithm section and every baseline on
    ``replicas`` sample streams; ``sweep`` needs the sweep section and
    replaces ``algorithm.eps_prior`` by each sweep value.
    """

    instance: InstanceSection
    algorithm: AlgorithmSection
    baselines: List[BaselineSection] = Field(default_factory=list)
    sweep: Optional[SweepSection] = None
    replicas: PositiveInt = 1
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _cross(self):
        labels = [b.label for b in self.baselines]
        if len(set(labels)) != len(labels):
            raise ValueError(f"baseline names must be unique, got {labels}")
        if "targetrisk" in labels:
            raise ValueError("'targetrisk' is reserved for the main method")
        if self.algorithm.diagnostics and self.instance.loss != SQUARED:
            raise ValueError("algorithm.diagnostics needs the squared loss")
        return self

    def eps_values(self):
        return list(self.sweep.eps_prior) if self.sweep is not None else [self.algorithm.eps_prior]


class ConfigError(Exception):
    """Schema violation; ``path`` is the dotted location of the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


def _loc(loc):
    return ".".join(str(p) for p in loc) or "<root>"


def parse_config(data, env=None):
    """Validate a decoded JSON object, applying the seed override from ``env``."""
    env = os.environ if env is None else env
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    raw = env.get(SEED_ENV)
    if raw is not None and raw != "":
        try:
            seed = int(raw)
        except ValueError:
            raise ConfigError(SEED_ENV, f"must be an integer, got {raw!r}") from None
        inst = data.get("instance")
        if isinstance(inst, dict):
            data = {**data, "instance": {**inst, "seed": seed}}
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        msg = err["msg"].removeprefix("Value error, ")
        raise ConfigError(_loc(err["loc"]), msg) from None


def load_config(path, env=None):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    return parse_config(data, env=env)


def build_instance(config):
    return make_instance(**config.instance.model_dump())


def check_targets(config, instance=None):
    """Raise :class:`InfeasibleTargetError` if any requested ``eps_prior`` is below the optimal risk."""
    instance = build_instance(config) if instance is None else instance
    for eps in config.eps_values():
        check_feasible(instance, eps)
    return instance


__all__ = [
    "ExperimentConfig",
    "InstanceSection",
    "AlgorithmSection",
    "BaselineSection",
    "SweepSection",
    "OutputSection",
    "ConfigError",
    "parse_config",
    "load_config",
    "build_instance",
    "check_targets",
    "SEED_ENV",
]
