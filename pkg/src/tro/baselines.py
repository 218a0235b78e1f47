"""Reference optimizers for sample-complexity comparisons.

``sgd-strongly-convex``
    projected SGD with step ``c / (alpha t)``; output is the final iterate,
    the uniform average, or the average of the last half of the iterates.
``epoch-doubling``
    constant-step projected SGD in epochs whose length doubles while the
    step halves; each epoch restarts from the previous epoch average.

Risk is logged on a geometric grid of sample counts (ratio 1.2, plus 0 and
the budget), which is what :func:`samples_to_target` searches.
"""

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .exceptions import InvalidConfigError, InvalidInputError
from .results import CheckpointRecord, RunResult, StageRecord
from .synthdata import population_risk
from .targetrisk import StreamOracle
from .validation import check_positive, check_positive_int
from .vectorspace import as_vector

SGD = "sgd-strongly-convex"
EPOCH_DOUBLING = "epoch-doubling"
KINDS = (SGD, EPOCH_DOUBLING)

FINAL = "final"
UNIFORM = "uniform-average"
SUFFIX = "suffix-average"
AVERAGINGS = (FINAL, UNIFORM, SUFFIX)

INVERSE_T = "inverse-t"
CONSTANT = "constant"
HALVING = "halving"
STEP_RULES = {SGD: (INVERSE_T, CONSTANT), EPOCH_DOUBLING: (HALVING,)}

GRID_RATIO = 1.2


@dataclass(frozen=True)
class BaselineConfig:
    """Baseline settings.

    Parameters
    ----------
    kind : {"sgd-strongly-convex", "epoch-doubling"}
    total_budget : int
        Number of examples to consume.
    step_rule : str
        ``inverse-t`` (step ``step_c / (alpha t)``) or ``constant`` (step
        ``step_c``) for plain SGD; ``halving`` for epoch-doubling, whose
        first epoch has ``first_epoch`` steps of size ``step_c / alpha``.
    averaging : {"final", "uniform-average", "suffix-average"}
        Epoch-doubling always outputs epoch averages and needs ``uniform-average``.
    radius_R : float
        Radius of the hypothesis ball.
    """

    kind: str = SGD
    total_budget: int = 100_000
    step_rule: str = None
    step_c: float = 1.0
    averaging: str = None
    first_epoch: int = 4
    radius_R: float = 1.0
    grid_ratio: float = GRID_RATIO

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        rules = STEP_RULES[self.kind]
        if self.step_rule is None:
            object.__setattr__(self, "step_rule", rules[0])
        elif self.step_rule not in rules:
            raise InvalidConfigError(f"step_rule for {self.kind} must be one of {rules}, got {self.step_rule!r}")
        if self.averaging is None:
            object.__setattr__(self, "averaging", SUFFIX if self.kind == SGD else UNIFORM)
        elif self.averaging not in AVERAGINGS:
            raise InvalidConfigError(f"averaging must be one of {AVERAGINGS}, got {self.averaging!r}")
        if self.kind == EPOCH_DOUBLING and self.averaging != UNIFORM:
            raise InvalidConfigError("epoch-doubling outputs epoch averages; averaging must be 'uniform-average'")
        object.__setattr__(self, "total_budget", check_positive_int("total_budget", self.total_budget))
        check_positive("step_c", self.step_c)
        object.__setattr__(self, "first_epoch", check_positive_int("first_epoch", self.first_epoch))
        check_positive("radius_R", self.radius_R)
        if not self.grid_ratio > 1:
            raise InvalidConfigError(f"grid_ratio must exceed 1, got {self.grid_ratio!r}")

    def to_dict(self):
        return asdict(self)


def checkpoint_grid(budget, ratio=GRID_RATIO):
    """Sample counts ``0, 1, ...`` growing by ``ratio`` up to and including ``budget``.

    >>> checkpoint_grid(10).tolist()
    [0, 1, 2, 3, 4, 5, 6, 7, 8, 10]
    """
    pts = {0, int(budget)}
    x = 1.0
    while x < budget:
        pts.add(int(math.floor(x)))
        x = max(x * ratio, math.floor(x) + 1)
    return np.array(sorted(pts), dtype=np.int64)


def _sgd_run(oracle, loss, w0, n_steps, step_kind, step_c, alpha, radius, marks, start=0, trajectory=False):
    d = oracle.dim
    src, X, Y, k0, k1, amp, w_gen, noise, kind = oracle.kernel_args(loss)
    prefix = np.zeros((marks.shape[0], d))
    finals = np.zeros((marks.shape[0], d))
    traj = np.zeros((n_steps, d)) if trajectory else _kernels.empty_rows(d)
    w, total = _kernels.sgd_kernel(d)(
        src, X, Y, k0, k1, int(start), amp, w_gen, noise, kind, float(loss.l2),
        w0, float(radius), int(n_steps), step_kind, float(step_c), float(alpha),
        marks, prefix, finals, traj,
    )
    return w, total, prefix, finals, traj


def sgd_trajectory(oracle, loss, w0, n_steps, eta, radius, start=0):
    """Pre-update iterates of constant-step projected SGD (no clipping).

    Example ``t`` is read at stream position ``start + t``.
    """
    w0 = as_vector(w0, dim=oracle.dim, name="w0")
    *_, traj = _sgd_run(
        oracle, loss, w0, n_steps, _kernels.STEP_CONSTANT, eta, 1.0, radius,
        _kernels.empty_index(), start=start, trajectory=True,
    )
    return traj


def _output(averaging, n, idx, prefix, finals, w0):
    if n == 0:
        return w0
    if averaging == FINAL:
        return finals[idx[n]]
    if averaging == UNIFORM:
        return prefix[idx[n]] / n
    h = n // 2
    return (prefix[idx[n]] - prefix[idx[h]]) / (n - h)


def _run_plain(config, instance, loss, oracle, w0):
    grid = checkpoint_grid(config.total_budget, config.grid_ratio)
    marks = np.unique(np.concatenate([grid, grid // 2]))
    idx = {int(n): j for j, n in enumerate(marks)}
    step_kind = _kernels.STEP_INVERSE_T if config.step_rule == INVERSE_T else _kernels.STEP_CONSTANT
    w, _, prefix, finals, _ = _sgd_run(
        oracle, loss, w0, config.total_budget, step_kind, config.step_c, instance.alpha, config.radius_R, marks
    )
    checkpoints = []
    out = w0
    for n in grid:
        out = _output(config.averaging, int(n), idx, prefix, finals, w0)
        checkpoints.append(CheckpointRecord(int(n), population_risk(instance, out)))
    stages = [
        _stage_record(1, 0, config.radius_R, w0, instance),
        _stage_record(2, config.total_budget, config.radius_R, out, instance),
    ]
    return out, stages, checkpoints, [w0, out]


def _run_epochs(config, instance, loss, oracle, w0):
    budget = config.total_budget
    center = w0
    length = config.first_epoch
    eta = config.step_c / instance.alpha
    used = 0
    k = 1
    stages = [_stage_record(1, 0, config.radius_R, center, instance)]
    checkpoints = [CheckpointRecord(0, stages[0].risk)]
    centers = [center]
    empty = _kernels.empty_index()
    while used < budget:
        n = min(length, budget - used)
        _, total, _, _, _ = _sgd_run(
            oracle, loss, center, n, _kernels.STEP_CONSTANT, eta, instance.alpha, config.radius_R, empty, start=used
        )
        center = total / n
        used += n
        k += 1
        rec = _stage_record(k, used, config.radius_R, center, instance)
        stages.append(rec)
        checkpoints.append(CheckpointRecord(used, rec.risk))
        centers.append(center)
        length *= 2
        eta /= 2
    return center, stages, checkpoints, centers


def _stage_record(k, samples, radius, w, instance):
    # baselines do not clip, so gamma is reported as 0
    return StageRecord(
        stage=k,
        samples_seen=int(samples),
        delta_k=float(radius),
        gamma_k=0.0,
        dist_to_opt=float(np.linalg.norm(w - instance.w_star)),
        risk=population_risk(instance, w),
    )


def run_baseline(config, instance, loss=None, stream=0, w0=None):
    """Run a baseline on a synthetic instance.

    Returns a :class:`RunResult` with the same layout as the target-risk
    runs: stage rows (epochs) and risk checkpoints.
    """
    t0 = time.perf_counter()
    loss = instance.loss if loss is None else loss
    if np.linalg.norm(instance.w_star) > config.radius_R:
        raise InvalidConfigError(f"radius_R={config.radius_R} excludes the minimizer")
    w0 = np.zeros(instance.dim) if w0 is None else as_vector(w0, dim=instance.dim, name="w0")
    if np.linalg.norm(w0) > config.radius_R:
        raise InvalidInputError("w0 must lie in the hypothesis ball")
    oracle = StreamOracle(instance, stream)
    runner = _run_plain if config.kind == SGD else _run_epochs
    w, stages, checkpoints, centers = runner(config, instance, loss, oracle, w0)
    result = RunResult(
        method=config.kind,
        seed=instance.seed,
        stream=int(stream),
        params={"config": config.to_dict()},
        stages=stages,
        checkpoints=checkpoints,
        w_final=w,
        samples_used=config.total_budget,
        centers=centers,
        instance=instance.spec.to_dict() if instance.spec is not None else {},
        eps_opt=instance.eps_opt,
    )
    result.wall_time = time.perf_counter() - t0
    return result


def samples_to_target(config, instance, loss=None, eps_target=None, max_budget=None, stream=0):
    """Smallest logged sample count with excess risk at most ``eps_target``.

    Runs the baseline with ``max_budget`` examples (default: the config
    budget) and returns ``None`` when the budget is exhausted first.
    """
    if eps_target is None or not eps_target > 0:
        raise InvalidInputError(f"eps_target must be positive, got {eps_target!r}")
    if max_budget is not None:
        config = BaselineConfig(**{**config.to_dict(), "total_budget": int(max_budget)})
    result = run_baseline(config, instance, loss=loss, stream=stream)
    return result.samples_to_target(eps_target)
