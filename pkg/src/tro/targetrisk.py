"""Multistage clipped SGD driven by a known target risk.

Each stage starts at the previous stage average ``w_hat_k`` and runs ``T1``
steps of projected SGD on ``H ∩ ball(w_hat_k, delta_k)``, where ``H`` is
the origin ball of radius ``R``. Gradient coordinates are clipped at
``gamma_k = 2 * xi * beta * delta_k``. After the stage the radius shrinks as
``delta_{k+1} = sqrt(epsilon * delta_k**2 + tau * eps_prior)``, so the
search domain contracts geometrically until it reaches a floor set by the
target risk.
"""

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels, _rng
from .exceptions import InvalidConfigError, InvalidInputError, NumericalFailureError
from .results import CheckpointRecord, RunResult, StageRecord
from .synthdata import check_feasible, population_risk
from .validation import check_open_unit, check_positive, check_positive_int
from .vectorspace import as_vector

THEOREM = "theorem"
PRACTICAL = "practical"
CONSTANTS_MODES = (THEOREM, PRACTICAL)

METHOD = "targetrisk"

# number of thinned steps recorded per stage when diagnostics are requested
DIAGNOSTIC_POINTS = 200


@dataclass(frozen=True)
class AlgoConfig:
    """User-facing inputs of the algorithm.

    Parameters
    ----------
    eps_prior : float
        Target risk, assumed attainable.
    epsilon : float
        Contraction factor of the squared stage radius, in (0, 1).
    tau : float
        Weight of the target risk in the radius floor, in (0, 1).
    delta : float
        Failure probability used in the stage length, in (0, 1).
    radius_R : float
        Radius of the hypothesis ball ``H``.
    constants_mode : {"theorem", "practical"}
        ``practical`` takes ``t1_override`` and ``m_override`` verbatim.
    """

    eps_prior: float
    epsilon: float = 0.5
    tau: float = 0.5
    delta: float = 0.05
    radius_R: float = 1.0
    constants_mode: str = THEOREM
    t1_override: int = None
    m_override: int = None

    def __post_init__(self):
        check_positive("eps_prior", self.eps_prior)
        check_open_unit("epsilon", self.epsilon)
        check_open_unit("tau", self.tau)
        check_open_unit("delta", self.delta)
        check_positive("radius_R", self.radius_R)
        if self.constants_mode not in CONSTANTS_MODES:
            raise InvalidConfigError(f"constants_mode must be one of {CONSTANTS_MODES}, got {self.constants_mode!r}")
        t1 = check_positive_int("t1_override", self.t1_override, allow_none=True)
        m = check_positive_int("m_override", self.m_override, allow_none=True)
        if self.constants_mode == THEOREM and (t1 is not None or m is not None):
            raise InvalidConfigError("t1_override/m_override apply only with constants_mode='practical'")
        object.__setattr__(self, "t1_override", t1)
        object.__setattr__(self, "m_override", m)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class DerivedParams:
    """Quantities derived from an :class:`AlgoConfig` and the problem constants.

    ``beta`` and ``radius_R`` are echoed because every stage needs them.
    """

    xi: float
    t1: int
    eta: float
    s: int
    m: int
    beta: float
    radius_R: float

    def __post_init__(self):
        if self.t1 < 1:
            raise InvalidConfigError(f"t1 must be >= 1, got {self.t1}")
        if self.m < 0:
            raise InvalidConfigError(f"m must be >= 0, got {self.m}")

    @property
    def total_samples(self):
        return self.m * self.t1

    def gamma(self, delta_k):
        return 2.0 * self.xi * self.beta * delta_k

    def to_dict(self):
        d = asdict(self)
        d["total_samples"] = self.total_samples
        return d


def derive_params(config, alpha, beta, dim):
    """Clip multiplier, stage length, step size, peeling count and stage count.

    ``xi = max(4 beta / (alpha tau), 16 beta / alpha)``; ``m`` is the
    smallest count with ``beta R**2 / 2 * epsilon**m <= eps_prior`` (at
    least 1); ``s = ceil(log2(xi beta R**2 / eps_prior))`` (at least 1);

    ``T1 = ceil(4 max((xi**3 beta d + 2 xi beta sqrt(d)) / (epsilon alpha) * ln(m s / delta),
    16 xi**2 beta**2 / (alpha**2 epsilon**2)))``

    and ``eta = 1 / (2 xi beta sqrt(T1))``. In practical mode the overrides
    replace ``T1`` and ``m`` when given.

    Examples
    --------
    >>> p = derive_params(AlgoConfig(1e-3), alpha=1.0, beta=1.0, dim=5)
    >>> p.xi, p.s, p.m
    (16.0, 14, 9)
    """
    alpha = float(alpha)
    beta = float(beta)
    if not (alpha > 0 and beta > 0):
        raise InvalidInputError(f"alpha and beta must be positive, got {alpha}, {beta}")
    if beta < alpha:
        raise InvalidInputError(f"beta ({beta}) must be at least alpha ({alpha})")
    if int(dim) < 1:
        raise InvalidInputError(f"dim must be >= 1, got {dim}")
    d = int(dim)
    eps, tau, R2 = config.epsilon, config.tau, config.radius_R**2

    xi = max(4.0 * beta / (alpha * tau), 16.0 * beta / alpha)
    s = max(1, math.ceil(math.log2(xi * beta * R2 / config.eps_prior)))
    m = math.ceil(math.log(beta * R2 / (2.0 * config.eps_prior)) / math.log(1.0 / eps))
    m = max(1, m)
    if config.m_override is not None:
        m = config.m_override
    if config.t1_override is not None:
        t1 = config.t1_override
    else:
        # m does not depend on T1, so the fixed point is reached in one pass
        a = (xi**3 * beta * d + 2.0 * xi * beta * math.sqrt(d)) / (eps * alpha) * math.log(m * s / config.delta)
        b = 16.0 * xi**2 * beta**2 / (alpha**2 * eps**2)
        t1 = math.ceil(4.0 * max(a, b))
    eta = 1.0 / (2.0 * xi * beta * math.sqrt(t1))
    return DerivedParams(xi=xi, t1=int(t1), eta=eta, s=int(s), m=int(m), beta=beta, radius_R=float(config.radius_R))


def shrink_domain(delta_k, config):
    """Next stage radius ``sqrt(epsilon * delta_k**2 + tau * eps_prior)``."""
    if not delta_k >= 0:
        raise InvalidInputError(f"delta_k must be nonnegative, got {delta_k}")
    return math.sqrt(config.epsilon * delta_k * delta_k + config.tau * config.eps_prior)


def radius_from_lipschitz(G, alpha):
    """Radius ``2 G / alpha`` of a ball sure to contain the minimizer."""
    if not (G > 0 and alpha > 0):
        raise InvalidInputError(f"G and alpha must be positive, got {G}, {alpha}")
    return 2.0 * G / alpha


@dataclass
class StageState:
    """Center, radius and clip level of stage ``k`` plus the running iterate."""

    k: int
    w_hat: np.ndarray
    delta_k: float
    gamma_k: float
    iterate: np.ndarray = None
    running_sum: np.ndarray = None

    @classmethod
    def start(cls, k, w_hat, delta_k, params):
        w_hat = as_vector(w_hat, name="w_hat")
        return cls(k, w_hat, float(delta_k), params.gamma(delta_k), w_hat.copy(), np.zeros_like(w_hat))


@dataclass
class StepDiagnostics:
    """What a stage run reports besides its average.

    ``W`` is the sum of squared distances of the pre-update iterates to the
    reference point (NaN without one). The ``rec_*`` arrays hold every
    ``thin``-th step when recording was requested.
    """

    steps: int
    W: float
    max_violation: float
    clipped_fraction: float
    thin: int = 0
    rec_positions: np.ndarray = None
    rec_iterates: np.ndarray = None
    rec_clipped: np.ndarray = None
    trajectory: np.ndarray = None

    def summary(self):
        return {
            "steps": self.steps,
            "W": self.W,
            "max_violation": self.max_violation,
            "clipped_fraction": self.clipped_fraction,
        }


@dataclass(frozen=True, eq=False)
class StreamOracle:
    """Examples of a synthetic instance read from one counter-based stream."""

    instance: object
    stream: int = 0

    @property
    def dim(self):
        return self.instance.dim

    def capacity(self):
        return None

    def kernel_args(self, loss):
        if loss.kind != self.instance.loss.kind:
            raise InvalidInputError(f"loss {loss.kind!r} does not match the instance labels ({self.instance.loss.kind!r})")
        k0, k1 = _rng.stream_key(self.instance.seed, self.stream)
        inst = self.instance
        return (
            _kernels.SRC_ORACLE, _kernels.empty_rows(inst.dim), np.empty(0), k0, k1,
            inst.scale, inst.w_gen, inst.noise_sigma, loss.code,
        )


@dataclass(frozen=True, eq=False)
class ArrayOracle:
    """Examples taken row by row from arrays; row ``t`` is stream position ``t``."""

    X: np.ndarray
    y: np.ndarray

    @property
    def dim(self):
        return self.X.shape[1]

    def capacity(self):
        return self.X.shape[0]

    def kernel_args(self, loss):
        d = self.dim
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        return (_kernels.SRC_ARRAYS, X, y, np.uint64(0), np.uint64(0), np.ones(d), np.zeros(d), 0.0, loss.code)


def run_stage(state, params, loss, oracle, w_star=None, thin=0, trajectory=False):
    """Run the ``T1`` steps of stage ``state.k`` and return its average.

    Example ``t`` of stage ``k`` is read at stream position ``(k-1) T1 + t``.
    ``state.iterate`` and ``state.running_sum`` are updated in place.

    Parameters
    ----------
    w_star : array_like, optional
        Reference point for the ``W`` statistic.
    thin : int
        Record every ``thin``-th step (0 records nothing).
    trajectory : bool
        Keep every pre-update iterate.

    Returns
    -------
    average : ndarray
    diagnostics : StepDiagnostics

    Raises
    ------
    NumericalFailureError
        If a projection fails to converge.
    """
    d = oracle.dim
    T1 = params.t1
    start = (state.k - 1) * T1
    cap = oracle.capacity()
    if cap is not None and start + T1 > cap:
        raise InvalidInputError(f"stage {state.k} needs examples up to {start + T1}, only {cap} available")
    if state.w_hat.shape[0] != d:
        raise InvalidInputError(f"w_hat has dimension {state.w_hat.shape[0]}, expected {d}")
    ref = np.zeros(d) if w_star is None else as_vector(w_star, dim=d, name="w_star")
    thin = int(thin)
    n_rec = -(-T1 // thin) if thin > 0 else 0
    rec_pos = np.zeros(n_rec, dtype=np.int64)
    rec_w = np.zeros((n_rec, d))
    rec_v = np.zeros((n_rec, d))
    traj = np.zeros((T1, d)) if trajectory else _kernels.empty_rows(d)

    src, X, Y, k0, k1, amp, w_gen, noise, kind = oracle.kernel_args(loss)
    kernel = _kernels.stage_kernel(d)
    status, steps, avg, last, W, viol, n_clipped = kernel(
        src, X, Y, k0, k1, start, amp, w_gen, noise, kind, float(loss.l2),
        state.w_hat, state.delta_k, params.radius_R, T1, params.eta, state.gamma_k, ref,
        thin, rec_pos, rec_w, rec_v, traj,
    )
    state.iterate = last
    state.running_sum = avg * steps
    if status != 0:
        raise NumericalFailureError(f"projection failed at step {steps} of stage {state.k}", last_iterate=last)
    diag = StepDiagnostics(
        steps=int(steps),
        W=float(W) if w_star is not None else float("nan"),
        max_violation=float(viol),
        clipped_fraction=n_clipped / (steps * d),
        thin=thin,
        rec_positions=rec_pos if thin > 0 else None,
        rec_iterates=rec_w if thin > 0 else None,
        rec_clipped=rec_v if thin > 0 else None,
        trajectory=traj if trajectory else None,
    )
    return avg, diag


def diagnostic_thin(t1):
    return max(1, -(-t1 // DIAGNOSTIC_POINTS))


def run_algorithm(config, instance, loss=None, stream=0, params=None):
    """Run every stage on a synthetic instance and collect the trace.

    Parameters
    ----------
    config : AlgoConfig
    instance : ProblemInstance
    loss : LossModel, optional
        Defaults to the instance loss.
    stream : int
        Sample stream (one per replica).
    params : DerivedParams, optional
        Use these instead of :func:`derive_params` (e.g. ``m = 0``).

    Raises
    ------
    InfeasibleTargetError
        If ``eps_prior`` is below the optimal risk.
    """
    t0 = time.perf_counter()
    loss = instance.loss if loss is None else loss
    check_feasible(instance, config.eps_prior)
    if np.linalg.norm(instance.w_star) > config.radius_R:
        raise InvalidConfigError(
            f"radius_R={config.radius_R} excludes the minimizer (norm {np.linalg.norm(instance.w_star):.6g})"
        )
    if params is None:
        params = derive_params(config, instance.alpha, instance.beta, instance.dim)
    oracle = StreamOracle(instance, stream)

    w_hat = np.zeros(instance.dim)
    delta = float(config.radius_R)
    stages, centers, stats = [], [], []
    for k in range(1, params.m + 2):
        centers.append(w_hat)
        stages.append(
            StageRecord(
                stage=k,
                samples_seen=(k - 1) * params.t1,
                delta_k=delta,
                gamma_k=params.gamma(delta),
                dist_to_opt=float(np.linalg.norm(w_hat - instance.w_star)),
                risk=population_risk(instance, w_hat),
            )
        )
        if k == params.m + 1:
            break
        state = StageState.start(k, w_hat, delta, params)
        w_hat, diag = run_stage(state, params, loss, oracle, w_star=instance.w_star)
        stats.append(diag.summary())
        delta = shrink_domain(delta, config)

    result = RunResult(
        method=METHOD,
        seed=instance.seed,
        stream=int(stream),
        params={"config": config.to_dict(), "derived": params.to_dict()},
        stages=stages,
        checkpoints=[CheckpointRecord(r.samples_seen, r.risk) for r in stages],
        w_final=w_hat,
        samples_used=params.total_samples,
        centers=centers,
        stage_stats=stats,
        instance=instance.spec.to_dict() if instance.spec is not None else {},
        eps_opt=instance.eps_opt,
    )
    result.wall_time = time.perf_counter() - t0
    return result


def replay_stage(result, k, instance, thin=0, trajectory=False):
    """Re-run stage ``k`` of a recorded run with optional step recording.

    Raises
    ------
    ValueError
        If the trace lacks what is needed or the replay does not reproduce
        the recorded next center.
    """
    try:
        derived = result.params["derived"]
        w_hat = result.centers[k - 1]
        w_next = result.centers[k]
        delta = result.stages[k - 1].delta_k
    except (KeyError, IndexError, TypeError) as exc:
        raise ValueError(f"trace cannot be replayed at stage {k}: {exc}") from None
    params = DerivedParams(**{f: derived[f] for f in ("xi", "t1", "eta", "s", "m", "beta", "radius_R")})
    state = StageState.start(k, w_hat, delta, params)
    avg, diag = run_stage(
        state, params, instance.loss, StreamOracle(instance, result.stream),
        w_star=instance.w_star, thin=thin, trajectory=trajectory,
    )
    if not np.array_equal(avg, w_next):
        raise ValueError(f"replay of stage {k} does not reproduce the recorded center")
    return state, params, diag

