"""Numerical checks of the inequalities the method relies on.

Scalar checks
    clip bias ``|E clip(X, C) - E X| <= 2 Var(X) / C`` when ``|E X| <= C/2``;
    self-bounding ``|l'| <= sqrt(4 beta l)`` for nonnegative smooth losses;
    loss gradients against central finite differences.

Stage diagnostics (squared loss)
    along a replayed stage, with ``u_t = w_t - w_star``, ``v_t`` the clipped
    gradient and ``E_t`` the expectation over a fresh example,

    ``D = sum_t <E_t v - v_t, u_t>``   (martingale part)
    ``E = sum_t <E_t g - E_t v, u_t>`` (clipping bias)
    ``V = D + E``, ``W = sum_t ||u_t||^2`` and
    ``Sigma2 = sum_t Var_t <v, u_t>``.

    They are estimated on every ``thin``-th step, each recorded step standing
    for the ``thin`` steps that follow it, with ``E_t v`` averaged over fresh
    draws. The checks compare them with

    ``E <= (4 T1 / xi) eps_prior + (4 beta / xi) W``,
    ``Sigma2 <= d gamma^2 W``, ``|d_t| <= 2 sqrt(d) gamma delta`` and
    ``2 |E_t g_i| <= gamma``, allowing three standard errors.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels, _rng
from .exceptions import InvalidConfigError, PreconditionError
from .losses import LOGISTIC_L2, SQUARED, LossModel, loss, loss_derivative, loss_grad
from .targetrisk import diagnostic_thin, replay_stage

GAUSSIAN = "gaussian"
SHIFTED_UNIFORM = "shifted-uniform"
TWO_POINT = "two-point"
DISTRIBUTIONS = (GAUSSIAN, SHIFTED_UNIFORM, TWO_POINT)

SIGMA_SLACK = 3.0
SELF_BOUND_TOL = 1e-9
FD_STEP = 1e-6
FD_REL_TOL = 1e-6
FD_ABS_TOL = 1e-9
DEFAULT_FRESH = 10_000

CLIP_LEVELS = (0.5, 1.0, 2.0, 4.0)
# mean shifts as fractions of the largest allowed mean C/2
MEAN_FRACTIONS = (0.0, 0.5, 1.0)

SUITES = ("clip", "selfbound", "grad", "all")


@dataclass(frozen=True)
class DistSpec:
    """Scalar law ``loc + scale * Z`` with ``Z`` standardized (mean 0, variance 1).

    ``Z`` is a standard normal, a uniform on ``[-sqrt(3), sqrt(3)]`` or a
    two-point variable taking ``sqrt((1-p)/p)`` with probability ``p``.
    """

    kind: str
    loc: float = 0.0
    scale: float = 1.0
    p: float = 0.3

    def __post_init__(self):
        if self.kind not in DISTRIBUTIONS:
            raise InvalidConfigError(f"kind must be one of {DISTRIBUTIONS}, got {self.kind!r}")
        if not self.scale >= 0:
            raise InvalidConfigError(f"scale must be nonnegative, got {self.scale}")
        if not 0 < self.p < 1:
            raise InvalidConfigError(f"p must lie in (0, 1), got {self.p}")

    @property
    def mean(self):
        return self.loc

    @property
    def var(self):
        return self.scale**2

    def draw(self, rng, n):
        if self.kind == GAUSSIAN:
            z = rng.standard_normal(n)
        elif self.kind == SHIFTED_UNIFORM:
            z = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), n)
        else:
            hi = math.sqrt((1 - self.p) / self.p)
            lo = -math.sqrt(self.p / (1 - self.p))
            z = np.where(rng.random(n) < self.p, hi, lo)
        return self.loc + self.scale * z


@dataclass
class CheckReport:
    """Outcome of one numerical check."""

    name: str
    passed: bool
    estimate: float
    bound: float
    stderr: float = 0.0
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def check_clip_bias(dist, C, n_samples=1_000_000, seed=0):
    """Monte-Carlo check of the clip-bias bound for one scalar law.

    Passes when the estimated ``|E clip(X, C) - E X|`` is at most
    ``2 Var(X) / C`` plus three standard errors.

    Raises
    ------
    PreconditionError
        If ``|E X| > C / 2``; the bound says nothing then.
    """
    if not C > 0:
        raise PreconditionError(f"clip level must be positive, got {C}")
    if abs(dist.mean) > C / 2:
        raise PreconditionError(f"|E X| = {abs(dist.mean):.6g} exceeds C/2 = {C / 2:.6g}")
    x = dist.draw(np.random.default_rng(seed), int(n_samples))
    diff = np.clip(x, -C, C) - x
    est = float(diff.mean())
    se = float(diff.std(ddof=1) / math.sqrt(diff.size))
    bound = 2.0 * dist.var / C
    return CheckReport(
        name=f"clip-bias/{dist.kind}/mean={dist.mean:g}/C={C:g}",
        passed=bool(abs(est) <= bound + SIGMA_SLACK * se),
        estimate=abs(est),
        bound=bound,
        stderr=se,
        details={"kind": dist.kind, "mean": dist.mean, "var": dist.var, "C": C, "n_samples": int(n_samples)},
    )


def clip_bias_grid(n_samples=1_000_000, seed=0):
    """Every law at every clip level in :data:`CLIP_LEVELS` and mean shift in :data:`MEAN_FRACTIONS`."""
    reports = []
    for j, (kind, C, frac) in enumerate(
        (k, c, f) for k in DISTRIBUTIONS for c in CLIP_LEVELS for f in MEAN_FRACTIONS
    ):
        dist = DistSpec(kind, loc=frac * C / 2, scale=1.0)
        reports.append(check_clip_bias(dist, C, n_samples, seed=seed + j))
    return reports


def _random_margins(model, rng, n):
    if model.kind == SQUARED:
        z = rng.uniform(-10, 10, n)
        y = rng.uniform(-10, 10, n)
        # include exact minimizers
        y[: min(n, 10)] = z[: min(n, 10)]
    else:
        z = rng.uniform(-30, 30, n)
        y = rng.choice([-1.0, 1.0], n)
    return z, y


def check_self_bounding(model, n_points=10_000, seed=0):
    """Largest ``|l'(z, y)| - sqrt(4 beta l(z, y))`` over random points; passes at <= 1e-9."""
    rng = np.random.default_rng(seed)
    z, y = _random_margins(model, rng, int(n_points))
    worst = -np.inf
    for zi, yi in zip(z, y):
        gap = abs(loss_derivative(model, zi, yi)) - math.sqrt(4.0 * model.beta_scalar * loss(model, zi, yi))
        worst = max(worst, gap)
    return CheckReport(
        name=f"self-bounding/{model.kind}",
        passed=bool(worst <= SELF_BOUND_TOL),
        estimate=float(worst),
        bound=SELF_BOUND_TOL,
        details={"n_points": int(n_points)},
    )


def _fd_gradient(model, w, x, y, h=FD_STEP):
    g = np.empty_like(w)
    for i in range(w.shape[0]):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (loss(model, float((w + e) @ x), y) - loss(model, float((w - e) @ x), y)) / (2 * h)
    return g


def check_gradient_fd(model, n_points=1000, dim=5, seed=0):
    """Central finite differences against :func:`loss_grad` at random points.

    The error is relative to ``||grad||`` when that exceeds 1e-6 and
    absolute otherwise (tolerances 1e-6 and 1e-9).
    """
    rng = np.random.default_rng(seed)
    worst_rel = 0.0
    worst_abs = 0.0
    for _ in range(int(n_points)):
        w = rng.uniform(-2, 2, dim)
        # uniform in the unit ball; with a fixed step, norms near zero only
        # measure rounding in the difference quotient
        x = rng.standard_normal(dim)
        x *= rng.random() ** (1.0 / dim) / np.linalg.norm(x)
        y = rng.uniform(-2, 2) if model.kind == SQUARED else float(rng.choice([-1.0, 1.0]))
        g = loss_grad(model, w, x, y)
        err = float(np.linalg.norm(_fd_gradient(model, w, x, y) - g))
        scale = float(np.linalg.norm(g))
        if scale > 1e-6:
            worst_rel = max(worst_rel, err / scale)
        else:
            worst_abs = max(worst_abs, err)
    return CheckReport(
        name=f"grad-fd/{model.kind}",
        passed=bool(worst_rel <= FD_REL_TOL and worst_abs <= FD_ABS_TOL),
        estimate=worst_rel,
        bound=FD_REL_TOL,
        details={"max_abs_error_near_zero": worst_abs, "n_points": int(n_points), "step": FD_STEP},
    )


@dataclass
class StageDiagnostics:
    """Thinned estimates of the per-stage decomposition and their checks."""

    k: int
    thin: int
    n_points: int
    n_fresh: int
    W_k: float
    W_thin: float
    D_k: float
    E_k: float
    V_k: float
    sigma_sq: float
    se_D: float
    se_E: float
    se_sigma_sq: float
    E_bound: float
    sigma_bound: float
    max_abs_d: float
    d_bound: float
    max_clip_ratio: float
    checks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def compute_stage_diagnostics(result, k, instance, n_fresh=DEFAULT_FRESH, thin=None):
    """Replay stage ``k`` of a target-risk run and estimate its decomposition.

    Raises
    ------
    PreconditionError
        For non-squared losses (no closed-form mean gradient).
    ValueError
        If the trace cannot be replayed.
    """
    if instance.loss.kind != SQUARED:
        raise PreconditionError("stage diagnostics need the squared loss")
    t1 = int(result.params["derived"]["t1"])
    thin = diagnostic_thin(t1) if thin is None else int(thin)
    state, params, diag = replay_stage(result, k, instance, thin=thin)
    eps_prior = float(result.params["config"]["eps_prior"])
    d = instance.dim
    gamma, delta = state.gamma_k, state.delta_k
    kernel = _kernels.moments_kernel(d)
    k0, k1 = _rng.stream_key(instance.seed, result.stream)

    n = diag.rec_positions.shape[0]
    weights = np.full(n, float(thin))
    weights[-1] = t1 - thin * (n - 1)
    D = E = S2 = Wt = 0.0
    var_E = var_S2 = var_thin_D = 0.0
    max_abs_d = 0.0
    max_clip = 0.0
    for j in range(n):
        w = diag.rec_iterates[j]
        u = w - instance.w_star
        mean_g = instance.cov_eigs * u
        base = int(diag.rec_positions[j]) * int(n_fresh)
        _, mean_p, var_p, m4_p = kernel(
            k0, k1, base, int(n_fresh), instance.scale, instance.w_gen,
            instance.noise_sigma, instance.loss.code, w, instance.w_star, gamma,
        )
        d_j = mean_p - float(diag.rec_clipped[j] @ u)
        e_j = float(mean_g @ u) - mean_p
        wt = weights[j]
        D += wt * d_j
        E += wt * e_j
        S2 += wt * var_p
        Wt += wt * float(u @ u)
        var_E += wt**2 * var_p / n_fresh
        var_S2 += wt**2 * max(m4_p - var_p**2, 0.0) / n_fresh
        # one recorded increment stands in for ``wt`` of them
        var_thin_D += wt * (wt - 1) * var_p
        max_abs_d = max(max_abs_d, abs(d_j))
        max_clip = max(max_clip, float(np.max(2.0 * np.abs(mean_g))) / gamma)

    se_E = math.sqrt(var_E)
    se_D = math.sqrt(var_E + var_thin_D)
    se_S2 = math.sqrt(var_S2)
    E_bound = 4.0 * t1 / params.xi * eps_prior + 4.0 * params.beta / params.xi * Wt
    sigma_bound = d * gamma**2 * Wt
    d_bound = 2.0 * math.sqrt(d) * gamma * delta
    checks = {
        "lemma_E": bool(E <= E_bound + SIGMA_SLACK * se_E),
        "sigma_sq": bool(S2 <= sigma_bound + SIGMA_SLACK * se_S2),
        "increment": bool(max_abs_d <= d_bound),
        "clip_valid": bool(max_clip <= 1.0),
        "W_le_4R2T1": bool(diag.W <= 4.0 * params.radius_R**2 * t1),
        "confined": bool(diag.max_violation <= 1e-10),
    }
    return StageDiagnostics(
        k=k, thin=thin, n_points=n, n_fresh=int(n_fresh),
        W_k=diag.W, W_thin=Wt, D_k=D, E_k=E, V_k=D + E, sigma_sq=S2,
        se_D=se_D, se_E=se_E, se_sigma_sq=se_S2,
        E_bound=E_bound, sigma_bound=sigma_bound,
        max_abs_d=max_abs_d, d_bound=d_bound, max_clip_ratio=max_clip,
        checks=checks,
    )


def diagnose_run(result, instance, n_fresh=DEFAULT_FRESH):
    """Diagnostics for every stage; also stored in ``result.diagnostics``."""
    m = int(result.params["derived"]["m"])
    out = [compute_stage_diagnostics(result, k, instance, n_fresh) for k in range(1, m + 1)]
    result.diagnostics = [s.to_dict() for s in out]
    return out


def run_suite(suite="all", seed=0, n_samples=1_000_000):
    """Run a verification suite and return its JSON-ready report."""
    if suite not in SUITES:
        raise InvalidConfigError(f"suite must be one of {SUITES}, got {suite!r}")
    models = (LossModel(SQUARED), LossModel(LOGISTIC_L2, 0.01))
    reports = []
    if suite in ("clip", "all"):
        reports += clip_bias_grid(n_samples=n_samples, seed=seed)
    if suite in ("selfbound", "all"):
        reports += [check_self_bounding(m, seed=seed) for m in models]
    if suite in ("grad", "all"):
        reports += [check_gradient_fd(m, seed=seed) for m in models]
    return {
        "suite": suite,
        "seed": seed,
        "passed": all(r.passed for r in reports),
        "checks": [r.to_dict() for r in reports],
    }


def report_json(report):
    return json.dumps(report, indent=2, allow_nan=False)

