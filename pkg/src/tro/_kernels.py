"""Jitted inner loops.

Examples come either from the synthetic oracle (``src == 0``, drawn by
stream position) or from arrays (``src == 1``, row ``position``). Unused
array arguments are passed with zero rows.

Each kernel is built per dimension: with ``d`` a compile-time constant the
coordinate loops unroll and a step runs about twice as fast. Builds are
memoized in-process and cached on disk by numba.
"""

from functools import lru_cache

import numpy as np
from numba import njit

from . import _rng
from .losses import _clip, _dloss
from .synthdata import _draw_into
from .vectorspace import DYKSTRA_MAX_ITER, DYKSTRA_TOL, EXACT, _dist, _project_ball_into, _project_intersection_into

SRC_ORACLE = 0
SRC_ARRAYS = 1

STEP_INVERSE_T = 0
STEP_CONSTANT = 1


def empty_rows(dim):
    return np.empty((0, dim))


def empty_index():
    return np.empty(0, dtype=np.int64)


@njit(cache=True, inline="always")
def _example(src, X, Y, k0, k1, pos, amp, w_gen, noise, kind, ubuf, x):
    if src == 0:
        return _draw_into(k0, k1, pos, _rng.TAG_TRAIN, amp, w_gen, noise, kind, ubuf, x)
    for i in range(x.shape[0]):
        x[i] = X[pos, i]
    return Y[pos]


@lru_cache(maxsize=None)
def stage_kernel(d):
    """Clipped projected SGD over one stage, for dimension ``d``.

    Signature::

        kernel(src, X, Y, k0, k1, start, amp, w_gen, noise, kind, lam,
               w_hat, delta_k, radius, T1, eta, gamma, w_star,
               thin, rec_pos, rec_w, rec_v, traj)

    Returns ``(status, steps_done, average, last_iterate, W, max_violation,
    n_clipped)``. ``W`` sums ``||w_t - w_star||^2`` over the pre-update
    iterates, which are also the ones averaged. Every ``thin``-th step (when
    ``thin > 0``) the iterate, position and clipped gradient go to the
    ``rec_*`` arrays; ``traj`` (if it has rows) receives every iterate.
    """
    d = int(d)

    @njit(cache=True)
    def kernel(
        src, X, Y, k0, k1, start, amp, w_gen, noise, kind, lam,
        w_hat, delta_k, radius, T1, eta, gamma, w_star,
        thin, rec_pos, rec_w, rec_v, traj,
    ):
        origin = np.zeros(d)
        w = w_hat.copy()
        total = np.zeros(d)
        x = np.empty(d)
        v = np.empty(d)
        cand = np.empty(d)
        ubuf = np.empty(d + 2)
        W = 0.0
        max_viol = -np.inf
        n_clipped = 0
        n_rec = 0
        keep_traj = traj.shape[0] > 0
        for t in range(T1):
            for i in range(d):
                total[i] += w[i]
                e = w[i] - w_star[i]
                W += e * e
            viol = max(_dist(w, w_hat) - delta_k, _dist(w, origin) - radius)
            if viol > max_viol:
                max_viol = viol
            if keep_traj:
                for i in range(d):
                    traj[t, i] = w[i]

            pos = start + t
            y = _example(src, X, Y, k0, k1, pos, amp, w_gen, noise, kind, ubuf, x)
            z = 0.0
            for i in range(d):
                z += w[i] * x[i]
            g = _dloss(kind, z, y)
            for i in range(d):
                gi = g * x[i]
                vi = _clip(gi, gamma)
                if vi != gi:
                    n_clipped += 1
                v[i] = vi

            if thin > 0 and t % thin == 0:
                rec_pos[n_rec] = pos
                for i in range(d):
                    rec_w[n_rec, i] = w[i]
                    rec_v[n_rec, i] = v[i]
                n_rec += 1

            # the deterministic l2 term is added after clipping
            if lam != 0.0:
                for i in range(d):
                    v[i] += lam * w[i]
            for i in range(d):
                cand[i] = w[i] - eta * v[i]
            if _dist(cand, w_hat) <= delta_k and _dist(cand, origin) <= radius:
                for i in range(d):
                    w[i] = cand[i]
                continue
            status, _ = _project_intersection_into(
                cand, origin, radius, w_hat, delta_k, EXACT, DYKSTRA_TOL, DYKSTRA_MAX_ITER, w
            )
            if status != 0:
                return status, t + 1, total / (t + 1), w, W, max_viol, n_clipped
        return 0, T1, total / T1, w, W, max_viol, n_clipped

    return kernel


@lru_cache(maxsize=None)
def sgd_kernel(d):
    """Unclipped SGD projected on the origin ball, for dimension ``d``.

    Signature::

        kernel(src, X, Y, k0, k1, start, amp, w_gen, noise, kind, lam,
               w0, radius, n_steps, step_kind, step_c, alpha,
               marks, prefix, finals, traj)

    Step size is ``step_c / (alpha * t)`` for t = 1, 2, ... or the constant
    ``step_c``. For each sorted step count in ``marks`` the sum of the
    post-update iterates so far goes to ``prefix`` and the current iterate
    to ``finals``. ``traj`` (if it has rows) receives every pre-update
    iterate. Returns ``(last_iterate, sum_of_iterates)``.
    """
    d = int(d)

    @njit(cache=True)
    def kernel(
        src, X, Y, k0, k1, start, amp, w_gen, noise, kind, lam,
        w0, radius, n_steps, step_kind, step_c, alpha, marks, prefix, finals, traj,
    ):
        origin = np.zeros(d)
        w = w0.copy()
        total = np.zeros(d)
        x = np.empty(d)
        cand = np.empty(d)
        ubuf = np.empty(d + 2)
        n_marks = marks.shape[0]
        j = 0
        keep_traj = traj.shape[0] > 0
        for t in range(n_steps):
            while j < n_marks and marks[j] == t:
                for i in range(d):
                    prefix[j, i] = total[i]
                    finals[j, i] = w[i]
                j += 1
            if keep_traj:
                for i in range(d):
                    traj[t, i] = w[i]
            pos = start + t
            y = _example(src, X, Y, k0, k1, pos, amp, w_gen, noise, kind, ubuf, x)
            z = 0.0
            for i in range(d):
                z += w[i] * x[i]
            g = _dloss(kind, z, y)
            if step_kind == 0:
                eta = step_c / (alpha * (t + 1))
            else:
                eta = step_c
            for i in range(d):
                vi = g * x[i]
                if lam != 0.0:
                    vi += lam * w[i]
                cand[i] = w[i] - eta * vi
            _project_ball_into(cand, origin, radius, w)
            for i in range(d):
                total[i] += w[i]
        while j < n_marks and marks[j] == n_steps:
            for i in range(d):
                prefix[j, i] = total[i]
                finals[j, i] = w[i]
            j += 1
        return w, total

    return kernel


@lru_cache(maxsize=None)
def moments_kernel(d):
    """Monte-Carlo moments of the clipped gradient at a fixed iterate.

    Signature::

        kernel(k0, k1, base, n, amp, w_gen, noise, kind, w, w_star, gamma)

    Draws ``n`` examples at positions ``base .. base+n-1`` under the
    fresh-sample tag. Returns ``(mean_v, mean_p, var_p, m4_p)`` where
    ``p = <v, w - w_star>``, ``v`` is the clipped gradient and ``m4_p`` is
    the fourth central moment of ``p``.
    """
    d = int(d)

    @njit(cache=True)
    def kernel(k0, k1, base, n, amp, w_gen, noise, kind, w, w_star, gamma):
        x = np.empty(d)
        ubuf = np.empty(d + 2)
        mean_v = np.zeros(d)
        proj = np.empty(n)
        for s in range(n):
            y = _draw_into(k0, k1, base + s, _rng.TAG_FRESH, amp, w_gen, noise, kind, ubuf, x)
            z = 0.0
            for i in range(d):
                z += w[i] * x[i]
            g = _dloss(kind, z, y)
            p = 0.0
            for i in range(d):
                vi = _clip(g * x[i], gamma)
                mean_v[i] += vi
                p += vi * (w[i] - w_star[i])
            proj[s] = p
        for i in range(d):
            mean_v[i] /= n
        mean_p = 0.0
        for s in range(n):
            mean_p += proj[s]
        mean_p /= n
        m2 = 0.0
        m4 = 0.0
        for s in range(n):
            c = proj[s] - mean_p
            m2 += c * c
            m4 += c * c * c * c
        var_p = m2 / (n - 1) if n > 1 else 0.0
        return mean_v, mean_p, var_p, m4 / n

    return kernel
