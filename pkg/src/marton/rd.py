"""Rate-distortion function by slope-parameterized Blahut-Arimoto.

For a slope ``nu >= 0`` the inner problem

    F(nu) = min_{p_Y} -sum_x q(x) log sum_y p_Y(y) exp(-nu d(x, y))

is solved by alternating minimization. ``R(Delta)`` is the upper envelope of
the lines ``F(nu) - nu * Delta``; :func:`rate_distortion` finds the touching
slope by bisection on the monotone map ``nu -> Delta(nu)``.

The ``*_batch`` variants run many independent problems in lockstep (one row
per problem). Rows never interact, so a batch gives the same answers as the
corresponding scalar calls.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import Distortion, Distribution, InfoValue, check_compatible
from .errors import DomainError, NonConvergenceWarning

EPS = 1e-10
MAX_ITR = 20000
TOL_DELTA = 1e-6
P_FLOOR = 1e-300


@dataclass(frozen=True)
class RdPoint:
    slope: float
    distortion: float
    rate: InfoValue
    p_y: Distribution
    objective: float
    iterations: int
    converged: bool
    history: list[float] | None = field(default=None, repr=False)


def _ba_batch(q, d: Distortion, nus, eps=EPS, max_itr=MAX_ITR, history=False):
    """Blahut-Arimoto for rows ``q[l]`` at slopes ``nus[l]``.

    Returns ``(p, F, Delta, iterations, converged, hist)`` with one entry per
    row. ``hist`` is the per-iteration objective trace of row 0 when requested.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    nus = np.broadcast_to(np.asarray(nus, dtype=float), q.shape[:1]).copy()
    n = q.shape[0]
    K = d.kernel(nus)  # (L, X, Y)
    DK = d.distortion_kernel(nus)
    p = np.tile(d.initial_output(), (n, 1))
    iters = np.zeros(n, dtype=int)
    converged = np.zeros(n, dtype=bool)
    active = np.arange(n)
    trace = [] if history else None

    def objective(Ka, qa, pa):
        A = np.einsum("lxy,ly->lx", Ka, pa)
        with np.errstate(divide="ignore", invalid="ignore"):
            F = -np.sum(np.where(qa > 0, qa * np.log(A), 0.0), axis=1)
        return A, F

    A, F = objective(K, q, p)
    if trace is not None:
        trace.append(float(F[0]))
    for _ in range(max_itr):
        if active.size == 0:
            break
        Ka, qa, pa = K[active], q[active], p[active]
        Aa = A[active]
        pn = pa * np.einsum("lx,lxy->ly", qa / Aa, Ka)
        pn = np.maximum(pn / pn.sum(axis=1, keepdims=True), P_FLOOR)
        pn /= pn.sum(axis=1, keepdims=True)
        An, Fn = objective(Ka, qa, pn)
        iters[active] += 1
        done = np.abs(F[active] - Fn) < eps
        p[active], A[active], F[active] = pn, An, Fn
        if trace is not None and 0 in active:
            trace.append(float(Fn[0]))
        converged[active[done]] = True
        active = active[~done]

    # Induced joint q(x) p(y) K(x, y) / A(x).
    delta = np.einsum("lx,lxy,ly->l", q / A, DK, p)
    # At nu = 0 every output is optimal; report the nu -> 0+ limit, which
    # puts all mass on the best constant reproduction.
    flat = np.nonzero(nus == 0.0)[0]
    if flat.size:
        cols = q[flat] @ DK[flat[0]]
        best = np.argmin(cols, axis=1)
        p[flat] = 0.0
        p[flat, best] = 1.0
        delta[flat] = cols[np.arange(flat.size), best]
    return p, F, delta, iters, converged, trace


def rd_fixed_slope(
    q_x,
    d: Distortion,
    nu: float,
    eps: float = EPS,
    max_itr: int = MAX_ITR,
    history: bool = False,
) -> RdPoint:
    """Solve the inner problem at slope ``nu``.

    The returned rate is ``F(nu) - nu * Delta(nu)``, which is the mutual
    information of the optimal test channel.
    """
    qa = check_compatible(q_x, d)
    if nu < 0:
        raise DomainError(f"slope must be nonnegative, got {nu}")
    if eps <= 0:
        raise DomainError("eps must be positive")
    p, F, delta, iters, conv, trace = _ba_batch(qa[None], d, [nu], eps, max_itr, history)
    if not conv[0]:
        warnings.warn(f"Blahut-Arimoto did not converge at nu={nu}", NonConvergenceWarning, stacklevel=2)
    rate = max(float(F[0] - nu * delta[0]), 0.0)
    return RdPoint(
        slope=float(nu),
        distortion=float(delta[0]),
        rate=InfoValue(rate),
        p_y=Distribution(p[0]),
        objective=float(F[0]),
        iterations=int(iters[0]),
        converged=bool(conv[0]),
        history=trace,
    )


def rate_distortion_batch(
    q,
    d: Distortion,
    delta: float,
    tol_delta: float = TOL_DELTA,
    eps: float = EPS,
    max_itr: int = MAX_ITR,
    nu_cap: float = 2.0**30,
):
    """``R(delta | q[l])`` for every row of ``q``.

    Returns ``(rates, nu_star, converged)`` as arrays.
    """
    if delta < 0:
        raise DomainError(f"distortion level must be nonnegative, got {delta}")
    if tol_delta <= 0:
        raise DomainError("tol_delta must be positive")
    q = np.atleast_2d(np.asarray(q, dtype=float))
    n = q.shape[0]
    dmax = np.min(q @ d.distortion_kernel(0.0), axis=1)
    rates = np.zeros(n)
    nu_star = np.zeros(n)
    ok = np.ones(n, dtype=bool)
    todo = np.nonzero(delta < dmax)[0]
    if todo.size == 0:
        return rates, nu_star, ok

    def solve(rows, nus):
        _, F, dl, _, conv, _ = _ba_batch(q[rows], d, nus, eps, max_itr)
        ok[rows] &= conv
        return F, dl

    lo = np.zeros(todo.size)
    hi = np.ones(todo.size)
    F_hi, D_hi = solve(todo, hi)
    grow = D_hi > delta + tol_delta
    while grow.any():
        idx = np.nonzero(grow)[0]
        lo[idx] = hi[idx]
        hi[idx] *= 2.0
        F_hi[idx], D_hi[idx] = solve(todo[idx], hi[idx])
        grow[idx] = D_hi[idx] > delta + tol_delta
        capped = grow & (hi >= nu_cap)
        ok[todo[capped]] = False
        grow &= ~capped

    nu = hi.copy()
    F_nu = F_hi.copy()
    D_nu = D_hi.copy()
    active = np.abs(D_hi - delta) > tol_delta
    while active.any():
        idx = np.nonzero(active)[0]
        mid = 0.5 * (lo[idx] + hi[idx])
        F_mid, D_mid = solve(todo[idx], mid)
        nu[idx], F_nu[idx], D_nu[idx] = mid, F_mid, D_mid
        hit = np.abs(D_mid - delta) <= tol_delta
        above = D_mid > delta
        lo[idx[above & ~hit]] = mid[above & ~hit]
        hi[idx[~above & ~hit]] = mid[~above & ~hit]
        # A flat stretch of R(Delta) is one slope covering a range of Delta;
        # once the bracket collapses any nu in it is the touching slope.
        tiny = hi[idx] - lo[idx] <= 1e-13 * np.maximum(1.0, hi[idx])
        active[idx[hit | tiny]] = False

    rates[todo] = np.maximum(F_nu - nu * delta, 0.0)
    nu_star[todo] = nu
    return rates, nu_star, ok


def rate_distortion(
    q_x,
    d: Distortion,
    delta: float,
    tol_delta: float = TOL_DELTA,
    eps: float = EPS,
    max_itr: int = MAX_ITR,
) -> tuple[InfoValue, float]:
    """Rate-distortion function ``R(delta | q_x)`` in nats and its slope ``nu*``."""
    qa = check_compatible(q_x, d)
    rates, nus, ok = rate_distortion_batch(qa, d, delta, tol_delta, eps, max_itr)
    if not ok[0]:
        warnings.warn(f"rate_distortion did not fully converge at delta={delta}", NonConvergenceWarning, stacklevel=2)
    return InfoValue(rates[0]), float(nus[0])


def rd_uniform_closed_form(m: int, delta: float, scale: float = 1.0) -> InfoValue:
    """``R(delta)`` of a uniform source on ``m`` symbols under ``scale`` x Hamming."""
    if m < 2:
        raise DomainError("need at least two symbols")
    if scale <= 0:
        raise DomainError("scale must be positive")
    t = delta / scale
    if t < 0:
        raise DomainError(f"distortion level must be nonnegative, got {delta}")
    if t >= (m - 1) / m:
        return InfoValue(0.0)
    h = 0.0 if t == 0 else -t * math.log(t) - (1 - t) * math.log1p(-t)
    return InfoValue(max(math.log(m) - h - t * math.log(m - 1), 0.0))

