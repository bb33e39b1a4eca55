"""Ahlswede's two-block counterexample and its exact Marton exponent.

The source alphabet is ``X_A`` (size ``m_A``) followed by ``X_B`` (size
``m_B``), reproduced on the same alphabet. Distortion is 0 on the diagonal,
1 between distinct symbols of ``X_A``, ``a`` between distinct symbols of
``X_B`` and ``b`` across blocks. ``Q_lam`` puts mass ``lam`` uniformly on
``X_A`` and ``1 - lam`` uniformly on ``X_B``.

Every distribution in the ``Q_lam`` family is uniform within blocks, so all
rate-distortion solves here run on the two-class lumped kernel; the full
matrix is still available for cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import (
    Distribution,
    DistortionMatrix,
    LumpedDistortion,
    binary_divergence,
)
from .errors import DomainError, NotBimodal
from .exponents import Curve
from .rd import EPS, MAX_ITR, TOL_DELTA, _ba_batch, rate_distortion_batch, rd_uniform_closed_form

DEFAULT_B = 10.0


def solve_params(size_a: int, size_b: int) -> tuple[float, float]:
    """``(delta, a)`` with ``delta / a = 1 - delta`` and equal block rates.

    The rate condition is
    ``log m_A - delta log(m_A - 1) = log m_B - (1 - delta) log(m_B - 1)``,
    which is linear in ``delta``.
    """
    if size_a < 2 or size_b < 2:
        raise DomainError("block sizes must be at least 2")
    la, lb = math.log(size_a - 1), math.log(size_b - 1)
    if la + lb == 0.0:
        # Two binary blocks: the rate condition holds for every delta.
        raise DomainError("sizes (2, 2) leave delta undetermined")
    delta = (math.log(size_a) - math.log(size_b) + lb) / (la + lb)
    if not 0.0 < delta < 1.0:
        raise DomainError(f"sizes ({size_a}, {size_b}) give delta={delta} outside (0, 1)")
    return delta, delta / (1.0 - delta)


@dataclass(frozen=True)
class AhlswedeInstance:
    size_a: int
    size_b: int
    a: float
    b: float
    delta: float
    xi: float

    def __post_init__(self):
        if self.size_a < 2 or self.size_b < 2:
            raise DomainError("block sizes must be at least 2")
        if not 0.0 < self.a < 1.0:
            raise DomainError(f"a={self.a} outside (0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise DomainError(f"delta={self.delta} outside (0, 1)")
        if not 0.0 < self.xi < 1.0:
            raise DomainError(f"xi={self.xi} outside (0, 1)")
        if not self.b > max(1.0, self.a):
            raise DomainError(f"b={self.b} must exceed max(1, a)")

    @property
    def n(self) -> int:
        return self.size_a + self.size_b

    @cached_property
    def d(self) -> DistortionMatrix:
        ma, n = self.size_a, self.n
        v = np.full((n, n), self.b)
        v[:ma, :ma] = 1.0
        v[ma:, ma:] = self.a
        np.fill_diagonal(v, 0.0)
        return DistortionMatrix(v)

    @cached_property
    def lumped(self) -> LumpedDistortion:
        ma, mb = self.size_a, self.size_b
        levels = np.zeros((2, 2, 2))
        counts = np.zeros((2, 2, 2))
        levels[0, 0], counts[0, 0] = (0.0, 1.0), (1, ma - 1)
        levels[1, 1], counts[1, 1] = (0.0, self.a), (1, mb - 1)
        levels[0, 1, 0], counts[0, 1, 0] = self.b, mb
        levels[1, 0, 0], counts[1, 0, 0] = self.b, ma
        return LumpedDistortion(levels, counts, [ma, mb], [ma, mb])

    @property
    def source(self) -> Distribution:
        """``P = Q_xi`` on the full alphabet."""
        return q_lambda(self, self.xi)

    @property
    def source_classes(self) -> np.ndarray:
        return np.array([self.xi, 1.0 - self.xi])

    def rate(self, lam) -> np.ndarray:
        """``R(delta | Q_lam)`` in nats for a scalar or array of weights."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        r, _, _ = rate_distortion_batch(np.c_[lam, 1.0 - lam], self.lumped, self.delta, TOL_DELTA, EPS, MAX_ITR)
        return r


def build_instance(size_a: int, size_b: int, xi: float, b: float = DEFAULT_B) -> AhlswedeInstance:
    delta, a = solve_params(size_a, size_b)
    return AhlswedeInstance(size_a, size_b, a, b, delta, xi)


def instance_1(b: float = DEFAULT_B) -> AhlswedeInstance:
    return build_instance(8, 512, 0.01, b)


def instance_2(b: float = DEFAULT_B) -> AhlswedeInstance:
    return build_instance(50, 2500, 0.2, b)


def q_lambda(inst: AhlswedeInstance, lam: float) -> Distribution:
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda={lam} outside [0, 1]")
    p = np.r_[np.full(inst.size_a, lam / inst.size_a), np.full(inst.size_b, (1.0 - lam) / inst.size_b)]
    return Distribution(p / p.sum())


def closed_form_endpoints(inst: AhlswedeInstance) -> tuple[float, float]:
    """``(R(delta | Q_A), R(delta | Q_B))`` in nats from the uniform formulas."""
    return (
        float(rd_uniform_closed_form(inst.size_a, inst.delta, 1.0)),
        float(rd_uniform_closed_form(inst.size_b, inst.delta, inst.a)),
    )


def cross_block_mass(inst: AhlswedeInstance, lam: float) -> float:
    """Probability that the optimal test channel at ``Q_lam`` crosses blocks."""
    q = np.array([[lam, 1.0 - lam]])
    _, nu, _ = rate_distortion_batch(q, inst.lumped, inst.delta)
    p, _, _, _, _, _ = _ba_batch(q, inst.lumped, nu)
    K = inst.lumped.kernel(nu[0])
    A = K @ p[0]
    joint = q[0][:, None] * p[0][None, :] * K / A[:, None]
    return float(joint[0, 1] + joint[1, 0])


# ---------------------------------------------------------------------------
# Sweeps and the exact exponent
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LambdaSweep:
    curve: Curve
    maxima: list[int]
    lambda_star: float
    lambda_1: float | None

    @property
    def lam(self) -> np.ndarray:
        return self.curve.x

    @property
    def rate(self) -> np.ndarray:
        return self.curve.y


def local_maxima(y: np.ndarray) -> list[int]:
    """Interior strict local maxima; a flat top counts once, at its left edge."""
    out = []
    n = y.size
    k = 1
    while k < n - 1:
        if y[k] > y[k - 1]:
            e = k
            while e + 1 < n and y[e + 1] == y[k]:
                e += 1
            if e + 1 < n and y[e + 1] < y[k]:
                out.append(k)
            k = e + 1
        else:
            k += 1
    return out


def rd_lambda_sweep(inst: AhlswedeInstance, n_lambda: int = 2001, extra=()) -> LambdaSweep:
    """``R(delta | Q_lam)`` on ``n_lambda`` evenly spaced weights in [0, 1].

    ``lambda_star`` is the global maximizer; ``lambda_1`` the best of the
    other local maxima, or None when the curve is unimodal.
    """
    if n_lambda < 3:
        raise DomainError("need at least three sweep points")
    lam = np.unique(np.r_[np.linspace(0.0, 1.0, n_lambda), np.asarray(extra, dtype=float)])
    rates = inst.rate(lam)
    curve = Curve(lam, rates, "RD-of-lambda", meta={"delta": inst.delta, "xi": inst.xi})
    maxima = local_maxima(rates)
    k_star = int(np.argmax(rates))
    others = [k for k in maxima if k != k_star]
    k1 = max(others, key=lambda k: rates[k]) if others else None
    return LambdaSweep(curve, maxima, float(lam[k_star]), None if k1 is None else float(lam[k1]))


def marton_exact(inst: AhlswedeInstance, n_lambda: int = 2001, sweep: LambdaSweep | None = None) -> Curve:
    """Exact Marton exponent ``E_M(R)`` of the mixture family, in nats.

    Pairs ``(R_i, D_2(lam_i || xi))`` are sorted by rate and replaced by
    suffix minima of the divergence; ``(0, 0)`` is prepended so the curve
    covers ``0 <= R <= R(delta | Q_xi)`` with ``E = 0``.
    """
    if sweep is None:
        sweep = rd_lambda_sweep(inst, n_lambda, extra=[inst.xi])
    lam, rates = sweep.lam, sweep.rate
    div = np.array([binary_divergence(float(t), inst.xi) for t in lam])
    order = np.argsort(rates, kind="stable")
    r_sorted = rates[order]
    e_sorted = np.minimum.accumulate(div[order][::-1])[::-1]
    # Equal rates keep the first (smallest) suffix minimum.
    r_unique, first = np.unique(r_sorted, return_index=True)
    e_unique = e_sorted[first]
    if r_unique[0] > 0:
        r_unique = np.r_[0.0, r_unique]
        e_unique = np.r_[0.0, e_unique]
    return Curve(r_unique, e_unique, "E_M-of-R", meta={"delta": inst.delta, "xi": inst.xi})


def exact_jump(curve: Curve) -> tuple[float, float, float]:
    """The largest vertical gap of an exact ``E_M(R)`` curve: ``(R, E_low, E_high)``."""
    gaps = np.diff(curve.y)
    k = int(np.argmax(gaps))
    return float(curve.x[k]), float(curve.y[k]), float(curve.y[k + 1])


def oracle_inverse(curve: Curve, E: float) -> float:
    """``R_M(E) = max {R : E_M(R) <= E}`` from an exact exponent curve."""
    ok = curve.y <= E + 1e-15
    return float(curve.x[ok].max())


def lambda2_crossing(inst: AhlswedeInstance, sweep: LambdaSweep, tol: float = 1e-10) -> float:
    """The weight past the valley where ``R(delta | Q_lam)`` climbs back to ``R(Q_lam_1)``."""
    if sweep.lambda_1 is None or len(sweep.maxima) < 2:
        raise NotBimodal("the sweep has a single local maximum")
    lam, r = sweep.lam, sweep.rate
    k1 = int(np.nonzero(lam == sweep.lambda_1)[0][0])
    ks = int(np.nonzero(lam == sweep.lambda_star)[0][0])
    lo_k, hi_k = sorted((k1, ks))
    kv = lo_k + int(np.argmin(r[lo_k : hi_k + 1]))
    target = r[k1]
    lo, hi = float(lam[kv]), float(lam[ks])
    f_lo = float(inst.rate(lo)[0]) - target
    if f_lo >= 0:
        raise NotBimodal("no valley between the two maxima")
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if float(inst.rate(mid)[0]) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
