"""Inverse exponents from a G-table, the Blahut exponent, and lattice oracles.

Both inverse exponents read the same landscape

    L[i, j] = -nu_j * delta + mu_i * E + g[i, j].

The inverse Marton exponent is ``max_j min_i L`` and the inverse Blahut
exponent is ``min_i max_j L``; on any finite matrix the first never exceeds
the second. At ``E = 0`` a table's ``mu -> inf`` row joins the minimum over
``i``; for ``E > 0`` that row is ``+inf`` and drops out.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Distortion, InfoValue, check_compatible, kl_divergence
from .errors import AlphabetTooLarge, ConfigurationError, DomainError, OutOfRange
from .gtable import GTable
from .rd import EPS, MAX_ITR, TOL_DELTA, rate_distortion_batch

KINDS = ("R_M-of-E", "R_B-of-E", "E_M-of-R", "E_B-of-R", "RD-of-lambda")
MAX_BRUTE_FORCE_ALPHABET = 4


@dataclass(frozen=True, eq=False)
class Curve:
    """Sampled curve ``y(x)`` with ``y`` in nats and optional ``(mu, nu)`` argopts.

    ``x`` is in nats as well, except for ``RD-of-lambda`` where it is the
    mixture weight. ``y`` may hold ``inf``.
    """

    x: np.ndarray
    y: np.ndarray
    kind: str
    arg: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown curve kind {self.kind!r}")
        x = np.array(self.x, dtype=float).ravel()
        y = np.array(self.y, dtype=float).ravel()
        if x.shape != y.shape:
            raise ConfigurationError("x and y differ in length")
        if np.any(np.diff(x) <= 0):
            raise ConfigurationError("curve abscissae must be strictly increasing")
        arg = None
        if self.arg is not None:
            arg = np.array(self.arg, dtype=float).reshape(x.size, 2)
            arg.setflags(write=False)
        for a in (x, y):
            a.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "arg", arg)

    def __len__(self) -> int:
        return self.x.size

    @property
    def y_bits(self) -> np.ndarray:
        return self.y / math.log(2)


def _check(delta: float, E: float) -> None:
    if delta < 0:
        raise DomainError(f"delta must be nonnegative, got {delta}")
    if E < 0:
        raise DomainError(f"E must be nonnegative, got {E}")


def marton_inverse(table: GTable, delta: float, E: float) -> tuple[InfoValue, tuple[float, float]]:
    """Grid value of the inverse Marton exponent and its ``(mu, nu)``.

    Ties go to the smallest nu index, then the smallest mu index.
    """
    _check(delta, E)
    L = table.landscape(delta, E)
    inner = L.min(axis=0)
    mu_at = table.mu[np.argmin(L, axis=0)]
    lim = table.limit_landscape(delta) if E == 0 else None
    if lim is not None:
        below = lim < inner
        inner = np.where(below, lim, inner)
        mu_at = np.where(below, math.inf, mu_at)
    j = int(np.argmax(inner))
    return InfoValue(inner[j]), (float(mu_at[j]), float(table.nu[j]))


def blahut_inverse(table: GTable, delta: float, E: float) -> tuple[InfoValue, tuple[float, float]]:
    """Grid value of the inverse Blahut exponent: the min-max of the landscape."""
    _check(delta, E)
    L = table.landscape(delta, E)
    inner = L.max(axis=1)
    i = int(np.argmin(inner))
    j = int(np.argmax(L[i]))
    lim = table.limit_landscape(delta) if E == 0 else None
    if lim is not None and lim.max() < inner[i]:
        j = int(np.argmax(lim))
        return InfoValue(lim[j]), (math.inf, float(table.nu[j]))
    return InfoValue(inner[i]), (float(table.mu[i]), float(table.nu[j]))


def _inverse_curve(fn, kind, table, delta, e_ticks):
    if delta <= 0:
        raise ConfigurationError("exponent curves need delta > 0")
    e = table.spec.e_ticks if e_ticks is None else np.asarray(e_ticks, dtype=float)
    ys, args = zip(*(fn(table, delta, float(E)) for E in e))
    return Curve(e, np.array(ys, dtype=float), kind, np.array(args), {"delta": delta})


def marton_inverse_curve(table: GTable, delta: float, e_ticks=None) -> Curve:
    return _inverse_curve(marton_inverse, "R_M-of-E", table, delta, e_ticks)


def blahut_inverse_curve(table: GTable, delta: float, e_ticks=None) -> Curve:
    return _inverse_curve(blahut_inverse, "R_B-of-E", table, delta, e_ticks)


def inverse_to_exponent(curve: Curve, r_query: float) -> float:
    """Smallest abscissa at which a non-decreasing ``R(E)`` reaches ``r_query``.

    Linear interpolation inside the bracketing segment. A flat stretch of
    ``R(E)`` is a jump of the exponent; a query at its level returns the
    left end.
    """
    if curve.kind not in ("R_M-of-E", "R_B-of-E"):
        raise ConfigurationError(f"expected an R-of-E curve, got {curve.kind}")
    x, y = curve.x, np.maximum.accumulate(curve.y)
    if not (y[0] <= r_query <= y[-1]):
        raise OutOfRange(f"R={r_query} outside the curve range [{y[0]}, {y[-1]}]")
    k = int(np.searchsorted(y, r_query, side="left"))
    if k == 0 or y[k] == r_query:
        return float(x[k])
    t = (r_query - y[k - 1]) / (y[k] - y[k - 1])
    return float(x[k - 1] + t * (x[k] - x[k - 1]))


def exponent_curve(curve: Curve, r_grid, jump_factor: float = 10.0) -> Curve:
    """Invert an ``R(E)`` curve onto ``r_grid``, flagging jumps of ``E(R)``.

    A jump is reported between consecutive R samples whose E values differ
    by more than ``jump_factor`` times the local E tick; both edges land in
    ``meta["jumps"]`` as ``(R_left, E_left, R_right, E_right)``. Rates at
    or below the curve's first value map to its first abscissa.
    """
    kind = {"R_M-of-E": "E_M-of-R", "R_B-of-E": "E_B-of-R"}[curve.kind]
    r = np.asarray(r_grid, dtype=float)
    # Rates below R(E = first tick) need no excess divergence at all.
    floor = float(curve.y[0])
    e = np.array([curve.x[0] if v <= floor else inverse_to_exponent(curve, float(v)) for v in r])
    tick = float(np.max(np.diff(curve.x))) if curve.x.size > 1 else 0.0
    jumps = []
    for k in range(1, r.size):
        if tick > 0 and e[k] - e[k - 1] > jump_factor * tick:
            jumps.append((float(r[k - 1]), float(e[k - 1]), float(r[k]), float(e[k])))
    meta = dict(curve.meta)
    meta["jumps"] = jumps
    return Curve(r, e, kind, None, meta)


def blahut_exponent(table: GTable, delta: float, R: float) -> InfoValue:
    """Blahut's exponent at rate ``R`` (nats) from the table's ``mu > 0`` rows.

    Uses ``min_p log sum_x P A^-rho = g / mu`` with ``rho = 1 / mu``, so
    ``E_B(R) = max(0, max_i (R - max_j [g_ij - nu_j delta]) / mu_i)``.
    """
    if delta < 0:
        raise DomainError(f"delta must be nonnegative, got {delta}")
    support = table.g - table.nu[None, :] * delta
    intercept = support.max(axis=1)  # rate-axis intercepts per slope
    r_max = float(intercept[0])
    if R < 0 or R > r_max + 1e-12:
        raise OutOfRange(f"R={R} outside [0, {r_max}]")
    pos = table.mu > 0
    values = (R - intercept[pos]) / table.mu[pos]
    return InfoValue(max(0.0, float(values.max()) if values.size else 0.0))


def blahut_exponent_curve(table: GTable, delta: float, r_grid) -> Curve:
    r = np.asarray(r_grid, dtype=float)
    return Curve(r, [blahut_exponent(table, delta, float(v)) for v in r], "E_B-of-R", meta={"delta": delta})


# ---------------------------------------------------------------------------
# Lattice oracles
# ---------------------------------------------------------------------------


def type_lattice(n: int, resolution: int) -> np.ndarray:
    """All distributions with entries ``k / resolution`` on ``n`` symbols."""
    if resolution < 1:
        raise ConfigurationError("resolution must be positive")
    pts = []
    for bars in itertools.combinations(range(resolution + n - 1), n - 1):
        edges = np.array((-1,) + bars + (resolution + n - 1,))
        pts.append(np.diff(edges) - 1)
    return np.array(pts, dtype=float) / resolution


def _lattice_candidates(p_x, d, resolution):
    pa = check_compatible(p_x, d)
    if pa.size > MAX_BRUTE_FORCE_ALPHABET:
        raise AlphabetTooLarge(f"|X|={pa.size} exceeds {MAX_BRUTE_FORCE_ALPHABET}")
    # P itself is always a candidate, whether or not it sits on the lattice.
    q = np.vstack([pa[None], type_lattice(pa.size, resolution)])
    div = np.array([kl_divergence(row, pa) for row in q])
    return q, div


def brute_force_marton_inverse(p_x, d: Distortion, delta: float, E: float, resolution: int = 200, **rd_kw) -> InfoValue:
    """Max of ``R(delta | q)`` over lattice points with ``D(q || P) <= E``."""
    _check(delta, E)
    q, div = _lattice_candidates(p_x, d, resolution)
    feasible = div <= E
    rates, _, _ = rate_distortion_batch(q[feasible], d, delta, **_rd_kwargs(rd_kw))
    return InfoValue(float(rates.max()))


def brute_force_marton_exponent(
    p_x, d: Distortion, delta: float, R: float, resolution: int = 200, chunk: int = 2048, **rd_kw
) -> InfoValue:
    """Min of ``D(q || P)`` over lattice points with ``R(delta | q) >= R``; inf if none."""
    if delta < 0:
        raise DomainError(f"delta must be nonnegative, got {delta}")
    q, div = _lattice_candidates(p_x, d, resolution)
    order = np.argsort(div, kind="stable")
    for start in range(0, order.size, chunk):
        idx = order[start : start + chunk]
        rates, _, _ = rate_distortion_batch(q[idx], d, delta, **_rd_kwargs(rd_kw))
        hit = np.nonzero(rates >= R)[0]
        if hit.size:
            return InfoValue(float(div[idx[hit]].min()))
    return InfoValue(math.inf)


def _rd_kwargs(kw):
    out = {"tol_delta": TOL_DELTA, "eps": EPS, "max_itr": MAX_ITR}
    out.update(kw)
    return out
