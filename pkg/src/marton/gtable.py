"""The two-parameter potential and its precomputed grid table.

For ``mu > 0``

    G(mu, nu; p_Y | P) = mu * log sum_x P(x) A(x) ** (-1 / mu),
    A(x) = sum_y p_Y(y) exp(-nu d(x, y)),

and at ``mu = 0`` it is ``-log min_x A(x)``. The table stores
``g[i, j] = min_{p_Y} G(mu_i, nu_j; p_Y | P)`` over a ``(mu, nu)`` grid: the
``mu = 0`` row comes from a linear program, every other row from Arimoto's
alternating iteration with ``rho = 1 / mu``.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .core import Distortion, Distribution, check_compatible
from .errors import AlphabetMismatch, ConfigurationError, DomainError, Infeasible, NonConvergenceWarning
from .lp import lp_simplex_solve
from .rd import _ba_batch

EPS = 1e-10
MAX_ITR = 20000
MU_LP_THRESHOLD = 1e-3
CHUNK = 16
WARM_MIX = 0.05
P_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Ticks of the ``(mu, nu)`` search grid and the E axis, natural units."""

    mu_ticks: np.ndarray
    nu_ticks: np.ndarray
    e_ticks: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 3.0, 301))

    def __post_init__(self):
        for name in ("mu_ticks", "nu_ticks", "e_ticks"):
            t = np.array(getattr(self, name), dtype=float).ravel()
            if t.size == 0:
                raise ConfigurationError(f"{name} is empty")
            if not np.all(np.isfinite(t)) or t[0] < 0:
                raise ConfigurationError(f"{name} must be finite and nonnegative")
            if np.any(np.diff(t) <= 0):
                raise ConfigurationError(f"{name} must be strictly increasing")
            t.setflags(write=False)
            object.__setattr__(self, name, t)
        if self.mu_ticks[0] != 0.0:
            raise ConfigurationError("mu_ticks must start at 0")
        if self.nu_ticks[0] != 0.0:
            raise ConfigurationError("nu_ticks must start at 0")
        if self.e_ticks[0] != 0.0:
            raise ConfigurationError("e_ticks must start at 0")

    @classmethod
    def uniform(
        cls,
        mu_max: float = 2.0,
        mu_steps: int = 128,
        nu_max: float = 50.0,
        nu_steps: int = 256,
        e_max: float = 3.0,
        e_steps: int = 301,
    ) -> "GridSpec":
        """Evenly spaced ticks from 0; ``*_steps`` counts ticks, endpoints included."""
        if min(mu_steps, nu_steps, e_steps) < 1:
            raise ConfigurationError("tick counts must be positive")
        return cls(
            np.linspace(0.0, mu_max, mu_steps),
            np.linspace(0.0, nu_max, nu_steps),
            np.linspace(0.0, e_max, e_steps),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.mu_ticks.size, self.nu_ticks.size

    def key(self) -> bytes:
        return b"".join(t.tobytes() for t in (self.mu_ticks, self.nu_ticks, self.e_ticks))


# ---------------------------------------------------------------------------
# The potential
# ---------------------------------------------------------------------------


def _log_potential_terms(nu, p_y, d: Distortion):
    """``log A(x)`` in a numerically safe way."""
    logK = d.log_kernel(nu)
    with np.errstate(divide="ignore"):
        return logsumexp(logK + np.log(p_y), axis=-1)


def _g_from_logA(mu, logA, logP, support):
    """Potential from ``log A``; ``logA`` may carry leading batch axes."""
    if mu == 0:
        return -np.min(np.where(support, logA, np.inf), axis=-1)
    return mu * logsumexp(np.where(support, logP - logA / mu, -np.inf), axis=-1)


def g_of_py(mu: float, nu: float, p_y, p_x, d: Distortion) -> float:
    """Evaluate the potential at a given reproduction distribution, in nats.

    Symbols with ``P(x) = 0`` are left out of the ``mu = 0`` minimum, which
    keeps the two branches continuous in ``mu``.
    """
    if mu < 0 or nu < 0:
        raise DomainError("mu and nu must be nonnegative")
    pa = check_compatible(p_x, d)
    py = np.asarray(p_y, dtype=float)
    if py.shape != (d.shape[1],):
        raise AlphabetMismatch(f"p_y has {py.size} symbols, distortion has {d.shape[1]} columns")
    logA = _log_potential_terms(nu, py, d)
    support = pa > 0
    with np.errstate(divide="ignore"):
        logP = np.log(pa)
    return float(_g_from_logA(mu, logA, logP, support))


# ---------------------------------------------------------------------------
# Arimoto iteration (mu > 0)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArimotoResult:
    p_y: Distribution
    g: float
    iterations: int
    converged: bool
    history: list[float] | None = field(default=None, repr=False)


def _arimoto_batch(rhos, nu, p_x, d: Distortion, p0=None, eps=EPS, max_itr=MAX_ITR, history=False):
    """Arimoto's iteration for every ``rho`` in ``rhos`` at a shared ``nu``.

    Returns ``(p, g, iterations, converged, trace)``; ``trace`` follows row 0.
    """
    rhos = np.asarray(rhos, dtype=float).ravel()
    n = rhos.size
    mus = 1.0 / rhos
    pa = np.asarray(p_x, dtype=float)
    support = pa > 0
    with np.errstate(divide="ignore"):
        logP = np.log(pa)
    K = d.kernel(nu)
    if p0 is None:
        p = np.tile(d.initial_output(), (n, 1))
    else:
        p = np.array(np.broadcast_to(p0, (n, d.shape[1])), dtype=float)
        p = np.maximum(p, P_FLOOR)
        p /= p.sum(axis=1, keepdims=True)

    def log_a(pp):
        # Every row has a zero-distortion column, so A(x) >= min p_Y > 0.
        return np.log(pp @ K.T)

    def potential(la, mu_rows):
        z = np.where(support, logP - la / mu_rows[:, None], -np.inf)
        return mu_rows * logsumexp(z, axis=-1)

    logA = log_a(p)
    g = potential(logA, mus)
    iters = np.zeros(n, dtype=int)
    conv = np.zeros(n, dtype=bool)
    active = np.arange(n)
    trace = [float(g[0])] if history else None
    for _ in range(max_itr):
        if active.size == 0:
            break
        r = rhos[active][:, None]
        la = logA[active]
        # q(y|x)^(1+rho) exp(rho nu d) collapses to p(y)^(1+rho) A(x)^-(1+rho) K(x,y).
        lw = np.where(support, logP - (1.0 + r) * la, -np.inf)
        lw -= lw.max(axis=1, keepdims=True)
        S = np.exp(lw) @ K
        with np.errstate(divide="ignore"):
            logS = np.log(S)
        logS -= logS.max(axis=1, keepdims=True)
        pn = p[active] * np.exp(logS / (1.0 + r))
        pn = np.maximum(pn / pn.sum(axis=1, keepdims=True), P_FLOOR)
        pn /= pn.sum(axis=1, keepdims=True)
        lan = log_a(pn)
        gn = potential(lan, mus[active])
        iters[active] += 1
        done = np.abs(gn - g[active]) < eps
        p[active], logA[active], g[active] = pn, lan, gn
        if trace is not None and active[0] == 0:
            trace.append(float(gn[0]))
        conv[active[done]] = True
        active = active[~done]
    return p, g, iters, conv, trace


def arimoto_minimize(
    rho: float,
    nu: float,
    p_x,
    d: Distortion,
    eps: float = EPS,
    max_itr: int = MAX_ITR,
    p0=None,
    history: bool = False,
) -> ArimotoResult:
    """Minimize the potential at ``mu = 1 / rho`` over reproduction distributions.

    Starts from the uniform distribution unless ``p0`` is given. Stops when
    successive potentials differ by less than ``eps`` or after ``max_itr``
    updates; in the latter case a :class:`NonConvergenceWarning` is issued
    and the last iterate is returned.
    """
    if rho <= 0:
        raise DomainError(f"rho must be positive, got {rho}")
    if nu < 0:
        raise DomainError(f"nu must be nonnegative, got {nu}")
    pa = check_compatible(p_x, d)
    p, g, it, conv, trace = _arimoto_batch([rho], nu, pa, d, p0, eps, max_itr, history)
    if not conv[0]:
        warnings.warn(f"Arimoto iteration did not converge (rho={rho}, nu={nu})", NonConvergenceWarning, stacklevel=2)
    return ArimotoResult(Distribution(p[0] / p[0].sum()), float(g[0]), int(it[0]), bool(conv[0]), trace)


# ---------------------------------------------------------------------------
# Linear program (mu = 0)
# ---------------------------------------------------------------------------


def g_mu_zero(nu: float, p_x, d: Distortion) -> tuple[Distribution, float]:
    """Minimize ``-log min_x A(x)`` exactly as a linear program.

    The primal is: maximize ``c`` subject to ``A(x) >= c`` on the support of
    ``P`` and ``p_Y`` on the simplex. It is solved through its dual,
    maximize ``sum u`` subject to ``K^T u <= 1``, ``u >= 0``, whose slack
    basis is feasible from the start; ``c* = 1 / max sum u`` and ``p_Y`` is
    read off the row prices. Returns ``(p_Y*, -log c*)``.
    """
    if not (nu >= 0 and math.isfinite(nu)):
        raise DomainError(f"nu must be finite and nonnegative, got {nu}")
    pa = check_compatible(p_x, d)
    K = d.kernel(nu)[pa > 0]
    # The uniform output with c = min_x A(x) is always feasible.
    c_uniform = float(np.min(K @ d.initial_output()))
    if not c_uniform > 0:
        raise Infeasible("uniform reproduction gives a zero constraint value")
    _, total, w = lp_simplex_solve(np.ones(K.shape[0]), [(col, "<=", 1.0) for col in K.T], duals=True)
    w = np.maximum(w, 0.0)
    if total > 0 and w.sum() > 0:
        p = w / w.sum()
        c_star = float(np.min(K @ p))
    else:
        p, c_star = d.initial_output().copy(), c_uniform
    if c_star < c_uniform:  # LP round-off; fall back to the known feasible point
        p, c_star = d.initial_output().copy(), c_uniform
    return Distribution(p / p.sum()), -math.log(min(c_star, 1.0))


# ---------------------------------------------------------------------------
# The table
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LimitRow:
    """The ``mu -> inf`` row: ``g`` tends to ``min_p -sum_x P log A``."""

    g: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray

    def __post_init__(self):
        for name in ("g", "iterations", "converged"):
            a = np.array(getattr(self, name)).ravel()
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not (self.g.shape == self.iterations.shape == self.converged.shape):
            raise ConfigurationError("limit row fields differ in length")


@dataclass(frozen=True, eq=False)
class GTable:
    """``g[i, j]`` in nats at ``(mu_ticks[i], nu_ticks[j])``.

    ``limit`` optionally closes the mu axis at infinity. It only matters at
    ``E = 0``, where the landscape decreases in mu and a finite grid would
    stop short of ``R(delta | P)``.
    """

    g: np.ndarray
    spec: GridSpec
    iterations: np.ndarray
    converged: np.ndarray
    optimizers: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)
    limit: LimitRow | None = None

    def __post_init__(self):
        for name in ("g", "iterations", "converged"):
            a = np.array(getattr(self, name))
            if a.shape != self.spec.shape:
                raise ConfigurationError(f"{name} has shape {a.shape}, grid is {self.spec.shape}")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.limit is not None and self.limit.g.shape != self.spec.nu_ticks.shape:
            raise ConfigurationError("limit row does not match the nu ticks")

    @property
    def mu(self) -> np.ndarray:
        return self.spec.mu_ticks

    @property
    def nu(self) -> np.ndarray:
        return self.spec.nu_ticks

    def landscape(self, delta: float, E: float) -> np.ndarray:
        """``-nu * delta + mu * E + g`` over the whole grid."""
        return self.g - self.nu[None, :] * delta + self.mu[:, None] * E

    def limit_landscape(self, delta: float) -> np.ndarray | None:
        """``-nu * delta + g_inf`` along the limit row, or None without one."""
        if self.limit is None:
            return None
        return self.limit.g - self.nu * delta

    def to_csv(self, path) -> None:
        """Write ``mu, nu, g_nats, iterations, converged``; atomic rename on success.

        The limit row, if any, comes last with ``mu`` written as ``inf``.
        """
        path = os.fspath(path)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mu", "nu", "g_nats", "iterations", "converged"])
        for i, mu in enumerate(self.mu):
            for j, nu in enumerate(self.nu):
                w.writerow([_fmt(mu), _fmt(nu), _fmt(self.g[i, j]), int(self.iterations[i, j]), int(self.converged[i, j])])
        if self.limit is not None:
            lim = self.limit
            for j, nu in enumerate(self.nu):
                w.writerow(["inf", _fmt(nu), _fmt(lim.g[j]), int(lim.iterations[j]), int(lim.converged[j])])
        _atomic_write(path, buf.getvalue())

    @classmethod
    def from_csv(cls, path, e_ticks=None) -> "GTable":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ConfigurationError(f"{path}: empty table")
        limit_rows = [r for r in rows if math.isinf(float(r["mu"]))]
        rows = [r for r in rows if not math.isinf(float(r["mu"]))]
        mu = np.array(sorted({float(r["mu"]) for r in rows}))
        nu = np.array(sorted({float(r["nu"]) for r in rows}))
        mi = {v: i for i, v in enumerate(mu)}
        ni = {v: j for j, v in enumerate(nu)}
        g = np.full((mu.size, nu.size), np.nan)
        it = np.zeros_like(g, dtype=int)
        cv = np.zeros_like(g, dtype=bool)
        for r in rows:
            i, j = mi[float(r["mu"])], ni[float(r["nu"])]
            g[i, j] = float(r["g_nats"])
            it[i, j] = int(r["iterations"])
            cv[i, j] = bool(int(r["converged"]))
        if np.isnan(g).any():
            raise ConfigurationError(f"{path}: table is missing cells")
        limit = None
        if limit_rows:
            if len(limit_rows) != nu.size:
                raise ConfigurationError(f"{path}: limit row is incomplete")
            limit_rows.sort(key=lambda r: float(r["nu"]))
            limit = LimitRow(
                [float(r["g_nats"]) for r in limit_rows],
                [int(r["iterations"]) for r in limit_rows],
                [bool(int(r["converged"])) for r in limit_rows],
            )
        kw = {} if e_ticks is None else {"e_ticks": e_ticks}
        spec = GridSpec(mu, nu, **kw)
        return cls(g, spec, it, cv, provenance={"source": os.fspath(path)}, limit=limit)


def _fmt(x: float) -> str:
    return f"{float(x):.12g}"


def _atomic_write(path: str, text: str) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _build_columns(args):
    """Fill the table columns ``js``; warm starts run along nu inside the chunk."""
    p_x, d, mu_ticks, nu_ticks, js, eps, max_itr, warm, keep = args
    n_mu = mu_ticks.size
    lp_rows = mu_ticks < MU_LP_THRESHOLD
    arimoto_rows = np.nonzero(~lp_rows)[0]
    rhos = 1.0 / mu_ticks[arimoto_rows]
    g = np.zeros((n_mu, len(js)))
    iters = np.zeros((n_mu, len(js)), dtype=int)
    conv = np.ones((n_mu, len(js)), dtype=bool)
    opt = np.zeros((n_mu, len(js), d.shape[1])) if keep else None
    prev = None
    for c, j in enumerate(js):
        nu = float(nu_ticks[j])
        p_lp, g_lp = g_mu_zero(nu, p_x, d)
        g[lp_rows, c] = g_lp
        if keep:
            opt[lp_rows, c] = p_lp.probs
        if arimoto_rows.size:
            p0 = None
            if warm and prev is not None:
                # Multiplicative updates cannot revive a symbol that sits at
                # the floor, so keep some uniform mass in the warm start.
                p0 = (1.0 - WARM_MIX) * prev + WARM_MIX * d.initial_output()
            p, gv, it, cv, _ = _arimoto_batch(rhos, nu, p_x, d, p0, eps, max_itr)
            g[arimoto_rows, c] = gv
            iters[arimoto_rows, c] = it
            conv[arimoto_rows, c] = cv
            if keep:
                opt[arimoto_rows, c] = p
            prev = p
    return js, g, iters, conv, opt


def limit_row(p_x, d: Distortion, nu_ticks, eps: float = EPS, max_itr: int = MAX_ITR) -> LimitRow:
    """``lim_{mu -> inf} min_p G = min_p -sum_x P log A`` at each nu, by Blahut-Arimoto."""
    pa = check_compatible(p_x, d)
    nu = np.asarray(nu_ticks, dtype=float)
    _, F, _, it, conv, _ = _ba_batch(np.tile(pa, (nu.size, 1)), d, nu, eps, max_itr)
    F = np.where(nu == 0.0, 0.0, F)
    return LimitRow(F, it, conv | (nu == 0.0))


def build_gtable(
    p_x,
    d: Distortion,
    spec: GridSpec,
    eps: float = EPS,
    max_itr: int = MAX_ITR,
    warm_start: bool = True,
    keep_optimizers: bool = False,
    threads: int = 1,
    provenance: str = "",
    with_limit: bool = True,
) -> GTable:
    """Tabulate the minimized potential over ``spec``'s ``(mu, nu)`` grid.

    Columns are processed in fixed chunks of ``CHUNK`` nu ticks; inside a
    chunk each Arimoto run starts from the optimizer of the previous column.
    The chunking does not depend on ``threads``, so the table is identical
    for any worker count. ``with_limit`` adds the ``mu -> inf`` row.
    """
    pa = check_compatible(p_x, d)
    if eps <= 0 or max_itr < 1:
        raise ConfigurationError("eps and max_itr must be positive")
    n_nu = spec.nu_ticks.size
    chunks = [list(range(s, min(s + CHUNK, n_nu))) for s in range(0, n_nu, CHUNK)]
    jobs = [(pa, d, spec.mu_ticks, spec.nu_ticks, js, eps, max_itr, warm_start, keep_optimizers) for js in chunks]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_build_columns, jobs))
    else:
        results = [_build_columns(job) for job in jobs]

    m = spec.mu_ticks.size
    g = np.zeros((m, n_nu))
    iters = np.zeros((m, n_nu), dtype=int)
    conv = np.ones((m, n_nu), dtype=bool)
    opt = np.zeros((m, n_nu, d.shape[1])) if keep_optimizers else None
    for js, gc, ic, cc, oc in results:
        g[:, js], iters[:, js], conv[:, js] = gc, ic, cc
        if keep_optimizers:
            opt[:, js] = oc
    # nu = 0 makes every inner sum one.
    g[:, spec.nu_ticks == 0.0] = 0.0
    limit = limit_row(pa, d, spec.nu_ticks, eps, max_itr) if with_limit else None
    bad = int((~conv).sum()) + (0 if limit is None else int((~limit.converged).sum()))
    if bad:
        warnings.warn(f"{bad} table cells hit max_itr", NonConvergenceWarning, stacklevel=2)
    return GTable(
        g,
        spec,
        iters,
        conv,
        opt,
        provenance={"instance": provenance, "nonconverged_cells": bad, "eps": eps, "max_itr": max_itr},
        limit=limit,
    )
