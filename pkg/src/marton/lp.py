"""Dense two-phase primal simplex with Bland's anti-cycling rule.

Small and self-contained: it only has to handle the ``|Y| + 1`` variable
problems that arise when minimizing the potential at ``mu = 0``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, Infeasible, Unbounded

TOL = 1e-10
_RELATIONS = ("<=", ">=", "=")


def _pivot(T: np.ndarray, basis: list[int], row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _run(T: np.ndarray, basis: list[int], allowed: int, tol: float, max_pivots: int) -> None:
    """Maximize the objective whose reduced costs sit in the last row of T.

    Only the first ``allowed`` columns may enter the basis.
    """
    m = T.shape[0] - 1
    for _ in range(max_pivots):
        z = T[-1, :allowed]
        entering = np.nonzero(z < -tol)[0]
        if entering.size == 0:
            return
        col = int(entering[0])  # Bland: lowest index
        column = T[:m, col]
        pos = np.nonzero(column > tol)[0]
        if pos.size == 0:
            raise Unbounded("objective is unbounded above")
        ratios = T[pos, -1] / column[pos]
        best = ratios.min()
        ties = pos[ratios <= best + tol * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))  # Bland: lowest basic index
        _pivot(T, basis, row, col)
    raise RuntimeError("simplex exceeded its pivot budget")


def lp_simplex_solve(
    objective: Sequence[float],
    constraints: Iterable[tuple[Sequence[float], str, float]],
    tol: float = TOL,
    max_pivots: int = 10000,
    duals: bool = False,
):
    """Maximize ``objective @ x`` subject to ``constraints`` and ``x >= 0``.

    Each constraint is ``(coefficients, relation, rhs)`` with relation one of
    ``"<="``, ``">="`` or ``"="``.

    Returns:
        The optimal basic feasible solution and the optimal value. With
        ``duals=True`` a third element holds the shadow price of every
        inequality row (NaN for equality rows), in the orientation the row
        was given.

    Raises:
        Infeasible: no ``x >= 0`` satisfies the constraints.
        Unbounded: the objective grows without bound on the feasible set.
    """
    c = np.asarray(objective, dtype=float)
    n = c.size
    rows, rels, rhs, flipped = [], [], [], []
    for coeffs, rel, b in constraints:
        a = np.asarray(coeffs, dtype=float)
        if a.size != n:
            raise DomainError(f"constraint has {a.size} coefficients, expected {n}")
        if rel not in _RELATIONS:
            raise DomainError(f"unknown relation {rel!r}")
        flip = b < 0
        if flip:
            a, b = -a, -b
            rel = {"<=": ">=", ">=": "<=", "=": "="}[rel]
        flipped.append(flip)
        rows.append(a)
        rels.append(rel)
        rhs.append(float(b))
    m = len(rows)
    if m == 0:
        if np.any(c > tol):
            raise Unbounded("objective is unbounded above")
        return (np.zeros(n), 0.0, np.zeros(0)) if duals else (np.zeros(n), 0.0)

    n_slack = sum(r != "=" for r in rels)
    n_art = sum(r != "<=" for r in rels)
    width = n + n_slack + n_art
    T = np.zeros((m + 1, width + 1))
    basis: list[int] = [0] * m
    slack_of: list[int | None] = [None] * m
    s = n
    art = n + n_slack
    art_cols = []
    for i, (a, rel, b) in enumerate(zip(rows, rels, rhs)):
        T[i, :n] = a
        T[i, -1] = b
        if rel == "<=":
            T[i, s] = 1.0
            basis[i] = s
            slack_of[i] = s
            s += 1
        else:
            if rel == ">=":
                T[i, s] = -1.0
                slack_of[i] = s
                s += 1
            T[i, art] = 1.0
            basis[i] = art
            art_cols.append(art)
            art += 1

    if art_cols:
        # Phase 1: maximize -sum(artificials).
        T[-1, :] = 0.0
        T[-1, art_cols] = 1.0
        for i, col in enumerate(basis):
            if col in art_cols:
                T[-1] -= T[i]
        _run(T, basis, width, tol, max_pivots)
        if T[-1, -1] < -tol * max(1.0, np.abs(rhs).max()):
            raise Infeasible("constraints admit no nonnegative solution")
        # Drive remaining (zero-level) artificials out of the basis.
        keep = []
        for i in range(m):
            if basis[i] >= n + n_slack:
                cand = np.nonzero(np.abs(T[i, : n + n_slack]) > tol)[0]
                if cand.size:
                    _pivot(T, basis, i, int(cand[0]))
                    keep.append(i)
            else:
                keep.append(i)
        T = np.vstack([T[keep], T[-1:]])
        basis = [basis[i] for i in keep]
        T = np.delete(T, np.arange(n + n_slack, width), axis=1)
        width = n + n_slack
        m = len(keep)

    # Phase 2.
    T[-1, :] = 0.0
    T[-1, :n] = -c
    for i, col in enumerate(basis):
        if T[-1, col] != 0.0:
            T[-1] -= T[-1, col] * T[i]
    _run(T, basis, width, tol, max_pivots)
    x = np.zeros(width)
    for i, col in enumerate(basis):
        x[col] = T[i, -1]
    sol = np.maximum(x[:n], 0.0)
    if not duals:
        return sol, float(c @ sol)
    y = np.full(len(slack_of), np.nan)
    for i, col in enumerate(slack_of):
        if col is not None:
            # Reduced cost of a slack is the price of its row.
            sign = 1.0 if rels[i] == "<=" else -1.0
            y[i] = sign * T[-1, col] * (-1.0 if flipped[i] else 1.0)
    return sol, float(c @ sol), y
