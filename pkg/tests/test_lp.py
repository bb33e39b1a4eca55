import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from marton.errors import DomainError, Infeasible, Unbounded
from marton.lp import lp_simplex_solve


def test_single_bound():
    x, v = lp_simplex_solve([1.0], [([1.0], "<=", 1.0)])
    assert v == pytest.approx(1.0) and x.tolist() == pytest.approx([1.0])


def test_box():
    x, v = lp_simplex_solve([1.0, 1.0], [([1, 0], "<=", 1), ([0, 1], "<=", 2)])
    assert v == pytest.approx(3.0)
    assert x.tolist() == pytest.approx([1.0, 2.0])


def test_hamming_kernel_lp():
    k = math.exp(-math.log(2))
    K = np.array([[1, k], [k, 1]])
    cons = [(np.r_[row, -1.0], ">=", 0.0) for row in K]
    cons.append(([1, 1, 0], "=", 1))
    x, v = lp_simplex_solve([0, 0, 1], cons)
    assert v == pytest.approx(0.75, abs=1e-12)
    assert x[:2].tolist() == pytest.approx([0.5, 0.5])


def test_infeasible():
    with pytest.raises(Infeasible):
        lp_simplex_solve([1, 0], [([1, 1], "<=", 1), ([1, 1], ">=", 2)])


def test_unbounded():
    with pytest.raises(Unbounded):
        lp_simplex_solve([1, 1], [([1, -1], "<=", 1)])


def test_negative_rhs_is_flipped():
    _, v = lp_simplex_solve([-1.0], [([-1.0], "<=", -2.0)])
    assert v == pytest.approx(-2.0)


def test_redundant_equalities():
    _, v = lp_simplex_solve([1, 2], [([1, 1], "=", 1), ([2, 2], "=", 2)])
    assert v == pytest.approx(2.0)


def test_bad_input():
    with pytest.raises(DomainError):
        lp_simplex_solve([1, 1], [([1], "<=", 1)])
    with pytest.raises(DomainError):
        lp_simplex_solve([1], [([1], "<", 1)])


def test_degenerate_cycling_example():
    # Beale's example cycles under the textbook largest-coefficient rule.
    c = [0.75, -150, 0.02, -6]
    cons = [
        ([0.25, -60, -0.04, 9], "<=", 0),
        ([0.5, -90, -0.02, 3], "<=", 0),
        ([0, 0, 1, 0], "<=", 1),
    ]
    _, v = lp_simplex_solve(c, cons)
    assert v == pytest.approx(0.05, abs=1e-12)


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 5))
def test_matches_reference_solver(seed, n, m):
    r = np.random.default_rng(seed)
    A = r.uniform(-1, 2, (m, n))
    b = r.uniform(0.5, 3, m)
    c = r.uniform(-1, 1, n)
    # A box keeps every draw bounded.
    A = np.vstack([A, np.eye(n)])
    b = np.r_[b, np.full(n, 5.0)]
    ref = linprog(-c, A_ub=A, b_ub=b, bounds=[(0, None)] * n, method="highs")
    x, v = lp_simplex_solve(c, [(row, "<=", rhs) for row, rhs in zip(A, b)])
    assert ref.status == 0
    assert v == pytest.approx(-ref.fun, abs=1e-8)
    assert np.all(A @ x <= b + 1e-9)
