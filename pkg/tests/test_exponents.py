import math
import warnings
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from marton.core import DistortionMatrix, binary_divergence, binary_entropy
from marton.errors import AlphabetTooLarge, ConfigurationError, DomainError, NonConvergenceWarning, OutOfRange
from marton.exponents import (
    Curve,
    blahut_exponent,
    blahut_exponent_curve,
    blahut_inverse,
    blahut_inverse_curve,
    brute_force_marton_exponent,
    brute_force_marton_inverse,
    exponent_curve,
    inverse_to_exponent,
    marton_inverse,
    marton_inverse_curve,
    type_lattice,
)
from marton.gtable import GridSpec, GTable, build_gtable

HAM2 = DistortionMatrix.hamming(2)
P_BIN = np.array([0.8, 0.2])
DELTA_BIN = 0.1


def binary_inverse(E, p=0.2, delta=DELTA_BIN):
    """max h(q) - h(delta) over D(q || p) <= E, for binary Hamming."""
    if binary_divergence(0.5, p) <= E:
        q = 0.5
    else:
        q = brentq(lambda t: binary_divergence(t, p) - E, p, 0.5, xtol=1e-15)
    return binary_entropy(q) - binary_entropy(delta)


@pytest.fixture(scope="module")
def bin_table():
    return build_gtable(P_BIN, HAM2, GridSpec.uniform(3, 41, 20, 101, 1.0, 101))


def random_table(seed, m=5, n=6):
    r = np.random.default_rng(seed)
    spec = GridSpec(np.linspace(0, 2, m), np.linspace(0, 10, n), np.linspace(0, 1, 11))
    g = np.sort(r.uniform(0, 3, (m, n)), axis=1)
    g[:, 0] = 0.0
    return GTable(g, spec, np.ones((m, n), int), np.ones((m, n), bool))


class TestCurve:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            Curve([0, 1], [0, 1], "nonsense")
        with pytest.raises(ConfigurationError):
            Curve([0, 0], [0, 1], "R_M-of-E")
        with pytest.raises(ConfigurationError):
            Curve([0, 1], [0], "R_M-of-E")

    def test_bits_and_immutable(self):
        c = Curve([0.0, 1.0], [0.0, math.log(2)], "R_M-of-E")
        assert c.y_bits.tolist() == [0.0, 1.0]
        assert len(c) == 2
        with pytest.raises(ValueError):
            c.y[0] = 1.0


class TestInverses:
    def test_binary_closed_form(self, bin_table):
        for E in (0.02, 0.05, 0.1, 0.2, 0.3):
            r, _ = marton_inverse(bin_table, DELTA_BIN, E)
            assert r == pytest.approx(binary_inverse(E), abs=1e-3)

    def test_saturates_at_uniform(self, bin_table):
        r, (mu, _) = marton_inverse(bin_table, DELTA_BIN, 0.9)
        assert r == pytest.approx(math.log(2) - binary_entropy(DELTA_BIN), abs=1e-6)
        assert mu == 0.0

    def test_zero_exponent_is_rate_distortion(self, bin_table):
        r_src = binary_entropy(0.2) - binary_entropy(DELTA_BIN)
        r0, (mu, _) = marton_inverse(bin_table, DELTA_BIN, 0.0)
        assert r0 == pytest.approx(r_src, abs=1e-4)
        assert mu == math.inf
        rb, _ = blahut_inverse(bin_table, DELTA_BIN, 0.0)
        assert rb == pytest.approx(r_src, abs=1e-4)

    def test_without_limit_row_the_zero_row_overshoots(self):
        t = build_gtable(P_BIN, HAM2, GridSpec.uniform(3, 11, 20, 41), with_limit=False)
        r_src = binary_entropy(0.2) - binary_entropy(DELTA_BIN)
        r0, (mu, _) = marton_inverse(t, DELTA_BIN, 0.0)
        assert r0 > r_src + 1e-2 and mu == 3.0

    def test_monotone_in_e(self, bin_table):
        c = marton_inverse_curve(bin_table, DELTA_BIN)
        assert np.all(np.diff(c.y) >= 0)
        assert c.arg.shape == (len(c), 2)
        b = blahut_inverse_curve(bin_table, DELTA_BIN)
        assert np.all(b.y >= c.y)

    def test_binary_blahut_matches_marton(self, bin_table):
        # R(delta | q) is concave on the binary simplex, so the two coincide.
        for E in (0.05, 0.1, 0.2):
            rm, _ = marton_inverse(bin_table, DELTA_BIN, E)
            rb, _ = blahut_inverse(bin_table, DELTA_BIN, E)
            assert rb == pytest.approx(rm, abs=1e-9)

    @given(st.integers(0, 2**32 - 1), st.floats(0, 3), st.floats(0, 1))
    def test_minimax_order(self, seed, delta, E):
        t = random_table(seed)
        rm, _ = marton_inverse(t, delta, E)
        rb, _ = blahut_inverse(t, delta, E)
        assert rm <= rb

    def test_tie_break_prefers_small_indices(self):
        spec = GridSpec([0.0, 1.0], [0.0, 1.0, 2.0])
        t = GTable(np.zeros((2, 3)), spec, np.ones((2, 3), int), np.ones((2, 3), bool))
        assert marton_inverse(t, 0.0, 0.0)[1] == (0.0, 0.0)

    def test_domain(self, bin_table):
        with pytest.raises(DomainError):
            marton_inverse(bin_table, -0.1, 0.1)
        with pytest.raises(DomainError):
            blahut_inverse(bin_table, 0.1, -0.1)
        with pytest.raises(ConfigurationError):
            marton_inverse_curve(bin_table, 0.0)


class TestInversion:
    def test_interpolation(self):
        c = Curve([0.0, 1.0, 2.0], [0.0, 1.0, 1.5], "R_M-of-E")
        assert inverse_to_exponent(c, 0.5) == pytest.approx(0.5)
        assert inverse_to_exponent(c, 1.25) == pytest.approx(1.5)
        assert inverse_to_exponent(c, 1.0) == 1.0
        with pytest.raises(OutOfRange):
            inverse_to_exponent(c, 2.0)

    def test_flat_stretch_is_a_jump(self):
        x = np.linspace(0, 3, 31)
        y = np.where(x < 0.5, x, 0.5)
        y = np.r_[y[:-1], 0.6]
        c = Curve(x, y, "R_M-of-E")
        ec = exponent_curve(c, np.linspace(0, 0.6, 13))
        assert ec.kind == "E_M-of-R"
        assert np.all(np.diff(ec.y) >= 0)
        assert len(ec.meta["jumps"]) == 1
        r_left, e_left, r_right, e_right = ec.meta["jumps"][0]
        assert e_left == pytest.approx(0.5) and e_right > 2.5

    def test_rates_below_first_value_need_no_divergence(self):
        c = Curve([0.0, 1.0], [0.2, 0.4], "R_M-of-E")
        ec = exponent_curve(c, [0.0, 0.1, 0.2, 0.3])
        assert ec.y.tolist() == pytest.approx([0.0, 0.0, 0.0, 0.5])

    def test_wrong_kind(self):
        with pytest.raises(ConfigurationError):
            inverse_to_exponent(Curve([0, 1], [0, 1], "E_M-of-R"), 0.5)


class TestBlahutExponent:
    def test_zero_below_rd(self, bin_table):
        r0 = binary_entropy(0.2) - binary_entropy(DELTA_BIN)
        assert blahut_exponent(bin_table, DELTA_BIN, 0.9 * r0) == 0.0

    def test_below_exact_exponent(self, bin_table):
        for R in (0.2, 0.25, 0.3, 0.35):
            q = brentq(lambda t: binary_entropy(t) - binary_entropy(DELTA_BIN) - R, 0.2, 0.5)
            exact = binary_divergence(q, 0.2)
            assert blahut_exponent(bin_table, DELTA_BIN, R) <= exact + 1e-6

    def test_curve_is_convex_and_increasing(self, bin_table):
        r_max = float(blahut_inverse(bin_table, DELTA_BIN, 5.0)[0])
        c = blahut_exponent_curve(bin_table, DELTA_BIN, np.linspace(0, r_max, 30))
        assert np.all(np.diff(c.y) >= -1e-12)
        assert np.all(np.diff(c.y, 2) >= -1e-9)

    def test_out_of_range(self, bin_table):
        with pytest.raises(OutOfRange):
            blahut_exponent(bin_table, DELTA_BIN, 5.0)
        with pytest.raises(OutOfRange):
            blahut_exponent(bin_table, DELTA_BIN, -1.0)


class TestLattice:
    @pytest.mark.parametrize("n,res", [(1, 5), (2, 10), (3, 7), (4, 6)])
    def test_counts_and_sums(self, n, res):
        t = type_lattice(n, res)
        assert t.shape == (comb(res + n - 1, n - 1), n)
        assert np.allclose(t.sum(axis=1), 1.0)
        assert np.all(t >= 0)
        assert len({tuple(row) for row in t}) == t.shape[0]

    def test_rejects_large_alphabets(self):
        with pytest.raises(AlphabetTooLarge):
            brute_force_marton_inverse(np.ones(5) / 5, DistortionMatrix.hamming(5), 0.1, 0.1)

    def test_binary_inverse(self):
        for E in (0.0, 0.05, 0.2):
            r = brute_force_marton_inverse(P_BIN, HAM2, DELTA_BIN, E, resolution=400)
            assert r <= binary_inverse(E) + 1e-6
            assert r >= binary_inverse(E) - 5e-3

    def test_unreachable_rate(self):
        assert math.isinf(brute_force_marton_exponent(P_BIN, HAM2, DELTA_BIN, 1.0, resolution=20))

    def test_source_needs_no_divergence(self):
        r0 = binary_entropy(0.2) - binary_entropy(DELTA_BIN)
        assert brute_force_marton_exponent(P_BIN, HAM2, DELTA_BIN, r0 - 1e-6, resolution=7) == 0.0

    @settings(max_examples=10)
    @given(st.floats(0.01, 0.3))
    def test_inverse_and_exponent_are_consistent(self, E):
        r = brute_force_marton_inverse(P_BIN, HAM2, DELTA_BIN, E, resolution=100)
        assert brute_force_marton_exponent(P_BIN, HAM2, DELTA_BIN, float(r), resolution=100) <= E


def test_lattice_oracle_undershoots_near_small_masses():
    # Source with a 0.02 coordinate: the 1/200 lattice is coarse inside the
    # divergence ball, while the grid tracks the continuous optimum.
    from scipy.optimize import minimize

    from marton.core import Distribution, delta_max, kl_divergence
    from marton.rd import rate_distortion

    r = np.random.default_rng([909, 1])
    p = r.dirichlet(np.ones(3))
    v = r.uniform(0.2, 1.0, (3, 3))
    np.fill_diagonal(v, 0.0)
    d = DistortionMatrix(v)
    delta, E = 0.3 * delta_max(p, d), 0.05

    def rate(q):
        q = np.clip(q, 1e-12, None)
        return float(rate_distortion(Distribution(q / q.sum()), d, delta)[0])

    def slack(q):
        q = np.clip(q, 1e-12, None)
        return E - float(kl_divergence(Distribution(q / q.sum()), p))

    cons = [{"type": "eq", "fun": lambda q: q.sum() - 1}, {"type": "ineq", "fun": slack}]
    cont = max(
        -minimize(lambda q: -rate(q), 0.8 * p + 0.2 * w, method="SLSQP",
                  constraints=cons, bounds=[(1e-9, 1)] * 3).fun
        for w in np.eye(3)
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        table = build_gtable(p, d, GridSpec.uniform(2.0, 81, 6.0, 61))
    grid = float(marton_inverse(table, delta, E)[0])
    lat200 = float(brute_force_marton_inverse(p, d, delta, E, resolution=200))
    lat400 = float(brute_force_marton_inverse(p, d, delta, E, resolution=400))
    assert abs(grid - cont) < 1e-4
    assert lat200 < lat400 <= grid + 1e-9
    assert grid - lat200 > 5e-3 > grid - lat400
