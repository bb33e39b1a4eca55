"""Marton's and Blahut's rate-distortion error exponents.

Quantities are in nats unless a name says otherwise.
"""

from .ahlswede import (
    AhlswedeInstance,
    build_instance,
    lambda2_crossing,
    marton_exact,
    q_lambda,
    rd_lambda_sweep,
    solve_params,
)
from .core import (
    LN2,
    Distortion,
    DistortionMatrix,
    Distribution,
    InfoValue,
    LumpedDistortion,
    binary_divergence,
    binary_entropy,
    delta_max,
    kl_divergence,
    to_bits,
    to_nats,
    validate_distribution,
)
from .errors import *  # noqa: F401,F403
from .exponents import (
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
)
from .gtable import GridSpec, GTable, arimoto_minimize, build_gtable, g_mu_zero, g_of_py
from .lp import lp_simplex_solve
from .rd import rate_distortion, rate_distortion_batch, rd_fixed_slope, rd_uniform_closed_form

__version__ = "0.1.0"
