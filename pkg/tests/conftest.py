import math
import os
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from marton import ahlswede as ah
from marton.errors import NonConvergenceWarning
from marton.gtable import GridSpec, build_gtable

settings.register_profile(
    "default",
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

LN2 = math.log(2.0)

CRITERIA = {
    1: "Ahlswede parameters match the table to 3 decimals",
    2: "closed-form and numeric RD agree; block rates balance",
    3: "lambda sweep is bimodal at the reported maximizers",
    4: "exact exponent: zero stretch, jump, lambda_2",
    5: "grid inverse agrees with the exact inverse",
    6: "saddle locations of both inverses",
    7: "order relations and the linear Blahut inverse",
    8: "property suite",
    9: "oracle equivalence on random 3x3 instances",
    10: "LP kernel values and branch continuity",
}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.user_properties.append(("criterion", m.args[0]))


def pytest_terminal_summary(terminalreporter):
    status: dict[int, bool] = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            for name, value in getattr(rep, "user_properties", []):
                if name != "criterion":
                    continue
                failed = rep.failed or key == "error"
                status[value] = status.get(value, True) and not failed
    if not status:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        if n in status:
            mark = "PASS" if status[n] else "FAIL"
        else:
            mark = "NOT RUN"
        terminalreporter.write_line(f"criterion {n:2d}: {mark:7s} {CRITERIA[n]}")


# ---------------------------------------------------------------------------
# Shared heavy fixtures
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def inst1():
    return ah.instance_1()


@pytest.fixture(scope="session")
def inst2():
    return ah.instance_2()


@pytest.fixture(scope="session")
def sweep1(inst1):
    return ah.rd_lambda_sweep(inst1, 2001, extra=[inst1.xi])


@pytest.fixture(scope="session")
def sweep2(inst2):
    return ah.rd_lambda_sweep(inst2, 2001, extra=[inst2.xi])


@pytest.fixture(scope="session")
def exact1(inst1, sweep1):
    return ah.marton_exact(inst1, sweep=sweep1)


@pytest.fixture(scope="session")
def exact2(inst2, sweep2):
    return ah.marton_exact(inst2, sweep=sweep2)


@pytest.fixture(scope="session")
def table1(inst1):
    """Default-grid table for instance #1 on the lumped kernel."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", NonConvergenceWarning)
        return build_gtable(inst1.source_classes, inst1.lumped, GridSpec.uniform())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
