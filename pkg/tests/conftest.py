import numpy as np
import pytest

from mch_istx.profiles import build_profile
from mch_istx.rhp import build_rhdata

TANH = {"family": "tanh", "A1": 1.0, "A2": 2.0, "w": 2.0}
DESC = {"family": "tanh", "A1": 2.0, "A2": 1.0, "w": 2.0}
BUMP = {"family": "bump", "A1": 1.0, "A2": 2.0, "w": 2.0, "c": 2.0, "s": 2.0}
CONST = {"family": "constant", "A": 1.5}


@pytest.fixture(scope="session")
def tanh():
    return build_profile(TANH)


@pytest.fixture(scope="session")
def desc():
    return build_profile(DESC)


@pytest.fixture(scope="session")
def bump():
    return build_profile(BUMP)


@pytest.fixture(scope="session")
def const():
    return build_profile(CONST)


@pytest.fixture(scope="session")
def tanh_data(tanh):
    return build_rhdata(tanh, y_max=5.0)


@pytest.fixture(scope="session")
def desc_data(desc):
    return build_rhdata(desc, y_max=5.0)


@pytest.fixture(scope="session")
def bump_data(bump):
    return build_rhdata(bump, y_max=5.0)


@pytest.fixture(scope="session")
def const_data(const):
    return build_rhdata(const, y_max=5.0, t_max=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion at the end of the run

ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    label, part = mark.args[0], mark.kwargs.get("part", item.name)
    if hasattr(rep, "wasxfail"):
        status = "XFAIL"
    else:
        status = "PASS" if rep.passed else "FAIL"
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "measured")
    ACCEPTANCE.setdefault(label, []).append((status, part, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0][2:])):
        parts = ACCEPTANCE[label]
        ok = all(s == "PASS" for s, _, _ in parts)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}")
        for s, part, detail in parts:
            terminalreporter.write_line(f"        {s:<5s} {part}: {detail}")
