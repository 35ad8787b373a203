import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tsqpde.model import HubbardSpec, build_hubbard

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_unitary(rng, dim):
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng, n):
    v = rng.standard_normal(2 ** n) + 1j * rng.standard_normal(2 ** n)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def hubbard2():
    return build_hubbard(HubbardSpec(2, 1.0, 10.0))


@pytest.fixture(scope="session")
def hubbard4():
    return build_hubbard(HubbardSpec(4, 1.0, 10.0))


# -- acceptance summary ------------------------------------------------------

_CRITERIA: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    entry = _CRITERIA.setdefault(num, {"title": title, "ok": True, "detail": []})
    failed = rep.failed or (rep.skipped and hasattr(rep, "wasxfail"))
    if rep.when == "call" or failed:
        if failed:
            entry["ok"] = False
            entry["detail"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        status = "PASS" if e["ok"] else "FAIL"
        extra = f" (failing: {', '.join(e['detail'])})" if e["detail"] else ""
        terminalreporter.write_line(f"criterion {num:2d} {status}: {e['title']}{extra}")
