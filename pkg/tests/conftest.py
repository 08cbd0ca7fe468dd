import functools

import pytest

from amfm import SynthesisRequest, preset, synthesize


@pytest.fixture(scope="session")
def umd7():
    return preset("umd7")[1]


@pytest.fixture(scope="session")
def chain15():
    return preset("chain15")[1]


@functools.lru_cache(maxsize=None)
def _solution(name, pair, tau_us, K, protocol, extra):
    modes = preset(name)[1]
    req = SynthesisRequest(modes=modes, pair=pair, tau=tau_us * 1e-6, K=K,
                           protocol=protocol, **dict(extra))
    return synthesize(req)


def solve(name, pair, tau_us, K=0, protocol="exact", **extra):
    """Memoised synthesis shared by all test modules."""
    return _solution(name, tuple(pair), float(tau_us), int(K), protocol,
                     tuple(sorted(extra.items())))


@pytest.fixture(scope="session")
def solver():
    return solve


# -- acceptance summary ------------------------------------------------------

_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def verdict():
    """Record and print one PASS/FAIL line per acceptance criterion."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[key])
