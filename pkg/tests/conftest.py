import numpy as np
import pytest

from qsprep.dense import DenseStateSpec
from qsprep.sparse import SparseStateSpec


def random_amplitudes(n, rng):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


def random_dense(n, rng):
    return DenseStateSpec.from_amplitudes(random_amplitudes(n, rng))


def random_sparse(n, d, rng):
    qs = rng.choice(1 << n, size=d, replace=False) if n <= 20 else _distinct(n, d, rng)
    amps = rng.normal(size=d) + 1j * rng.normal(size=d)
    amps /= np.linalg.norm(amps)
    return SparseStateSpec.build(n, [(int(q), a) for q, a in zip(qs, amps)])


def _distinct(n, d, rng):
    out = set()
    while len(out) < d:
        out.add(int(rng.integers(0, 1 << n)))
    return sorted(out)


def random_su2(rng):
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.stash[_VERDICTS] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    number, title = mark.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    status = "PASS" if rep.passed else "FAIL"
    line = f"criterion {number:>2} {status}  {title}" + (f"  [{detail}]" if detail else "")
    item.config.stash[_VERDICTS].append((number, line))


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
