import numpy as np
import pytest

from minent.qstate import haar_unitary, schmidt_decompose


def random_spectrum(rng, n, lam_max=None):
    """Random descending spectrum of length n, optionally with max entry <= lam_max.

    A Dirichlet sample is mixed with the uniform vector just enough to meet the bound.
    """
    if lam_max is not None and lam_max < 1.0 / n - 1e-15:
        raise ValueError(f"no spectrum of length {n} has max entry {lam_max}")
    q = rng.dirichlet(np.ones(n))
    if lam_max is not None and q.max() > lam_max:
        t = (lam_max - 1.0 / n) / (q.max() - 1.0 / n)
        q = t * q + (1 - t) / n
    return np.sort(q)[::-1]


def random_feasible_pad(rng, d, extra=3):
    """Pad with Schmidt rank in [d, d + extra], lambda_max <= 1/d, in random local bases."""
    n = d + int(rng.integers(0, extra + 1))
    lam = random_spectrum(rng, n, 1.0 / d)
    a = haar_unitary(n, rng)
    b = haar_unitary(n, rng)
    m = (a * np.sqrt(lam)[None, :]) @ b.T
    return schmidt_decompose(m.ravel(), n, n), lam


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance verdicts, filled by tests/test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
