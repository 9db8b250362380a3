import numpy as np
import pytest

from typical_worlds.quantum import MeasurementFamily


def rand_state(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def rand_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def rand_unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def rand_observable(rng, d, distinct=True):
    """Random Hermitian with integer eigenvalues; distinct unless asked otherwise."""
    u = rand_unitary(rng, d)
    vals = rng.permutation(d) if distinct else rng.integers(0, max(1, d - 1), size=d)
    return u @ np.diag(vals.astype(float)) @ u.conj().T


def rand_family(rng, d, k):
    """General k-outcome family on dim d, cut from a random isometry C^d -> C^(d*k)."""
    v = rand_unitary(rng, d * k)[:, :d]
    blocks = v.reshape(k, d, d)
    return MeasurementFamily({m: blocks[m] for m in range(k)})


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        status, text = results[num]
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {text}")
