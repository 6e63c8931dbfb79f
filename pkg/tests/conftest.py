import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def sparse_frame(rng, n=960, k=8, amp=(0.5, 1.0)):
    """Real frame with exactly k conjugate bin pairs, plus its support."""
    bins = rng.choice(np.arange(1, n // 2), k, replace=False)
    X = np.zeros(n, dtype=complex)
    vals = rng.uniform(*amp, k) * np.exp(1j * rng.uniform(0, 2 * np.pi, k)) * n / 2
    X[bins] = vals
    X[n - bins] = np.conj(vals)
    return np.fft.ifft(X).real, np.sort(np.concatenate([bins, n - bins]))


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def record(number, ok, detail):
    ACCEPTANCE[number] = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
    print(ACCEPTANCE[number])
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
