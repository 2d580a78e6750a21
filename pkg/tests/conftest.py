import numpy as np
import pytest

from phflow.net import IDENTITY, NetworkSpec, softplus


def random_spec(rng, max_widths=(4, 8, 8, 3)):
    """A random MLP no larger than ``max_widths`` with a mix of activations."""
    depth = int(rng.integers(2, len(max_widths) + 1))
    widths = [int(rng.integers(1, max_widths[i] + 1)) for i in range(depth - 1)]
    widths.append(int(rng.integers(1, max_widths[-1] + 1)))
    acts = [softplus(float(rng.uniform(0.5, 10.0))) if rng.random() < 0.7 else IDENTITY
            for _ in range(depth - 1)]
    acts[-1] = IDENTITY if rng.random() < 0.5 else acts[-1]
    return NetworkSpec(widths, acts)


def central_difference(fun, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def gradient_relative_error(analytic, numeric):
    """Norm-wise relative error ``|g - g_fd| / max(|g|, |g_fd|)`` (0 when both vanish)."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    return 0.0 if scale == 0 else float(np.linalg.norm(analytic - numeric) / scale)


def assert_energy_nonincreasing(hamiltonians, slack=1e-6):
    H = np.asarray(hamiltonians)
    rise = H[1:] - (H[:-1] + slack * (1 + np.abs(H[:-1])))
    assert np.all(rise <= 0), f"energy rose by {rise.max():.3e} at sample {int(np.argmax(rise)) + 1}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance report -------------------------------------------------------------------------

_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """``report(n, title, passed, detail)`` prints and records one acceptance verdict."""
    def _report(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title} -- {detail}"
        print(line)
        _ACCEPTANCE_LINES.append((number, line))
    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
