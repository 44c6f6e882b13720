import numpy as np
import pytest


def fd_derivatives(f, x, h=1e-4, richardson=False):
    """Central finite-difference value, gradient and Hessian of ``f``.

    ``f`` maps points of shape ``(n, d)`` to arrays of shape ``(n, ...)``.
    Returns arrays with the derivative axes appended last.  With
    ``richardson`` the step-``h`` and step-``2h`` stencils are combined to
    cancel the leading ``O(h^2)`` term.
    """
    if richardson:
        v, g1, h1 = fd_derivatives(f, x, h)
        _, g2, h2 = fd_derivatives(f, x, 2 * h)
        return v, (4 * g1 - g2) / 3, (4 * h1 - h2) / 3
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    f0 = np.asarray(f(x), dtype=float)
    E = np.eye(d) * h
    grad = np.stack([(f(x + E[i]) - f(x - E[i])) / (2 * h) for i in range(d)], axis=-1)
    hess = np.empty(f0.shape + (d, d))
    for i in range(d):
        hess[..., i, i] = (f(x + E[i]) - 2 * f0 + f(x - E[i])) / h**2
        for j in range(i + 1, d):
            v = (f(x + E[i] + E[j]) - f(x + E[i] - E[j]) - f(x - E[i] + E[j]) + f(x - E[i] - E[j])) / (4 * h * h)
            hess[..., i, j] = v
            hess[..., j, i] = v
    return f0, grad, hess


def rel_err(approx, exact, floor=0.0):
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    return float(np.max(np.abs(approx - exact)) / max(np.max(np.abs(exact)), floor))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
