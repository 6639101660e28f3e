import numpy as np
import pytest

from bayal import kernels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    """Run a test under each kernel backend, restoring the original afterwards."""
    old = kernels.get_backend()
    try:
        kernels.set_backend(request.param)
    except RuntimeError:
        pytest.skip("numba backend unavailable")
    yield request.param
    kernels.set_backend(old)


def nll(beta, Xt, y):
    """Independent negative log-likelihood for finite-difference oracles."""
    eta = Xt @ beta
    return float(np.sum(np.logaddexp(0.0, eta) - y * eta))


def fd_hessian(f, x, h=1e-4):
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            e_i, e_j = np.eye(n)[i] * h, np.eye(n)[j] * h
            H[i, j] = (f(x + e_i + e_j) - f(x + e_i - e_j) - f(x - e_i + e_j) + f(x - e_i - e_j)) / (4 * h * h)
    return H


def write_wdbc_file(path):
    """WDBC in its UCI layout, from scikit-learn's bundled copy (ids are synthetic)."""
    datasets = pytest.importorskip("sklearn.datasets")
    d = datasets.load_breast_cancer()
    with open(path, "w") as fh:
        for i, (row, t) in enumerate(zip(d.data, d.target)):
            # scikit-learn codes malignant as 0
            diag = "M" if t == 0 else "B"
            fh.write(",".join([str(900000 + i), diag] + [repr(float(v)) for v in row]) + "\n")
    return path


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """``acceptance(n, ok, detail)`` records one criterion line, then asserts ``ok``."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def report(criterion, ok, detail):
        lines.append(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(lines[-1])
        assert ok, detail

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
