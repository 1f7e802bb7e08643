import numpy as np
import pytest
import scipy.linalg


def max_angle(a, b):
    """Largest principal angle (radians) between the column spans of a and b."""
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    return float(scipy.linalg.subspace_angles(qa, qb).max())


def low_rank(n, p, s, seed):
    g = np.random.default_rng(seed)
    u, _ = np.linalg.qr(g.standard_normal((n, len(s))))
    v, _ = np.linalg.qr(g.standard_normal((p, len(s))))
    return (u * np.asarray(s, float)) @ v.T, u, v


def sym_eig_singular_values(a):
    """Singular values from the eigenvalues of the smaller Gram matrix."""
    gram = a.T @ a if a.shape[0] >= a.shape[1] else a @ a.T
    w = np.linalg.eigvalsh(gram)[::-1]
    return np.sqrt(np.clip(w, 0, None))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
