import numpy as np
import pytest

from pointreg.stats import PairTable, normalize_weights

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_table(rng, n_u, n_v, density=0.6):
    """Random positive weights on a random subset of cross pairs (at least one per row)."""
    mask = rng.random((n_u, n_v)) < density
    mask[np.arange(n_u), rng.integers(0, n_v, n_u)] = True
    w = rng.uniform(0.05, 1.0, (n_u, n_v)) * mask
    return normalize_weights(PairTable.from_dense(w))


def random_instance(rng, dim, n_u=None, n_v=None, related=True):
    """U, V and a weighted table; when ``related`` V is a noisy similarity image of U."""
    n_u = n_u or int(rng.integers(dim + 2, dim + 8))
    n_v = n_v or int(rng.integers(dim + 2, dim + 8))
    U = rng.uniform(-1.0, 1.0, (n_u, dim))
    if related:
        q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
        s = rng.uniform(0.5, 2.0)
        t = rng.uniform(-1, 1, dim)
        V = s * rng.uniform(-1, 1, (n_v, dim)) @ q.T + t
        n = min(n_u, n_v)
        V[:n] = s * U[:n] @ q.T + t + 0.05 * rng.standard_normal((n, dim))
        table = random_table(rng, n_u, n_v, density=0.3)
        # put extra mass on the true pairs so the instance is coupled
        i = np.concatenate([table.i, np.arange(n)])
        k = np.concatenate([table.k, np.arange(n)])
        w = np.concatenate([table.weights, rng.uniform(0.5, 1.0, n)])
        table = normalize_weights(PairTable(i, k, w))
    else:
        V = rng.uniform(-1.0, 1.0, (n_v, dim))
        table = random_table(rng, n_u, n_v)
    return U, V, table


def procrustes_oracle(u, v, w, similarity=False):
    """Weighted Kabsch/Umeyama via SVD of the weighted covariance, proper rotation."""
    w = np.asarray(w, float) / np.sum(w)
    mu, mv = w @ u, w @ v
    du, dv = u - mu, v - mv
    cov = (dv * w[:, None]).T @ du
    a, sv, bt = np.linalg.svd(cov)
    d = np.ones(len(sv))
    if np.linalg.det(a) * np.linalg.det(bt) < 0:
        d[-1] = -1.0
    rot = (a * d) @ bt
    var_u = np.sum(w * np.sum(du * du, axis=1))
    s = float(np.sum(sv * d) / var_u) if similarity else 1.0
    t = mv - s * rot @ mu
    resid = s * u @ rot.T + t - v
    return rot, t, s, float(np.sum(w * np.sum(resid * resid, axis=1)))


def rotation_2d(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])
