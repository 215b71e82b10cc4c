"""Standard rate-distortion fixtures shared by the tests."""

import numpy as np

from rdlab import DistortionMeasure, Simplex

HAMMING3 = np.ones((3, 3)) - np.eye(3)
LINE3 = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]])

# (name, source, distortion matrix, D)
RD_FIXTURES = [
    ("binary-uniform-0.1", [0.5, 0.5], np.ones((2, 2)) - np.eye(2), 0.1),
    ("binary-uniform-0.2", [0.5, 0.5], np.ones((2, 2)) - np.eye(2), 0.2),
    ("binary-skewed-0.1", [0.3, 0.7], np.ones((2, 2)) - np.eye(2), 0.1),
    ("ternary-uniform-0.2", [1 / 3, 1 / 3, 1 / 3], HAMMING3, 0.2),
    ("ternary-uniform-0.5", [1 / 3, 1 / 3, 1 / 3], HAMMING3, 0.5),
    ("ternary-line-0.3", [0.5, 0.3, 0.2], LINE3, 0.3),
    ("ternary-line-0.6", [0.5, 0.3, 0.2], LINE3, 0.6),
    ("dominated-symbol-0.2", [0.5, 0.5], np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.5]]), 0.2),
    ("duplicate-columns-0.15", [0.4, 0.6], np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 0.0]]), 0.15),
]


def rd_fixture(entry):
    name, p, d, D = entry
    return Simplex(np.asarray(p, float)), DistortionMeasure(np.asarray(d, float)), D


def fixture_ids():
    return [e[0] for e in RD_FIXTURES]


def random_code_fixture(rng, *, max_n=6, zero_backward=False):
    """A random (code, source, backward rows) triple with n <= max_n."""
    from rdlab import BlockCode

    kx = int(rng.integers(2, 4))
    ky = int(rng.integers(2, 4))
    n = int(rng.integers(1, max_n + 1))
    while kx**n > 800:
        n -= 1
    M = int(rng.integers(1, 9))
    source = Simplex(rng.dirichlet(np.ones(kx)))
    back = rng.dirichlet(np.ones(kx), size=ky)
    if zero_backward:
        back[0, 0] = 0.0
        back[0] /= back[0].sum()
    codewords = rng.integers(0, ky, size=(M, n))
    encoder = rng.integers(0, M, size=kx**n)
    return BlockCode(n, kx, ky, codewords, encoder), source, back


def random_code_fixtures(count, seed=0, **kw):
    rng = np.random.default_rng(seed)
    return [random_code_fixture(rng, **kw) for _ in range(count)]
