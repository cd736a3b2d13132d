import numpy as np
import pytest

from adml import LabeledDataset, PatchSpec


def brute_patch(X, labels, i, k_W, k_B):
    """Nearest same/other-class neighbours by an explicit scan over (distance, index)."""
    cand = []
    for j in range(X.shape[1]):
        if j == i:
            continue
        diff = X[:, i] - X[:, j]
        cand.append((float(diff @ diff), j))
    cand.sort()
    within = [j for _, j in cand if labels[j] == labels[i]][:k_W]
    between = [j for _, j in cand if labels[j] != labels[i]][:k_B]
    return within, between


def direct_patch_sum(X, labels, spec, W):
    """Sum over patches of within minus beta-weighted between squared projected distances."""
    total = 0.0
    for i in range(X.shape[1]):
        within, between = brute_patch(X, labels, i, spec.k_W, spec.k_B)
        if not between:
            continue
        for j in within:
            v = W.T @ (X[:, i] - X[:, j])
            total += v @ v
        for j in between:
            v = W.T @ (X[:, i] - X[:, j])
            total -= spec.beta * (v @ v)
    return total


def random_orthonormal(rng, d, q):
    Q, _ = np.linalg.qr(rng.normal(size=(d, q)))
    return Q


def random_subset(rng, d=None, n=None, n_classes=2):
    d = int(rng.integers(2, 11)) if d is None else d
    n = int(rng.integers(6, 31)) if n is None else n
    X = rng.normal(size=(d, n))
    labels = rng.integers(0, n_classes, n)
    labels[0], labels[1] = 0, 1
    return LabeledDataset(X, labels)


def random_spec(rng):
    return PatchSpec(int(rng.integers(0, 6)), int(rng.integers(1, 6)), float(rng.uniform(0.1, 2.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> "PASS ..." / "FAIL ..." line, filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
