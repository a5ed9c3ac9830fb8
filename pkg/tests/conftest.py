import numpy as np
import pytest

from mstp.chain import SourceDistribution, build_chain
from mstp.generators import random_chain

ACCEPTANCE = []


def dense_mstp(P, sigma, t, max_len):
    """Reference values sigma P^l e_t via dense matrix powers."""
    return np.array([(sigma @ np.linalg.matrix_power(P, ell))[t] for ell in range(max_len + 1)])


def dense_hitting(P, sigma, t, max_len):
    """First-passage probabilities by brute-force dynamic programming.

    Tracks the mass that has not yet visited ``t`` after step 0.
    """
    n = P.shape[0]
    out = np.zeros(max_len + 1)
    alive = sigma.copy()
    for ell in range(1, max_len + 1):
        nxt = alive @ P
        out[ell] = nxt[t]
        nxt[t] = 0.0
        alive = nxt
    return out


def push_identity_rhs(P, sigma, ws, ell):
    """<sigma, q[l]> + sum_k <sigma P^k, r[l-k]> with dense vectors."""
    n = P.shape[0]

    def vec(d):
        x = np.zeros(n)
        for v, val in d.items():
            x[v] = val
        return x

    total = sigma @ vec(ws.q[ell])
    dist = sigma.copy()
    for k in range(ell + 1):
        total += dist @ vec(ws.r[ell - k])
        dist = dist @ P
    return total


def random_sigma(n, rng):
    k = int(rng.integers(1, n + 1))
    states = rng.choice(n, size=k, replace=False)
    w = rng.random(k) + 0.1
    w /= w.sum()
    return SourceDistribution(list(zip(states.tolist(), w.tolist())))


@pytest.fixture
def swap():
    return build_chain([(0, 1), (1, 0)])


@pytest.fixture
def three_state():
    # P[0][2] = 0.25, P[1][2] = 0.75, completed to be stochastic
    return build_chain([(0, 2, 0.25), (0, 1, 0.75), (1, 2, 0.75), (1, 0, 0.25), (2, 0, 1.0)])


@pytest.fixture
def chain10():
    return random_chain(10, np.random.default_rng(2024), max_out=4)


@pytest.fixture
def record_acceptance():
    def record(name, passed, detail=""):
        ACCEPTANCE.append((name, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
