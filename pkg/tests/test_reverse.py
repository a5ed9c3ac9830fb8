import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mstp.generators import random_chain
from mstp.reverse import new_workspace, reverse_push, run_reverse_phase

from conftest import dense_hitting, dense_mstp, push_identity_rhs, random_sigma


def test_new_workspace():
    from mstp.generators import random_chain

    ch = random_chain(5, np.random.default_rng(0))
    ws = new_workspace(ch, 3, 2, 0.05)
    assert ws.r[0] == {3: 1.0}
    assert ws.r[1:] == [{}, {}] and ws.q == [{}, {}, {}]
    assert ws.threshold == 0.05
    assert (ws.push_count, ws.touch_count) == (0, 0)
    assert len(new_workspace(ch, 3, 0, 0.05).r) == 1


def test_new_workspace_rejects_bad_args(swap):
    with pytest.raises(IndexError):
        new_workspace(swap, 2, 1, 0.1)
    with pytest.raises(ValueError):
        new_workspace(swap, 0, -1, 0.1)
    with pytest.raises(ValueError):
        new_workspace(swap, 0, 1, 0.0)


def test_push_swap(swap):
    ws = new_workspace(swap, 1, 2, 0.1)
    reverse_push(ws, swap, 1, 0)
    assert ws.q[0] == {1: 1.0}
    assert ws.r[0] == {}
    assert ws.r[1] == {0: 1.0}
    assert ws.touch_count == 2


def test_push_spreads_transpose_column(three_state):
    ws = new_workspace(three_state, 2, 2, 0.1)
    reverse_push(ws, three_state, 2, 0)
    assert ws.r[1] == {0: 0.25, 1: 0.75}
    assert ws.touch_count == three_state.in_degree(2) + 1


def test_zero_push_is_noop(swap):
    ws = new_workspace(swap, 1, 2, 0.1)
    reverse_push(ws, swap, 0, 0)
    assert ws.r[0] == {1: 1.0} and ws.q[0] == {}
    assert ws.push_count == 0 and ws.touch_count == 0


def test_top_level_push_drops_spread(swap):
    ws = new_workspace(swap, 1, 0, 0.1)
    reverse_push(ws, swap, 1, 0)
    assert ws.q == [{1: 1.0}] and ws.r == [{}]


def test_run_reverse_phase_swap(swap):
    ws = new_workspace(swap, 1, 2, 0.1)
    run_reverse_phase(ws, swap)
    assert ws.q == [{1: 1.0}, {0: 1.0}, {1: 1.0}]
    assert all(level == {} for level in ws.r)
    assert ws.push_count == 3


def test_large_threshold_means_no_pushes(chain10):
    ws = new_workspace(chain10, 4, 3, 1.0)
    run_reverse_phase(ws, chain10)
    assert ws.push_count == 0
    assert ws.r[0] == {4: 1.0}


@pytest.mark.parametrize("threshold", [0.5, 0.1, 0.01])
def test_reverse_phase_invariant_and_bound(chain10, threshold):
    P = chain10.dense()
    L = 5
    for t in range(chain10.n):
        ws = new_workspace(chain10, t, L, threshold)
        run_reverse_phase(ws, chain10)
        assert ws.max_residual() <= threshold
        for s in range(chain10.n):
            sigma = np.eye(chain10.n)[s]
            exact = dense_mstp(P, sigma, t, L)
            for ell in range(L + 1):
                assert push_identity_rhs(P, sigma, ws, ell) == pytest.approx(exact[ell], abs=1e-10)


def test_touch_count_matches_cost_model(chain10):
    ws = new_workspace(chain10, 0, 4, 0.05)
    expected = 0
    orig = reverse_push

    pushed = []
    for i in range(ws.max_len + 1):
        for v in [v for v, x in ws.r[i].items() if x > ws.threshold]:
            pushed.append(v)
            orig(ws, chain10, v, i)
    expected = sum(chain10.in_degree(v) + 1 for v in pushed)
    assert ws.touch_count == expected
    assert ws.push_count == len(pushed)


def test_oracle_values_sum_to_one(chain10):
    P = chain10.dense()
    sigma = np.full(chain10.n, 1 / chain10.n)
    for ell in range(5):
        total = sum(dense_mstp(P, sigma, t, ell)[ell] for t in range(chain10.n))
        assert total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 20), st.integers(0, 6), st.integers(0, 120), st.integers(0, 2**32 - 1))
def test_invariant_under_arbitrary_pushes(n, L, pushes, seed):
    rng = np.random.default_rng(seed)
    ch = random_chain(n, rng, max_out=int(rng.integers(1, n + 1)))
    P = ch.dense()
    t = int(rng.integers(n))
    ws = new_workspace(ch, t, L, 0.1)
    for _ in range(pushes):
        active = [(v, i) for i, level in enumerate(ws.r) for v in level]
        if not active or rng.random() < 0.1:
            v, i = int(rng.integers(n)), int(rng.integers(L + 1))
        else:
            v, i = active[int(rng.integers(len(active)))]
        reverse_push(ws, ch, v, i)
        for level in ws.q + ws.r:
            assert all(x >= 0 for x in level.values())
    sigma = random_sigma(n, rng).dense(n)
    exact = dense_mstp(P, sigma, t, L)
    for ell in range(L + 1):
        assert abs(push_identity_rhs(P, sigma, ws, ell) - exact[ell]) <= 1e-10


def test_snapshot_rows_sorted(tmp_path, chain10):
    ws = new_workspace(chain10, 2, 3, 0.2)
    run_reverse_phase(ws, chain10)
    rows = ws.snapshot_rows()
    assert rows == sorted(rows, key=lambda r: (r[0], r[1], r[2]))
    path = tmp_path / "snap.tsv"
    ws.write_snapshot(path)
    body = [line.split("\t") for line in path.read_text().splitlines() if "\t" in line]
    assert len(body) == len(rows)
    assert body[0][:2] == [str(rows[0][1]), str(rows[0][2])]


def hitting_identity_rhs(P, sigma, ws, ell):
    """First-passage counterpart of the push identity.

    Walk operators are M_0 = I and M_k = Q^(k-1) P, with Q equal to P minus
    its target column. Residual left at the target above level 0 is
    subtracted where a walk would read it after arriving.
    """
    n, t = P.shape[0], ws.target
    Q = P.copy()
    Q[:, t] = 0.0

    def vec(d):
        x = np.zeros(n)
        for v, val in d.items():
            x[v] = val
        return x

    reach = [sigma.copy()]
    for k in range(1, ell + 1):
        reach.append(sigma @ np.linalg.matrix_power(Q, k - 1) @ P)
    total = sigma @ vec(ws.q[ell])
    for k in range(ell + 1):
        total += reach[k] @ vec(ws.r[ell - k])
    for j in range(1, ell):
        total -= ws.r[j].get(t, 0.0) * reach[ell - j][t]
    return total


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 15), st.integers(1, 6), st.integers(0, 80), st.integers(0, 2**32 - 1))
def test_hitting_invariant_under_arbitrary_pushes(n, L, pushes, seed):
    rng = np.random.default_rng(seed)
    ch = random_chain(n, rng, max_out=int(rng.integers(1, n + 1)))
    P = ch.dense()
    t = int(rng.integers(n))
    ws = new_workspace(ch, t, L, 0.1, absorb_target=True)
    for _ in range(pushes):
        active = [(v, i) for i, level in enumerate(ws.r) for v in level]
        if not active:
            break
        v, i = active[int(rng.integers(len(active)))]
        reverse_push(ws, ch, v, i)
    sigma = random_sigma(n, rng).dense(n)
    exact = dense_hitting(P, sigma, t, L)
    assert abs(hitting_identity_rhs(P, sigma, ws, 0) - sigma[t]) <= 1e-10
    for ell in range(1, L + 1):
        assert abs(hitting_identity_rhs(P, sigma, ws, ell) - exact[ell]) <= 1e-10


def test_hitting_phase_clears_target_residual(chain10):
    ws = new_workspace(chain10, 3, 5, 0.05, absorb_target=True)
    run_reverse_phase(ws, chain10)
    assert all(ws.r[i].get(3, 0.0) == 0.0 for i in range(1, 6))
    assert ws.max_residual() <= 0.05
