import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mstp.chain import (
    GraphFormatError,
    SourceDistribution,
    build_chain,
    in_neighbors,
    read_edge_list,
    step,
)


def P_of(chain):
    return chain.dense()


def test_swap_chain(swap):
    P = P_of(swap)
    assert P[0, 1] == 1.0 and P[1, 0] == 1.0
    assert swap.n == 2


def test_uniform_normalization():
    ch = build_chain([(0, 1), (0, 2), (1, 0), (2, 0)])
    P = P_of(ch)
    assert P[0, 1] == 0.5 and P[0, 2] == 0.5


def test_weight_normalization():
    ch = build_chain([(0, 1, 3.0), (0, 2, 1.0), (1, 0, 1), (2, 0, 1)])
    P = P_of(ch)
    assert P[0, 1] == 0.75 and P[0, 2] == 0.25


def test_dangling_state_gets_self_loop():
    ch = build_chain([(0, 1)])
    assert ch.out_neighbors(1) == [(1, 1.0)]


def test_duplicate_edges_merge():
    ch = build_chain([(0, 1, 1.0), (0, 1, 1.0), (0, 2, 2.0), (1, 0), (2, 0)])
    assert ch.out_neighbors(0) == [(1, 0.5), (2, 0.5)]


@pytest.mark.parametrize("w", [-1.0, math.inf, math.nan])
def test_bad_weight_rejected(w):
    with pytest.raises(GraphFormatError, match="edge 1"):
        build_chain([(0, 1, 1.0), (1, 0, w)])


def test_zero_row_sum_rejected():
    with pytest.raises(GraphFormatError, match="zero total out-weight"):
        build_chain([(0, 1, 0.0), (1, 0, 1.0)])


def test_empty_rejected():
    with pytest.raises(GraphFormatError):
        build_chain([])


def test_read_edge_list(tmp_path):
    f = tmp_path / "g.txt"
    f.write_text("# comment\nalice bob 2\nalice carol 1\n\nbob alice\n")
    ch = read_edge_list(f)
    a, b, c = (ch.index_of(x) for x in ("alice", "bob", "carol"))
    P = ch.dense()
    assert P[a, b] == pytest.approx(2 / 3) and P[a, c] == pytest.approx(1 / 3)
    assert P[b, a] == 1.0
    assert P[c, c] == 1.0


def test_read_edge_list_reports_line(tmp_path):
    f = tmp_path / "g.txt"
    f.write_text("0 1\n# skip\n1 0 -3\n")
    with pytest.raises(GraphFormatError, match="line 3"):
        read_edge_list(f)


def test_integer_labels_keep_ids(tmp_path):
    f = tmp_path / "g.txt"
    f.write_text("2 0\n0 1\n1 2\n")
    ch = read_edge_list(f)
    assert ch.labels == (0, 1, 2)


def test_in_neighbors_examples(swap, three_state):
    assert in_neighbors(swap, 1) == [(0, 1.0)]
    cycle = build_chain([(0, 1), (1, 2), (2, 0)])
    assert in_neighbors(cycle, 0) == [(2, 1.0)]
    assert in_neighbors(three_state, 2) == [(0, 0.25), (1, 0.75)]


def test_in_neighbors_bounds(swap):
    with pytest.raises(IndexError):
        in_neighbors(swap, 2)


def test_step_deterministic_rows(swap):
    rng = np.random.default_rng(0)
    assert all(step(swap, 0, rng) == 1 for _ in range(50))
    loop = build_chain([(0, 1)])
    assert all(step(loop, 1, rng) == 1 for _ in range(50))


def test_step_frequency():
    ch = build_chain([(0, 1, 0.75), (0, 2, 0.25), (1, 0), (2, 0)])
    rng = np.random.default_rng(7)
    draws = ch.step_many(np.zeros(100_000, dtype=np.int64), rng)
    assert abs(np.mean(draws == 1) - 0.75) < 0.01


def test_step_seeded_reproducible(chain10):
    a = [step(chain10, 3, np.random.default_rng(5)) for _ in range(5)]
    b = [step(chain10, 3, np.random.default_rng(5)) for _ in range(5)]
    assert a == b


edge_lists = st.lists(
    st.tuples(st.integers(0, 7), st.integers(0, 7), st.floats(0.01, 10.0)),
    min_size=1, max_size=30,
)


@settings(max_examples=60, deadline=None)
@given(edge_lists)
def test_chain_invariants(edges):
    ch = build_chain(edges)
    P = ch.dense()
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-9, rtol=0)
    assert (ch.out_weights > 0).all()
    from_out = sorted((v, u, w) for u in range(ch.n) for v, w in ch.out_neighbors(u))
    from_in = sorted((v, u, w) for v in range(ch.n) for u, w in ch.in_neighbors(v))
    assert from_out == from_in


@settings(max_examples=15, deadline=None)
@given(edge_lists, st.integers(0, 2**31))
def test_step_matches_row(edges, seed):
    ch = build_chain(edges)
    rng = np.random.default_rng(seed)
    u = int(rng.integers(ch.n))
    draws = ch.step_many(np.full(100_000, u, dtype=np.int64), rng)
    freq = np.bincount(draws, minlength=ch.n) / draws.size
    assert np.abs(freq - ch.dense()[u]).max() < 0.01


def test_source_distribution_validation():
    with pytest.raises(ValueError):
        SourceDistribution([(0, 0.5), (0, 0.5)])
    with pytest.raises(ValueError):
        SourceDistribution([(0, 0.5), (1, 0.4)])
    with pytest.raises(ValueError):
        SourceDistribution([(0, 1.0), (1, 0.0)])
    assert SourceDistribution.uniform(4).dense(4).sum() == pytest.approx(1.0)
