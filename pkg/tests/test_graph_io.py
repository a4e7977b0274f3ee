"""Edge-list parsing, canonicalization and held-out splitting."""

import io

import numpy as np
import pytest

from mnsbm.graph_io import (
    EMPTY_HELDOUT,
    GraphParseError,
    HeldoutSet,
    ObservedGraph,
    SplitError,
    parse_edge_list,
    split_holdout,
    write_graph,
)


def test_parse_basic():
    g = parse_edge_list("0 1\n1 2\n")
    assert g.n == 3
    assert g.dyads == ((0, 1), (1, 2))
    assert g.edge_count == 2
    assert g.pair_count == 3


def test_parse_symmetrizes_and_merges_duplicates():
    g = parse_edge_list("1 0\n0 1\n2 0\n")
    assert g.dyads == ((0, 1), (0, 2))


def test_parse_drops_self_loops_and_comments():
    g = parse_edge_list("# header\n% other comment\n3 3\n0 1\n\n")
    assert g.dyads == ((0, 1),)
    assert g.n == 2  # dropped self-loops do not pin the vertex range


def test_parse_weights_binarize():
    g = parse_edge_list("0 1 0.0\n1 2 2.5\n2 3 0\n")
    assert g.dyads == ((1, 2),)


def test_parse_weight_cancellation_stays_zero():
    # merged weight 0.0 is not a link
    g = parse_edge_list("0 1 0\n1 0 0\n")
    assert g.dyads == ()


def test_parse_one_based():
    g = parse_edge_list("1 2\n2 3\n", one_based=True)
    assert g.dyads == ((0, 1), (1, 2))
    assert g.n == 3


def test_parse_n_hint_pads_isolated_vertices():
    g = parse_edge_list("0 1\n", n_hint=5)
    assert g.n == 5


@pytest.mark.parametrize("text,frag", [
    ("0 1 2 3\n", "line 1"),
    ("0\n", "line 1"),
    ("a 1\n", "non-integer"),
    ("0 1 x\n", "non-numeric"),
    ("0 1 -2\n", "nonnegative"),
    ("0 1 inf\n", "finite"),
    ("-1 2\n", "out of range"),
    ("0 1\n0 7\n", "n_hint"),
])
def test_parse_errors_carry_line_numbers(text, frag):
    with pytest.raises(GraphParseError) as err:
        parse_edge_list(text, n_hint=3 if "n_hint" in frag else None)
    assert frag in str(err.value)


def test_parse_error_line_number_is_exact():
    with pytest.raises(GraphParseError, match="line 3"):
        parse_edge_list("0 1\n1 2\nbroken line here\n")


def test_write_then_parse_round_trips(rng):
    n = 17
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    keep = rng.random(len(pairs)) < 0.3
    dyads = tuple(p for p, k in zip(pairs, keep) if k)
    g = ObservedGraph(n=n, dyads=dyads)
    buf = io.StringIO()
    write_graph(g, buf)
    g2 = parse_edge_list(buf.getvalue(), n_hint=n)
    assert g2 == g


def test_observed_graph_validation():
    with pytest.raises(ValueError):
        ObservedGraph(n=3, dyads=((1, 0),))
    with pytest.raises(ValueError):
        ObservedGraph(n=3, dyads=((0, 1), (0, 1)))
    with pytest.raises(ValueError):
        ObservedGraph(n=2, dyads=((0, 2),))


def test_heldout_set_validation():
    with pytest.raises(ValueError):
        HeldoutSet(((1, 0, 1),), 0.1)
    with pytest.raises(ValueError):
        HeldoutSet(((0, 1, 2),), 0.1)
    with pytest.raises(ValueError):
        HeldoutSet(((0, 1, 1), (0, 1, 0)), 0.1)
    hs = HeldoutSet(((0, 1, 1), (0, 2, 0)), 0.1)
    assert hs.n_pos == 1 and hs.n_neg == 1
    assert EMPTY_HELDOUT.n_pos == 0


def test_split_holdout_counts_and_disjointness(rng):
    n = 20
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    keep = rng.random(len(pairs)) < 0.4
    g = ObservedGraph(n, tuple(p for p, k in zip(pairs, keep) if k))
    train, test = split_holdout(g, 0.2, rng)
    n_test = int(0.2 * g.edge_count)
    assert test.n_pos == n_test and test.n_neg == n_test
    assert train.edge_count == g.edge_count - n_test
    assert not (set(train.dyads) & test.pair_set())
    # positives really were edges; negatives really were not
    for i, j, lab in test.dyads:
        assert ((i, j) in g.edge_set()) == (lab == 1)


def test_split_holdout_exact_fraction_floor():
    # 0.3 of 10 edges must hold out 3, despite 0.3 * 10 != 3 in binary
    g = ObservedGraph(11, tuple((0, j) for j in range(1, 11)))
    assert g.edge_count == 10
    train, test = split_holdout(g, 0.3, np.random.default_rng(0))
    assert test.n_pos == 3


def test_split_holdout_determinism():
    g = ObservedGraph(12, tuple((i, i + 1) for i in range(11)))
    a = split_holdout(g, 0.25, np.random.default_rng(42))
    b = split_holdout(g, 0.25, np.random.default_rng(42))
    assert a == b


def test_split_holdout_errors(rng):
    g = ObservedGraph(5, ((0, 1), (1, 2), (2, 3)))
    with pytest.raises(ValueError):
        split_holdout(g, 0.0, rng)
    with pytest.raises(ValueError):
        split_holdout(g, 1.0, rng)
    with pytest.raises(SplitError, match="holds out nothing"):
        split_holdout(g, 0.05, rng)
    # complete graph: no non-edges to use as negatives
    full = ObservedGraph(4, tuple((i, j) for i in range(4) for j in range(i + 1, 4)))
    with pytest.raises(SplitError, match="non-edges"):
        split_holdout(full, 0.5, rng)


def test_split_holdout_rejection_path(rng):
    # large sparse graph forces the rejection sampler for negatives
    n = 800
    g = ObservedGraph(n, tuple((i, i + 1) for i in range(n - 1)))
    assert g.pair_count > 200_000
    train, test = split_holdout(g, 0.1, rng)
    assert test.n_neg == test.n_pos == int(0.1 * (n - 1))
    for i, j, lab in test.dyads:
        if lab == 0:
            assert (i, j) not in g.edge_set()
