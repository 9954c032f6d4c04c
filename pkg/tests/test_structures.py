from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maskrel.structures import (Leaf, Max, Min, StructureError, SystemStructure, classify_components,
                                eval_lifetime, masked_candidate_set, minimal_cut_sets, parallel,
                                parse_structure, series)

TWO_OF_THREE = "max(min(1,2), min(1,3), min(2,3))"
SYSTEM2 = "min(max(1,2), max(min(3,4), 5))"
BRIDGE = "max(min(1,4), min(2,5), min(1,3,5), min(2,3,4))"


@st.composite
def structures(draw, max_m=6):
    m = draw(st.integers(2, max_m))
    nodes = [Leaf(j) for j in draw(st.permutations(range(1, m + 1)))]
    while len(nodes) > 1:
        k = draw(st.integers(2, len(nodes)))
        picked, nodes = nodes[:k], nodes[k:]
        op = Min if draw(st.booleans()) else Max
        nodes.insert(draw(st.integers(0, len(nodes))), op(tuple(picked)))
    return SystemStructure(nodes[0], m)


def lifetimes(m):
    return st.lists(st.floats(0.01, 100, allow_nan=False), min_size=m, max_size=m, unique=True)


def is_cut(s, subset):
    x = np.full(s.m, np.inf)
    x[np.asarray(subset, dtype=int) - 1] = 0.0
    return eval_lifetime(s, x) == 0.0


def brute_force_cuts(s):
    # every subset, no pruning: a cut whose proper subsets are all non-cuts
    cuts = []
    for size in range(1, s.m + 1):
        for c in combinations(range(1, s.m + 1), size):
            if is_cut(s, c) and not any(is_cut(s, sub) for k in range(1, size) for sub in combinations(c, k)):
                cuts.append(c)
    return cuts


def test_parse_roundtrip_and_aliases():
    s = parse_structure(TWO_OF_THREE)
    assert s.m == 3
    assert str(s) == "max(min(1, 2), min(1, 3), min(2, 3))"
    assert parse_structure(str(s)) == s
    assert parse_structure("series(1,2,3)") == series(3)
    assert parse_structure("parallel(1, 2)") == parallel(2)


@pytest.mark.parametrize("text", ["", "min(1)", "min(1,2", "min(1,2))", "foo(1,2)", "min(0,1)", "min(1,,2)"])
def test_parse_rejects_malformed(text):
    with pytest.raises(StructureError):
        parse_structure(text)


def test_leaves_must_cover_components():
    with pytest.raises(StructureError):
        parse_structure("min(1,3)")
    with pytest.raises(StructureError):
        parse_structure("min(1,2)", m=3)


def test_eval_lifetime_examples():
    assert eval_lifetime(parse_structure(TWO_OF_THREE), [1, 2, 3]) == 2
    assert eval_lifetime(parse_structure(SYSTEM2), [1, 5, 2, 3, 4]) == 4
    assert eval_lifetime(series(2), [7, 3]) == 3


def test_eval_lifetime_is_vectorised():
    s = parse_structure(TWO_OF_THREE)
    x = np.array([[1, 2, 3], [5, 4, 6], [9, 1, 2]])
    np.testing.assert_array_equal(eval_lifetime(s, x), [2, 5, 2])
    with pytest.raises(StructureError):
        eval_lifetime(s, [1, 2])


def test_cut_set_examples():
    assert minimal_cut_sets(parse_structure(BRIDGE)) == [(1, 2), (4, 5), (1, 3, 5), (2, 3, 4)]
    assert minimal_cut_sets(series(3)) == [(1,), (2,), (3,)]
    assert minimal_cut_sets(parse_structure(TWO_OF_THREE)) == [(1, 2), (1, 3), (2, 3)]
    assert minimal_cut_sets(parallel(3)) == [(1, 2, 3)]


@settings(max_examples=60, deadline=None)
@given(structures())
def test_cut_sets_match_brute_force(s):
    assert minimal_cut_sets(s) == brute_force_cuts(s)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_cut_representation_identity(data):
    s = data.draw(structures())
    x = np.array(data.draw(lifetimes(s.m)))
    via_cuts = min(max(x[j - 1] for j in c) for c in s.cut_sets)
    assert eval_lifetime(s, x) == via_cuts


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_lifetime_is_monotone(data):
    s = data.draw(structures())
    x = np.array(data.draw(lifetimes(s.m)))
    j = data.draw(st.integers(0, s.m - 1))
    bump = data.draw(st.floats(0, 50))
    y = x.copy()
    y[j] += bump
    assert eval_lifetime(s, y) >= eval_lifetime(s, x)


def test_classify_examples():
    t, delta = classify_components(series(2), [7, 3])
    assert t == 3 and list(delta) == [2, 1]
    t, delta = classify_components(parse_structure(TWO_OF_THREE), [1, 2, 3])
    assert t == 2 and list(delta) == [3, 1, 2]


def test_classify_bridge_against_direct_comparison():
    s = parse_structure(BRIDGE)
    x = np.array([1, 2, 5, 4, 3.0])
    t, delta = classify_components(s, x)
    assert t == eval_lifetime(s, x)
    expected = np.where(x == t, 1, np.where(x > t, 2, 3))
    np.testing.assert_array_equal(delta, expected)


def test_masked_candidate_examples():
    bridge = parse_structure(BRIDGE)
    # components 1, 2, 3 dead, {1,2} completes the failure
    x = [1.0, 2.0, 0.5, 9.0, 8.0]
    assert masked_candidate_set(bridge, x) == (1, 2)
    _, delta = classify_components(bridge, x)
    assert delta[2] == 3
    assert masked_candidate_set(series(3), [5, 1, 4]) == (2,)
    assert masked_candidate_set(parse_structure(TWO_OF_THREE), [1, 2, 3]) == (1, 2)


@settings(max_examples=80, deadline=None)
@given(st.data())
def test_masked_set_holds_cause_and_only_dead(data):
    s = data.draw(structures())
    x = np.array(data.draw(lifetimes(s.m)))
    t, delta = classify_components(s, x)
    assert np.sum(delta == 1) == 1
    cut = masked_candidate_set(s, x, delta)
    assert cut in s.cut_sets
    assert int(np.flatnonzero(delta == 1)[0]) + 1 in cut
    assert all(x[j - 1] <= t for j in cut)


def test_ties_pick_cause_inside_a_failing_cut():
    s = parse_structure(TWO_OF_THREE)
    t, delta = classify_components(s, [2.0, 2.0, 5.0])
    assert t == 2.0
    assert list(delta) == [1, 3, 2]
    assert masked_candidate_set(s, [2.0, 2.0, 5.0]) == (1, 2)


def test_size_limit():
    with pytest.raises(StructureError):
        series(21)
