"""The three estimators, the exact full-agreement distance, and the oracle."""

from __future__ import annotations

import numpy as np
import pytest

from mtdist import (
    Agreement,
    LabelTable,
    LabeledMergeTree,
    MergeTree,
    build_s_matrix,
    classify_agreement,
    elm_distance,
    errors,
    evaluate_configuration,
    full_agreement_distance,
    greedy_distance,
    mmb_distance,
    oracle_min_objective,
    pairwise_leaf_distances,
    select_trim,
    unknown_to_known_distances,
)
from mtdist.methods import SMatrix

from conftest import random_pair, rescaled


# -- building blocks -------------------------------------------------------------


def test_s_matrix_example1(example1):
    a, _ = example1
    s = build_s_matrix(a, (3, 4), a.leaf_labels())
    assert s.col_labels == (1, 2, 3, 4)
    assert s.entries.tolist() == [[2, 2, 0, 1], [3, 3, 2, 0]]
    assert s.row_sums.tolist() == [5, 8]


def test_s_matrix_example3(example3):
    a, _ = example3
    s = build_s_matrix(a, (2, 3), a.leaf_labels())
    assert s.entries.tolist() == [[1, 0, 3, 3], [1, 1, 0, 1]]
    assert s.row_sums.tolist() == [7, 3]


def test_s_matrix_single_leaf():
    lt = LabeledMergeTree(
        MergeTree([1.0, 0.0, 0.2], [None, 0, 0]), LabelTable({1: 1, 2: 2})
    )
    s = build_s_matrix(lt, (1,), (1,))
    assert s.entries.tolist() == [[0.0]]
    assert s.row_sums.tolist() == [0.0]


def test_s_matrix_rejects_nonleaf(example1):
    a, _ = example1
    lt = a.with_extra_labels({99: a.tree.root})
    with pytest.raises(errors.NonLeafLabel):
        build_s_matrix(lt, (99,), lt.leaf_labels())


def test_select_trim_values_and_ties(example1, example3):
    a1, _ = example1
    s1 = build_s_matrix(a1, (3, 4), a1.leaf_labels())
    assert select_trim(s1, 1) == (3,)
    a3, _ = example3
    s3 = build_s_matrix(a3, (2, 3), a3.leaf_labels())
    assert select_trim(s3, 1) == (3,)
    tied = SMatrix((5, 6, 7), (5, 6, 7), np.zeros((3, 3)), np.array([2.0, 2.0, 2.0]))
    assert select_trim(tied, 1) == (5,)
    assert select_trim(tied, 2) == (5, 6)
    with pytest.raises(errors.KTooLarge):
        select_trim(tied, 4)


def test_unknown_to_known_distances_fixture(example1):
    a, b = example1
    up = unknown_to_known_distances(a, (3, 4), (1, 2))
    assert up.entries.tolist() == [[5, 5], [6, 6]]
    u2 = unknown_to_known_distances(b, (5,), (1, 2))
    assert u2.entries.tolist() == [[6, 6]]
    empty = unknown_to_known_distances(a, (3, 4), ())
    assert empty.entries.shape == (2, 0)


def test_pairwise_leaf_distances(example2):
    _, b = example2
    single = pairwise_leaf_distances(b, (1,))
    assert single.entries.tolist() == [[0.0]]
    both = pairwise_leaf_distances(b, (1, 2))
    assert both.entries.tolist() == [[0.0, 12.0], [12.0, 0.0]]


# -- golden outcomes --------------------------------------------------------------


def test_example1_all_methods(example1):
    a, b = example1
    r_elm = elm_distance(a, b)
    assert r_elm.distance == 0.5
    assert r_elm.trimmed == {3}
    assert r_elm.deltas == {3: 1.0}
    assert r_elm.epsilon == 0.0
    assert r_elm.matching.pairs == ((4, 5),)
    assert r_elm.induced_a.entries.tolist() == [[0, 2, 3], [2, 0, 3], [3, 3, 0]]
    assert r_elm.induced_b.entries.tolist() == [[0, 2, 3], [2, 0, 3], [3, 3, 0]]
    r_mmb = mmb_distance(a, b)
    assert r_mmb.distance == 0.5
    assert r_mmb.matching.pairs == ((4, 5),)
    assert r_mmb.matching.unmatched_a == (3,)
    r_g = greedy_distance(a, b)
    assert r_g.distance == 2.0
    assert r_g.assigned_labels == {3: 5}


def test_example2_all_methods(example2):
    a, b = example2
    r_elm = elm_distance(a, b)
    assert r_elm.distance == 0.5
    assert r_elm.trimmed == {3, 4, 5}
    assert r_elm.deltas == {3: 1.0, 4: 1.0, 5: 1.0}
    assert r_elm.induced_a.entries.tolist() == [[0, 6], [6, 0]]
    assert r_elm.induced_b.entries.tolist() == [[0, 6], [6, 0]]
    r_mmb = mmb_distance(a, b)
    assert r_mmb.distance == 0.5
    assert r_mmb.deltas == {3: 1.0, 4: 1.0, 5: 1.0}
    r_g = greedy_distance(a, b)
    assert r_g.distance == 3.0
    assert r_g.assigned_labels == {3: 2, 4: 2, 5: 2}


def test_example3_all_methods(example3):
    a, b = example3
    r_elm = elm_distance(a, b)
    assert r_elm.distance == 2.0
    assert r_elm.trimmed == {3}
    assert r_elm.epsilon == 2.0
    assert r_elm.induced_a.entries.tolist() == [[0, 1, 3], [1, 0, 3], [3, 3, 1]]
    assert r_elm.induced_b.entries.tolist() == [[0, 3, 3], [3, 2, 3], [3, 3, 1]]
    r_mmb = mmb_distance(a, b)
    assert r_mmb.distance == 0.5
    assert r_mmb.matching.pairs == ((3, 5),)
    assert r_mmb.deltas == {2: 1.0}
    r_g = greedy_distance(a, b)
    assert r_g.distance == 1.0
    assert r_g.assigned_labels == {2: 1}


def test_oracle_on_fixtures(example1, example2, example3):
    for pair, want in [(example1, 0.5), (example2, 0.5), (example3, 0.5)]:
        assert oracle_min_objective(*pair) == want


# -- full agreement ----------------------------------------------------------------


def _full_pair():
    t1 = MergeTree([3.0, 0.0, 1.0], [None, 0, 0])
    t2 = MergeTree([3.5, 0.0, 1.0], [None, 0, 0])
    la = LabelTable({1: 1, 2: 2})
    return LabeledMergeTree(t1, la), LabeledMergeTree(t2, LabelTable({1: 1, 2: 2}))


def test_full_agreement_identity(example1):
    a, _ = example1
    assert full_agreement_distance(a, a).distance == 0.0
    assert elm_distance(a, a).distance == 0.0
    assert mmb_distance(a, a).distance == 0.0
    assert greedy_distance(a, a).distance == 0.0


def test_full_agreement_matches_direct_subtraction():
    a, b = _full_pair()
    res = full_agreement_distance(a, b)
    want = float(np.max(np.abs(res.induced_a.entries - res.induced_b.entries)))
    assert res.distance == want == 0.5
    assert res.deltas == {}


def test_full_agreement_requires_equal_labels(example1):
    a, b = example1
    with pytest.raises(errors.NotFullAgreement):
        full_agreement_distance(a, b)


def test_methods_dispatch_full_agreement():
    a, b = _full_pair()
    want = full_agreement_distance(a, b).distance
    assert elm_distance(a, b).distance == want
    assert mmb_distance(a, b).distance == want
    assert greedy_distance(a, b).distance == want


# -- disagreement ------------------------------------------------------------------


def _disjoint_pair():
    a, b = random_pair(99, max_vertices=9, label_fraction=0.0)
    assert classify_agreement(a, b).case is Agreement.DISAGREEMENT
    return a, b


def test_greedy_refuses_disagreement():
    a, b = _disjoint_pair()
    with pytest.raises(errors.DisagreementUnsupported):
        greedy_distance(a, b)


def test_heuristics_handle_disagreement():
    a, b = _disjoint_pair()
    for fn in (elm_distance, mmb_distance):
        res = fn(a, b)
        assert res.distance >= 0.0
        assert res.distance >= res.epsilon


def test_disagreement_empty_tree_rejected():
    lone = LabeledMergeTree(MergeTree([0.0], [None]), LabelTable({}))
    a, _ = _disjoint_pair()
    with pytest.raises(errors.DisagreementEmptyTree):
        elm_distance(lone, a)
    with pytest.raises(errors.DisagreementEmptyTree):
        mmb_distance(a, lone)


# -- properties ---------------------------------------------------------------------


def _methods_for(info_case):
    if info_case is Agreement.DISAGREEMENT:
        return (elm_distance, mmb_distance)
    return (elm_distance, mmb_distance, greedy_distance)


@pytest.mark.parametrize("seed", range(25))
def test_distance_dominates_parts_and_symmetry(seed):
    fraction = 0.0 if seed % 5 == 4 else 0.5
    a, b = random_pair(seed, max_vertices=13, label_fraction=fraction)
    case = classify_agreement(a, b).case
    for fn in _methods_for(case):
        r = fn(a, b)
        assert r.distance >= 0.0
        assert r.distance >= r.epsilon
        for delta in r.deltas.values():
            assert r.distance >= 0.5 * delta - 1e-12
        assert fn(b, a).distance == r.distance


@pytest.mark.parametrize("seed", range(20))
def test_reported_configuration_reproduces_distance(seed):
    a, b = random_pair(seed, max_vertices=11)
    r1 = elm_distance(a, b)
    assert (
        evaluate_configuration(a, b, removed=sorted(r1.trimmed), pairs=r1.matching.pairs)
        == r1.distance
    )
    r2 = mmb_distance(a, b)
    removed = r2.matching.unmatched_a + r2.matching.unmatched_b
    assert (
        evaluate_configuration(a, b, removed=removed, pairs=r2.matching.pairs)
        == r2.distance
    )


def _oracle_eligible_pairs(count, *, max_vertices=9, start_seed=0, budget=6):
    seed = start_seed
    found = 0
    while found < count:
        fraction = 0.0 if seed % 4 == 3 else 0.5
        a, b = random_pair(seed, max_vertices=max_vertices, label_fraction=fraction)
        info = classify_agreement(a, b)
        if info.n_unknown_a + info.n_unknown_b <= budget:
            yield a, b
            found += 1
        seed += 1


def test_oracle_lower_bounds_heuristics():
    for a, b in _oracle_eligible_pairs(40):
        o = oracle_min_objective(a, b)
        assert o <= elm_distance(a, b).distance + 1e-12
        assert o <= mmb_distance(a, b).distance + 1e-12


def test_oracle_guard():
    a, b = random_pair(1, max_vertices=31)
    info = classify_agreement(a, b)
    assert info.n_unknown_a + info.n_unknown_b > 8
    with pytest.raises(errors.TooLarge):
        oracle_min_objective(a, b)


def test_oracle_identical_trees(example2):
    a, _ = example2
    assert oracle_min_objective(a, a) == 0.0


@pytest.mark.parametrize("seed", range(12))
def test_shift_invariance_and_scale_covariance(seed):
    a, b = random_pair(seed, max_vertices=13)
    case = classify_agreement(a, b).case
    for fn in _methods_for(case):
        base = fn(a, b)
        shifted = fn(rescaled(a, add=0.37), rescaled(b, add=0.37))
        assert abs(shifted.distance - base.distance) < 1e-9
        scaled = fn(rescaled(a, mul=2.0), rescaled(b, mul=2.0))
        assert scaled.distance == 2.0 * base.distance
        assert scaled.trimmed == base.trimmed
        assert scaled.matching.pairs == base.matching.pairs
