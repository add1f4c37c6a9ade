"""Ensemble generation: determinism, validity, perturbation semantics."""

from __future__ import annotations

import numpy as np
import pytest

from mtdist import (
    Agreement,
    EnsembleSpec,
    PerturbationSpec,
    assign_labels,
    classify_agreement,
    elm_distance,
    errors,
    full_agreement_distance,
    generate_ensemble,
    perturb,
    random_base_tree,
    write_mtree,
)
from mtdist.synth import UNKNOWN_LABEL_BASE, preset_schedule


def _zero_spec(seed=0):
    return PerturbationSpec(0, 0.0, 0, 0, seed)


def test_base_tree_minimal():
    t = random_base_tree(3, 1)
    assert t.n_vertices == 3
    assert len(t.leaves) == 2
    for leaf in t.leaves:
        assert -1.0 <= float(t.scalars[leaf]) < 0.0
    assert float(t.scalars[t.root]) == 0.0


def test_base_tree_too_small():
    with pytest.raises(errors.TooSmall):
        random_base_tree(2, 1)


@pytest.mark.parametrize("seed", range(100))
def test_base_tree_structure_over_seeds(seed):
    t = random_base_tree(50, seed)
    assert t.n_vertices == 49  # largest odd count <= 50
    t.validate()
    for v in range(t.n_vertices):
        kids = t.children(v)
        assert len(kids) in (0, 2)  # full binary


def test_base_tree_deterministic():
    labels = lambda t: assign_labels(t, 1.0, 5)
    a = labels(random_base_tree(31, 9))
    b = labels(random_base_tree(31, 9))
    assert write_mtree(a) == write_mtree(b)
    c = labels(random_base_tree(31, 10))
    assert write_mtree(a) != write_mtree(c)


def test_assign_labels_full_fraction_gives_full_agreement():
    t = random_base_tree(15, 2)
    a = assign_labels(t, 1.0, 3)
    b = assign_labels(t, 1.0, 3)
    assert classify_agreement(a, b).case is Agreement.FULL


def test_assign_labels_ceiling_rule():
    t = random_base_tree(27, 4)  # 27 vertices -> 14 leaves
    assert len(t.leaves) == 14
    lt = assign_labels(t, 0.5, 0)
    known = [l for l in lt.leaf_labels() if l <= UNKNOWN_LABEL_BASE]
    assert len(known) == 7
    assert known == list(range(1, 8))


def test_assign_labels_zero_fraction_disagrees():
    t = random_base_tree(9, 6)
    a = assign_labels(t, 0.0, 1)
    b = assign_labels(t, 0.0, 2, unknown_base=2 * UNKNOWN_LABEL_BASE)
    assert classify_agreement(a, b).case is Agreement.DISAGREEMENT


def test_perturb_noop_is_identity():
    lt = assign_labels(random_base_tree(21, 7), 1.0, 7)
    out = perturb(lt, _zero_spec())
    assert write_mtree(out) == write_mtree(lt)
    assert full_agreement_distance(lt, out).distance == 0.0
    assert elm_distance(lt, out).distance == 0.0


def test_perturb_deletion_boundary():
    lt = assign_labels(random_base_tree(9, 3), 0.5, 1)
    n_leaves = len(lt.tree.leaves)
    out = perturb(lt, PerturbationSpec(0, 0.0, 0, n_leaves - 1, 11))
    assert len(out.tree.leaves) == 1
    out.validate()
    with pytest.raises(errors.TooManyDeletions):
        perturb(lt, PerturbationSpec(0, 0.0, 0, n_leaves, 11))


def test_perturb_spares_known_leaves_first():
    lt = assign_labels(random_base_tree(15, 8), 0.5, 2)
    unknowns = sum(1 for l in lt.leaf_labels() if l > UNKNOWN_LABEL_BASE)
    out = perturb(lt, PerturbationSpec(0, 0.0, 0, unknowns, 13))
    survivors = out.leaf_labels()
    assert all(l <= UNKNOWN_LABEL_BASE for l in survivors)
    assert set(survivors) <= {l for l in lt.leaf_labels() if l <= UNKNOWN_LABEL_BASE}


@pytest.mark.parametrize("seed", range(30))
def test_perturbed_trees_stay_valid(seed):
    lt = assign_labels(random_base_tree(33, seed), 0.5, seed)
    spec = PerturbationSpec(
        scalar_update_count=10,
        scalar_magnitude=2.0,  # violent noise; repair must fix everything
        rotation_count=4,
        deletion_count=3,
        seed=seed,
    )
    out = perturb(lt, spec)
    out.validate()


def test_generate_ensemble_size_one():
    members = generate_ensemble(EnsembleSpec(max_vertices=15, ensemble_size=1, seed=4))
    assert len(members) == 1


def test_generate_ensemble_deterministic_and_valid():
    spec = EnsembleSpec(max_vertices=25, ensemble_size=6, seed=12)
    one = generate_ensemble(spec)
    two = generate_ensemble(spec)
    assert [write_mtree(m) for m in one] == [write_mtree(m) for m in two]
    for m in one:
        m.validate()


def test_ensemble_members_share_known_labels():
    members = generate_ensemble(EnsembleSpec(max_vertices=25, ensemble_size=5, seed=3))
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            info = classify_agreement(members[i], members[j])
            assert info.case in (Agreement.PARTIAL, Agreement.FULL)
            assert len(info.known) >= 1


def test_ensemble_unknown_ranges_disjoint():
    members = generate_ensemble(EnsembleSpec(max_vertices=15, ensemble_size=4, seed=5))
    seen: set[int] = set()
    for m in members:
        unknowns = {l for l in m.leaf_labels() if l > UNKNOWN_LABEL_BASE}
        assert not (unknowns & seen)
        seen |= unknowns


def test_preset_ensemble_shrinks_on_average():
    spec = EnsembleSpec(max_vertices=50, ensemble_size=20, seed=7)
    members = generate_ensemble(spec, schedule_kind="preset")
    base_count = members[0].tree.n_vertices
    avg = float(np.mean([m.tree.n_vertices for m in members]))
    assert avg < base_count
    for m in members:
        m.validate()


def test_preset_schedule_escalates():
    spec = EnsembleSpec(max_vertices=50, ensemble_size=20, seed=7)
    base = random_base_tree(50, 0)
    sched = preset_schedule(spec, base)
    assert len(sched) == 19
    assert sched[-1].scalar_magnitude > sched[0].scalar_magnitude
    assert sched[-1].rotation_count >= sched[0].rotation_count


def test_ensemble_spec_validation():
    with pytest.raises(errors.TooSmall):
        EnsembleSpec(max_vertices=2)
    with pytest.raises(errors.ValidationError):
        EnsembleSpec(max_vertices=9, label_fraction=1.5)
    with pytest.raises(errors.ValidationError):
        EnsembleSpec(max_vertices=9, ensemble_size=3, perturbation_schedule=(_zero_spec(),))
