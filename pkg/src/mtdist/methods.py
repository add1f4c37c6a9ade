"""Distance heuristics between partially labeled merge trees.

Three estimators share one objective.  Given a pair of trees, leaf labels are
split into *known* (shared) and *unknown* (one-sided) sets; the *pivot* tree
is the one with more unknown leaves.  A bipartite matching pairs unknown
leaves across the trees, every leaf left aside contributes a merge-height
penalty delta, and the final value is

    distance = max( 0.5 * max_i delta_i , epsilon )

where epsilon is the entrywise max absolute difference of the two LCA-scalar
matrices built over the known plus matched labels (delta over an empty set
is 0, so fully matched instances reduce to epsilon).

* ``elm_distance``  trims the pivot's shallowest unknown leaves first (ranked
  by row sums of the merge-height matrix S), then solves a square matching
  over the survivors.  Trimmed leaves pay delta.
* ``mmb_distance``  solves the rectangular matching directly, with no
  trimming; the pivot's unmatched leaves pay delta.
* ``greedy_distance``  is the prior baseline: after the matching, each
  unmatched pivot leaf keeps its label and the closest-profile leaf of the
  smaller tree additionally receives it; the distance is the epsilon of the
  induced matrices over the full unified label set (no delta term).  It
  refuses disagreement pairs, which would need an embedding to guide it.

Bipartite edge weights follow the agreement case: with shared labels, rows of
the unknown-to-known distance matrices are compared (||D1(i) - D2(j)||_2);
with fully disjoint labels there is no shared column space, so row norms of
the per-tree pairwise leaf distance matrices are compared instead
(| ||D1(i)||_2 - ||D2(j)||_2 |).

``oracle_min_objective`` exhaustively minimizes the same objective over every
trim subset and bijection on small instances, using its own naive traversal
primitives, and is the reference the heuristics are judged against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from time import perf_counter
from typing import Mapping, Sequence

import numpy as np

from . import assignment, errors
from .core import (
    Agreement,
    AgreementInfo,
    LabeledMatrix,
    LabeledMergeTree,
    classify_agreement,
    inf_norm_diff,
)

__all__ = [
    "SMatrix",
    "Matching",
    "MethodResult",
    "build_s_matrix",
    "select_trim",
    "unknown_to_known_distances",
    "pairwise_leaf_distances",
    "elm_distance",
    "mmb_distance",
    "greedy_distance",
    "full_agreement_distance",
    "oracle_min_objective",
    "evaluate_configuration",
]


@dataclass(frozen=True)
class SMatrix:
    """Merge heights from selected leaves (rows) to a leaf subset (columns).

    Entry (i, j) = scalar(lca(v_i, v_j)) - scalar(v_i) >= 0, zero when the
    row leaf also appears as the column.  ``row_sums`` is the appended
    row-sum column used to rank rows for trimming.
    """

    row_labels: tuple[int, ...]
    col_labels: tuple[int, ...]
    entries: np.ndarray
    row_sums: np.ndarray


@dataclass(frozen=True)
class Matching:
    """Matched label pairs plus per-side leftover unknown labels."""

    pairs: tuple[tuple[int, int], ...]
    unmatched_a: tuple[int, ...] = ()
    unmatched_b: tuple[int, ...] = ()


@dataclass(frozen=True)
class MethodResult:
    """A distance value with full provenance.

    ``deltas`` maps each trimmed/unmatched label to its merge height;
    ``relabeling`` maps matched side-B labels to their side-A partners;
    ``assigned_labels`` (baseline only) maps an unmatched pivot label to an
    existing label of the leaf that received it on the other side.
    """

    distance: float
    epsilon: float
    deltas: dict[int, float]
    matching: Matching
    relabeling: dict[int, int]
    trimmed: frozenset[int]
    induced_a: LabeledMatrix
    induced_b: LabeledMatrix
    wall_time: float
    assigned_labels: dict[int, int] = field(default_factory=dict)

    @property
    def max_delta(self) -> float:
        return max(self.deltas.values(), default=0.0)


# ---------------------------------------------------------------------------
# building blocks


def _require_leaves(lt: LabeledMergeTree, labels: Sequence[int]) -> np.ndarray:
    verts = lt.vertices_for(labels)
    for label, v in zip(labels, verts):
        if not lt.tree.is_leaf(int(v)):
            raise errors.NonLeafLabel(f"label {label} is not on a leaf")
    return verts


def _merge_heights(lt: LabeledMergeTree, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    lcas = lt.tree.lca_many(rows[:, None], cols[None, :])
    s = lt.tree.scalars
    return s[lcas] - s[rows][:, None]


def build_s_matrix(
    lt: LabeledMergeTree,
    row_labels: Sequence[int],
    col_labels: Sequence[int],
) -> SMatrix:
    """Merge-height matrix with its row-sum ranking column."""
    row_labels = tuple(row_labels)
    col_labels = tuple(col_labels)
    rows = _require_leaves(lt, row_labels)
    cols = _require_leaves(lt, col_labels)
    entries = _merge_heights(lt, rows, cols)
    return SMatrix(row_labels, col_labels, entries, entries.sum(axis=1))


def select_trim(s: SMatrix, k: int) -> tuple[int, ...]:
    """The k row labels with the smallest row sums, ties to the lowest label."""
    if k > len(s.row_labels):
        raise errors.KTooLarge(f"cannot trim {k} of {len(s.row_labels)} rows")
    ranked = sorted(zip(s.row_sums, s.row_labels))
    return tuple(label for _, label in ranked[:k])


def unknown_to_known_distances(
    lt: LabeledMergeTree,
    unknown: Sequence[int],
    known: Sequence[int],
) -> LabeledMatrix:
    """Path distances from each unknown-labeled vertex to the known ones."""
    unknown = tuple(unknown)
    known = tuple(known)
    rows = lt.vertices_for(unknown)
    cols = lt.vertices_for(known)
    d = lt.tree.path_distance_many(rows[:, None], cols[None, :])
    return LabeledMatrix(unknown, known, d.reshape(len(unknown), len(known)))


def pairwise_leaf_distances(lt: LabeledMergeTree, labels: Sequence[int]) -> LabeledMatrix:
    """Symmetric path-distance matrix over the listed leaves."""
    labels = tuple(labels)
    verts = _require_leaves(lt, labels)
    d = lt.tree.path_distance_many(verts[:, None], verts[None, :])
    return LabeledMatrix(labels, labels, d)


def _row_gap_weights(d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
    """W(i, j) = || d1[i] - d2[j] ||_2 (matrices share a column space)."""
    diff = d1[:, None, :] - d2[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _row_norm_weights(d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
    """W(i, j) = | ||d1[i]||_2 - ||d2[j]||_2 | (column spaces differ)."""
    n1 = np.sqrt(np.einsum("ij,ij->i", d1, d1))
    n2 = np.sqrt(np.einsum("ij,ij->i", d2, d2))
    return np.abs(n1[:, None] - n2[None, :])


def _pivot_is_a(a: LabeledMergeTree, b: LabeledMergeTree, info: AgreementInfo) -> bool:
    """Canonical pivot choice: more unknowns, ties to the lexicographically
    smaller unknown-label list.  Unknown labels are one-sided by definition
    (a shared leaf label is known), so equal-size lists always differ and
    the choice is independent of argument order."""
    if info.n_unknown_a != info.n_unknown_b:
        return info.n_unknown_a > info.n_unknown_b
    return info.unknown_a < info.unknown_b


def _epsilon_matrices(
    a: LabeledMergeTree,
    b: LabeledMergeTree,
    known: Sequence[int],
    pairs_ab: Sequence[tuple[int, int]],
) -> tuple[float, LabeledMatrix, LabeledMatrix]:
    """Induced matrices over known + matched labels, unified under side-A names."""
    by_unified = {l: (l, l) for l in known}
    for la, lb in pairs_ab:
        by_unified[la] = (la, lb)
    unified = tuple(sorted(by_unified))
    va = a.vertices_for([by_unified[l][0] for l in unified])
    vb = b.vertices_for([by_unified[l][1] for l in unified])
    ea = a.tree.scalars[a.tree.lca_many(va[:, None], va[None, :])]
    eb = b.tree.scalars[b.tree.lca_many(vb[:, None], vb[None, :])]
    ma = LabeledMatrix(unified, unified, ea)
    mb = LabeledMatrix(unified, unified, eb)
    return inf_norm_diff(ma, mb), ma, mb


def _delta_map(
    pivot: LabeledMergeTree,
    removed: Sequence[int],
    leaf_labels: Sequence[int],
) -> dict[int, float]:
    """Merge height of each removed leaf above the nearest surviving leaf."""
    removed = tuple(removed)
    if not removed:
        return {}
    survivors = [l for l in leaf_labels if l not in set(removed)]
    rows = pivot.vertices_for(removed)
    cols = pivot.vertices_for(survivors)
    heights = _merge_heights(pivot, rows, cols)
    return {label: float(h.min()) for label, h in zip(removed, heights)}


def _objective(eps: float, deltas: Mapping[int, float]) -> float:
    return max(0.5 * max(deltas.values(), default=0.0), eps)


def _finish_full(
    a: LabeledMergeTree, b: LabeledMergeTree, info: AgreementInfo, start: float
) -> MethodResult:
    eps, ma, mb = _epsilon_matrices(a, b, info.known, ())
    return MethodResult(
        distance=eps,
        epsilon=eps,
        deltas={},
        matching=Matching(()),
        relabeling={},
        trimmed=frozenset(),
        induced_a=ma,
        induced_b=mb,
        wall_time=perf_counter() - start,
    )


def _orient_pairs(pairs_po, pivot_is_a):
    if pivot_is_a:
        return tuple(pairs_po)
    return tuple((o, p) for p, o in pairs_po)


def _check_leaves_for_disagreement(a, b, info):
    if info.case is Agreement.DISAGREEMENT and (
        not a.tree.leaves or not b.tree.leaves
    ):
        raise errors.DisagreementEmptyTree("cannot compare a tree with no leaves")


def _build_result(
    *,
    distance: float,
    eps: float,
    deltas: dict[int, float],
    pairs_ab,
    unmatched_piv,
    pivot_is_a: bool,
    trimmed=(),
    ma: LabeledMatrix,
    mb: LabeledMatrix,
    start: float,
    assigned: dict[int, int] | None = None,
) -> MethodResult:
    unmatched_piv = tuple(unmatched_piv)
    matching = Matching(
        pairs=tuple(sorted(pairs_ab)),
        unmatched_a=unmatched_piv if pivot_is_a else (),
        unmatched_b=() if pivot_is_a else unmatched_piv,
    )
    return MethodResult(
        distance=distance,
        epsilon=eps,
        deltas=deltas,
        matching=matching,
        relabeling={lb: la for la, lb in pairs_ab},
        trimmed=frozenset(trimmed),
        induced_a=ma,
        induced_b=mb,
        wall_time=perf_counter() - start,
        assigned_labels=dict(assigned or {}),
    )


def _match_unknowns(
    piv: LabeledMergeTree,
    oth: LabeledMergeTree,
    piv_rows: tuple[int, ...],
    oth_rows: tuple[int, ...],
    known: tuple[int, ...],
    case: Agreement,
) -> tuple[tuple[tuple[int, int], ...], tuple[int, ...]]:
    """Bipartite matching of unknown leaves; returns (pivot, other) label
    pairs and the pivot labels left unmatched."""
    if case is Agreement.PARTIAL:
        d1 = unknown_to_known_distances(piv, piv_rows, known)
        d2 = unknown_to_known_distances(oth, oth_rows, known)
        weights = _row_gap_weights(d1.entries, d2.entries)
    else:
        d1 = pairwise_leaf_distances(piv, piv_rows)
        d2 = pairwise_leaf_distances(oth, oth_rows)
        weights = _row_norm_weights(d1.entries, d2.entries)
    asn = assignment.solve(weights)
    pairs = tuple((piv_rows[i], oth_rows[j]) for i, j in asn.pairs)
    unmatched = tuple(piv_rows[i] for i in asn.unmatched_rows)
    return pairs, unmatched


# ---------------------------------------------------------------------------
# the estimators


def full_agreement_distance(a: LabeledMergeTree, b: LabeledMergeTree) -> MethodResult:
    """Entrywise max difference of the induced matrices over the shared labels."""
    start = perf_counter()
    info = classify_agreement(a, b)
    if info.case is not Agreement.FULL:
        raise errors.NotFullAgreement(
            f"leaf label sets differ ({info.case.value})"
        )
    return _finish_full(a, b, info, start)


def elm_distance(a: LabeledMergeTree, b: LabeledMergeTree) -> MethodResult:
    """Trim-then-match estimator.

    The pivot's |n1' - n2'| shallowest unknown leaves (smallest S row sums)
    are set aside, the survivors are matched one-to-one against the other
    tree's unknowns, and each trimmed leaf contributes half its merge height
    above the nearest surviving leaf.
    """
    start = perf_counter()
    info = classify_agreement(a, b)
    if info.case is Agreement.FULL:
        return _finish_full(a, b, info, start)
    _check_leaves_for_disagreement(a, b, info)
    pivot_is_a = _pivot_is_a(a, b, info)
    piv, oth = (a, b) if pivot_is_a else (b, a)
    piv_unknown = info.unknown_a if pivot_is_a else info.unknown_b
    oth_unknown = info.unknown_b if pivot_is_a else info.unknown_a

    piv_leaf_labels = piv.leaf_labels()
    s = build_s_matrix(piv, piv_unknown, piv_leaf_labels)
    trimmed = select_trim(s, len(piv_unknown) - len(oth_unknown))
    survivors = tuple(l for l in piv_unknown if l not in set(trimmed))

    if oth_unknown:
        pairs_po, _ = _match_unknowns(
            piv, oth, survivors, oth_unknown, info.known, info.case
        )
    else:
        pairs_po = ()
    pairs_ab = _orient_pairs(pairs_po, pivot_is_a)
    eps, ma, mb = _epsilon_matrices(a, b, info.known, pairs_ab)
    deltas = _delta_map(piv, trimmed, piv_leaf_labels)
    return _build_result(
        distance=_objective(eps, deltas),
        eps=eps,
        deltas=deltas,
        pairs_ab=pairs_ab,
        unmatched_piv=trimmed,
        pivot_is_a=pivot_is_a,
        trimmed=trimmed,
        ma=ma,
        mb=mb,
        start=start,
    )


def mmb_distance(a: LabeledMergeTree, b: LabeledMergeTree) -> MethodResult:
    """Match-first estimator: no trimming.

    The rectangular matching covers min(n1', n2') unknown leaves; every
    unmatched pivot leaf contributes half its merge height above the nearest
    leaf outside the unmatched set.
    """
    start = perf_counter()
    info = classify_agreement(a, b)
    if info.case is Agreement.FULL:
        return _finish_full(a, b, info, start)
    _check_leaves_for_disagreement(a, b, info)
    pivot_is_a = _pivot_is_a(a, b, info)
    piv, oth = (a, b) if pivot_is_a else (b, a)
    piv_unknown = info.unknown_a if pivot_is_a else info.unknown_b
    oth_unknown = info.unknown_b if pivot_is_a else info.unknown_a

    if oth_unknown:
        pairs_po, unmatched = _match_unknowns(
            piv, oth, piv_unknown, oth_unknown, info.known, info.case
        )
    else:
        pairs_po, unmatched = (), piv_unknown
    pairs_ab = _orient_pairs(pairs_po, pivot_is_a)
    eps, ma, mb = _epsilon_matrices(a, b, info.known, pairs_ab)
    deltas = _delta_map(piv, unmatched, piv.leaf_labels())
    return _build_result(
        distance=_objective(eps, deltas),
        eps=eps,
        deltas=deltas,
        pairs_ab=pairs_ab,
        unmatched_piv=unmatched,
        pivot_is_a=pivot_is_a,
        ma=ma,
        mb=mb,
        start=start,
    )


def greedy_distance(a: LabeledMergeTree, b: LabeledMergeTree) -> MethodResult:
    """Prior baseline: unmatched pivot leaves push their labels across.

    After the rectangular matching, each unmatched pivot leaf's distance
    profile to the newly known labels is compared against every leaf of the
    smaller tree; the closest leaf additionally receives the label.  The
    distance is the epsilon over the full unified label set.
    """
    start = perf_counter()
    info = classify_agreement(a, b)
    if info.case is Agreement.FULL:
        return _finish_full(a, b, info, start)
    if info.case is Agreement.DISAGREEMENT:
        raise errors.DisagreementUnsupported(
            "baseline needs embedding coordinates when no labels are shared"
        )
    pivot_is_a = _pivot_is_a(a, b, info)
    piv, oth = (a, b) if pivot_is_a else (b, a)
    piv_unknown = info.unknown_a if pivot_is_a else info.unknown_b
    oth_unknown = info.unknown_b if pivot_is_a else info.unknown_a

    if oth_unknown:
        pairs_po, unmatched = _match_unknowns(
            piv, oth, piv_unknown, oth_unknown, info.known, info.case
        )
    else:
        pairs_po, unmatched = (), piv_unknown
    pairs_ab = _orient_pairs(pairs_po, pivot_is_a)

    # newly known = original known plus matched pairs, ordered by unified name
    by_unified = {l: (l, l) for l in info.known}
    for la, lb in pairs_ab:
        by_unified[la] = (la, lb)
    newly = tuple(sorted(by_unified))
    piv_idx, oth_idx = (0, 1) if pivot_is_a else (1, 0)
    piv_nk = piv.vertices_for([by_unified[l][piv_idx] for l in newly])
    oth_nk = oth.vertices_for([by_unified[l][oth_idx] for l in newly])

    grants: dict[int, int] = {}
    grant_vertices: dict[int, int] = {}
    if unmatched:
        # candidate receivers: leaves of the smaller tree, by smallest label
        cand = sorted(oth.tree.leaves, key=lambda v: oth.labels.labels_of(v)[0])
        cand_v = np.asarray(cand, dtype=np.int64)
        ds = oth.tree.path_distance_many(cand_v[:, None], oth_nk[None, :])
        um_v = piv.vertices_for(unmatched)
        dmat = piv.tree.path_distance_many(um_v[:, None], piv_nk[None, :])
        for label, drow in zip(unmatched, dmat):
            gaps = ds - drow[None, :]
            j = int(np.argmin(np.einsum("ij,ij->i", gaps, gaps)))
            grant_vertices[label] = cand[j]
            grants[label] = oth.labels.labels_of(cand[j])[0]

    unified = tuple(sorted(set(newly) | set(unmatched)))
    va_piv = np.asarray(
        [piv.labels.vertex_of(by_unified[l][piv_idx]) if l in by_unified
         else piv.labels.vertex_of(l) for l in unified],
        dtype=np.int64,
    )
    va_oth = np.asarray(
        [oth.labels.vertex_of(by_unified[l][oth_idx]) if l in by_unified
         else grant_vertices[l] for l in unified],
        dtype=np.int64,
    )
    e_piv = piv.tree.scalars[piv.tree.lca_many(va_piv[:, None], va_piv[None, :])]
    e_oth = oth.tree.scalars[oth.tree.lca_many(va_oth[:, None], va_oth[None, :])]
    m_piv = LabeledMatrix(unified, unified, e_piv)
    m_oth = LabeledMatrix(unified, unified, e_oth)
    eps = inf_norm_diff(m_piv, m_oth)
    ma, mb = (m_piv, m_oth) if pivot_is_a else (m_oth, m_piv)
    return _build_result(
        distance=eps,
        eps=eps,
        deltas={},
        pairs_ab=pairs_ab,
        unmatched_piv=unmatched,
        pivot_is_a=pivot_is_a,
        ma=ma,
        mb=mb,
        start=start,
        assigned=grants,
    )


# ---------------------------------------------------------------------------
# configuration re-evaluation and the exhaustive reference


def evaluate_configuration(
    a: LabeledMergeTree,
    b: LabeledMergeTree,
    *,
    removed: Sequence[int],
    pairs: Sequence[tuple[int, int]],
) -> float:
    """Objective value of an explicit (removed set, matching) configuration.

    ``removed`` holds pivot-side labels set aside (trimmed or unmatched);
    ``pairs`` are (side-A label, side-B label) matches.  Uses the same
    epsilon/delta computations as the estimators, so re-evaluating a
    reported configuration reproduces the reported distance exactly.
    """
    info = classify_agreement(a, b)
    if info.case is Agreement.FULL:
        eps, _, _ = _epsilon_matrices(a, b, info.known, ())
        return eps
    pivot_is_a = _pivot_is_a(a, b, info)
    piv = a if pivot_is_a else b
    eps, _, _ = _epsilon_matrices(a, b, info.known, pairs)
    deltas = _delta_map(piv, removed, piv.leaf_labels())
    return _objective(eps, deltas)


def _naive_lca(parents: Sequence[int], u: int, v: int) -> int:
    chain = set()
    x = u
    while x != -1:
        chain.add(x)
        x = parents[x]
    x = v
    while x not in chain:
        x = parents[x]
    return x


def oracle_min_objective(
    a: LabeledMergeTree,
    b: LabeledMergeTree,
    *,
    max_unknown_total: int = 8,
) -> float:
    """Exhaustive minimum of the shared objective on small instances.

    Enumerates every trim subset of the required size and every bijection
    between the surviving unknown leaves, scoring each configuration with
    naive parent-walk primitives (independent of the vectorized code paths).
    Raises TooLarge beyond ``max_unknown_total`` combined unknown leaves.
    """
    info = classify_agreement(a, b)
    total = info.n_unknown_a + info.n_unknown_b
    if total > max_unknown_total:
        raise errors.TooLarge(
            f"{total} combined unknown leaves exceeds the bound {max_unknown_total}"
        )
    _check_leaves_for_disagreement(a, b, info)

    pa = [int(x) for x in a.tree.parents]
    pb = [int(x) for x in b.tree.parents]
    sa, sb = a.tree.scalars, b.tree.scalars

    def eps_of(pairs_ab) -> float:
        labels = {l: (l, l) for l in info.known}
        for la, lb in pairs_ab:
            labels[la] = (la, lb)
        ordered = sorted(labels)
        worst = 0.0
        for i, li in enumerate(ordered):
            for lj in ordered[i:]:
                ua = a.labels.vertex_of(labels[li][0])
                va = a.labels.vertex_of(labels[lj][0])
                ub = b.labels.vertex_of(labels[li][1])
                vb = b.labels.vertex_of(labels[lj][1])
                ea = sa[_naive_lca(pa, ua, va)]
                eb = sb[_naive_lca(pb, ub, vb)]
                worst = max(worst, abs(float(ea) - float(eb)))
        return worst

    if info.case is Agreement.FULL:
        return eps_of(())

    a_is_pivot = info.n_unknown_a >= info.n_unknown_b
    piv = a if a_is_pivot else b
    piv_par = pa if a_is_pivot else pb
    piv_s = sa if a_is_pivot else sb
    piv_unknown = info.unknown_a if a_is_pivot else info.unknown_b
    oth_unknown = info.unknown_b if a_is_pivot else info.unknown_a
    piv_leaf_labels = piv.leaf_labels()
    k = len(piv_unknown) - len(oth_unknown)

    def delta_of(removed: tuple[int, ...]) -> float:
        worst = 0.0
        removed_set = set(removed)
        for r in removed:
            vr = piv.labels.vertex_of(r)
            best = None
            for l in piv_leaf_labels:
                if l in removed_set:
                    continue
                vl = piv.labels.vertex_of(l)
                h = float(piv_s[_naive_lca(piv_par, vr, vl)] - piv_s[vr])
                best = h if best is None else min(best, h)
            worst = max(worst, 0.0 if best is None else best)
        return worst

    best = np.inf
    for removed in itertools.combinations(piv_unknown, k):
        survivors = [l for l in piv_unknown if l not in set(removed)]
        dmax = delta_of(removed)
        for perm in itertools.permutations(oth_unknown):
            pairs_po = tuple(zip(survivors, perm))
            pairs_ab = pairs_po if a_is_pivot else tuple(
                (o, p) for p, o in pairs_po
            )
            value = max(0.5 * dmax, eps_of(pairs_ab))
            if value < best:
                best = value
    return float(best)
