"""Merge tree data model and topological primitives.

A merge tree is a rooted tree with one scalar value per vertex, strictly
decreasing from the root towards the leaves.  The tree metric is induced by
scalar differences along edges, so the distance between two vertices is

    d(u, v) = 2 * scalar(lca(u, v)) - scalar(u) - scalar(v).

Labels are positive integers attached to vertices.  Every leaf must carry at
least one label; a vertex may carry several (the label map need not be
injective).  The square *induced matrix* over a list of labels holds the
scalar of the lowest common ancestor of each label pair, with the vertex's
own scalar on the diagonal.

All types here are immutable after construction and all operations are pure,
so values can be shared freely across worker processes.

LCA queries are O(1) after an O(V log V) Euler-tour / sparse-table build,
which is cached lazily on the tree.  Vectorized variants (``lca_many``)
accept broadcastable index arrays and are the workhorse for building the
distance and induced matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import errors

__all__ = [
    "MergeTree",
    "LabelTable",
    "LabeledMergeTree",
    "LabeledMatrix",
    "Agreement",
    "AgreementInfo",
    "induced_matrix",
    "inf_norm_diff",
    "classify_agreement",
]


class _LcaIndex:
    """Euler tour + sparse table for O(1) LCA, plus per-vertex min-descendant."""

    __slots__ = ("first", "euler", "edepth", "table", "logs", "min_desc")

    def __init__(self, tree: "MergeTree"):
        n = tree.n_vertices
        order: list[int] = []  # euler tour of vertex ids
        depths: list[int] = []
        first = np.full(n, -1, dtype=np.int64)
        # iterative DFS; children visited in storage order
        stack: list[tuple[int, int, int]] = [(tree.root, 0, 0)]  # (vertex, depth, child idx)
        children = tree._children
        while stack:
            v, d, ci = stack.pop()
            if ci == 0:
                first[v] = len(order)
            order.append(v)
            depths.append(d)
            kids = children[v]
            if ci < len(kids):
                stack.append((v, d, ci + 1))
                stack.append((kids[ci], d + 1, 0))
        if np.any(first < 0):
            missing = int(np.flatnonzero(first < 0)[0])
            raise errors.CycleDetected(f"vertex {missing} is not reachable from the root")

        self.first = first
        self.euler = np.asarray(order, dtype=np.int64)
        self.edepth = np.asarray(depths, dtype=np.int64)

        m = len(order)
        logs = np.zeros(m + 1, dtype=np.int64)
        for i in range(2, m + 1):
            logs[i] = logs[i // 2] + 1
        self.logs = logs
        k_max = int(logs[m]) + 1
        table = np.empty((k_max, m), dtype=np.int64)
        table[0] = np.arange(m)
        for k in range(1, k_max):
            half = 1 << (k - 1)
            span = 1 << k
            prev = table[k - 1]
            left = prev[: m - span + 1]
            right = prev[half : m - span + 1 + half]
            table[k, : m - span + 1] = np.where(
                self.edepth[left] <= self.edepth[right], left, right
            )
        self.table = table

        # minimum scalar among descendants-or-self, bottom-up over the tour
        min_desc = tree._scalars.copy()
        for v in self.euler[::-1]:
            p = tree._parents[v]
            if p >= 0 and min_desc[v] < min_desc[p]:
                min_desc[p] = min_desc[v]
        self.min_desc = min_desc

    def lca_many(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        lo = self.first[us]
        hi = self.first[vs]
        lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
        j = self.logs[hi - lo + 1]
        a = self.table[j, lo]
        b = self.table[j, hi - (1 << j) + 1]
        pick = np.where(self.edepth[a] <= self.edepth[b], a, b)
        return self.euler[pick]


class MergeTree:
    """Rooted tree with a scalar per vertex, decreasing from root to leaves.

    Construction only derives structure (children lists, root, leaves); call
    :meth:`validate` to check the full invariants.  Vertex ids are dense
    0..V-1 and stable for the lifetime of the tree.
    """

    __slots__ = ("_scalars", "_parents", "_children", "_root", "_leaves", "_index")

    def __init__(self, scalars: Sequence[float], parents: Sequence[int | None]):
        s = np.asarray(scalars, dtype=np.float64)
        if s.ndim != 1 or len(s) == 0:
            raise errors.ValidationError("a tree needs at least one vertex")
        p = np.asarray(
            [-1 if q is None else int(q) for q in parents], dtype=np.int64
        )
        if len(p) != len(s):
            raise errors.ValidationError("scalars and parents differ in length")
        if np.any((p < -1) | (p >= len(s))):
            raise errors.InvalidVertex("parent index out of range")
        self._scalars = s
        self._scalars.setflags(write=False)
        self._parents = p
        self._parents.setflags(write=False)
        roots = np.flatnonzero(p == -1)
        if len(roots) == 0:
            raise errors.CycleDetected("no root: every vertex has a parent")
        if len(roots) > 1:
            raise errors.MultipleRoots(f"vertices {roots.tolist()} all lack a parent")
        self._root = int(roots[0])
        children: list[list[int]] = [[] for _ in range(len(s))]
        for v, q in enumerate(p):
            if q >= 0:
                children[q].append(v)
        self._children = tuple(tuple(c) for c in children)
        self._leaves = tuple(
            v for v in range(len(s)) if v != self._root and not children[v]
        )
        self._index: _LcaIndex | None = None

    # -- structure ---------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self._scalars)

    @property
    def scalars(self) -> np.ndarray:
        return self._scalars

    @property
    def parents(self) -> np.ndarray:
        return self._parents

    @property
    def root(self) -> int:
        return self._root

    @property
    def leaves(self) -> tuple[int, ...]:
        """Childless non-root vertices (a single-vertex tree has none)."""
        return self._leaves

    def children(self, v: int) -> tuple[int, ...]:
        return self._children[self._check_vertex(v)]

    def parent(self, v: int) -> int | None:
        p = int(self._parents[self._check_vertex(v)])
        return None if p < 0 else p

    def is_leaf(self, v: int) -> bool:
        v = self._check_vertex(v)
        return v != self._root and not self._children[v]

    def _check_vertex(self, v: int) -> int:
        if not 0 <= int(v) < self.n_vertices:
            raise errors.InvalidVertex(f"vertex {v} not in 0..{self.n_vertices - 1}")
        return int(v)

    def validate(self) -> None:
        """Check semantic validity; raises the first violation found.

        Raises CycleDetected or MultipleRoots (partly at construction),
        NonDecreasingScalar on a child at or above its parent, and a plain
        ValidationError on non-finite scalars.  Interior vertices with a
        single child are valid (they change no LCA scalar or distance);
        the file loader splices them out as a canonicalization.
        """
        if not np.all(np.isfinite(self._scalars)):
            bad = int(np.flatnonzero(~np.isfinite(self._scalars))[0])
            raise errors.ValidationError(f"vertex {bad} has a non-finite scalar")
        self._ensure_index()  # raises CycleDetected on unreachable vertices
        nonroot = np.flatnonzero(self._parents >= 0)
        bad = nonroot[
            self._scalars[nonroot] >= self._scalars[self._parents[nonroot]]
        ]
        if len(bad):
            v = int(bad[0])
            raise errors.NonDecreasingScalar(
                f"vertex {v} (scalar {self._scalars[v]}) is not strictly below "
                f"its parent {int(self._parents[v])} "
                f"(scalar {self._scalars[self._parents[v]]})"
            )

    # -- topology queries ----------------------------------------------------

    def _ensure_index(self) -> _LcaIndex:
        if self._index is None:
            self._index = _LcaIndex(self)
        return self._index

    def lca(self, u: int, v: int) -> int:
        """Deepest vertex that is an ancestor-or-self of both u and v."""
        self._check_vertex(u)
        self._check_vertex(v)
        idx = self._ensure_index()
        return int(idx.lca_many(np.asarray([u]), np.asarray([v]))[0])

    def lca_many(self, us, vs) -> np.ndarray:
        """Vectorized LCA over broadcastable arrays of vertex ids."""
        idx = self._ensure_index()
        us, vs = np.broadcast_arrays(np.asarray(us), np.asarray(vs))
        if us.size == 0:
            return np.zeros(us.shape, dtype=np.int64)
        return idx.lca_many(us, vs)

    def path_distance(self, u: int, v: int) -> float:
        """Length of the tree path between u and v under the scalar metric."""
        a = self.lca(u, v)
        s = self._scalars
        # summed as two non-negative legs; addition commutes, so swapping
        # u and v gives the bit-identical result
        return float((s[a] - s[u]) + (s[a] - s[v]))

    def path_distance_many(self, us, vs) -> np.ndarray:
        us = np.asarray(us)
        vs = np.asarray(vs)
        lcas = self.lca_many(us, vs)
        s = self._scalars
        return (s[lcas] - s[us]) + (s[lcas] - s[vs])

    def depth(self, v: int) -> float:
        """Scalar of v minus the minimum scalar among its descendants-or-self."""
        self._check_vertex(v)
        idx = self._ensure_index()
        return float(self._scalars[v] - idx.min_desc[v])

    # pickling: drop the cached index (cheap to rebuild, shrinks payloads)
    def __getstate__(self):
        return (np.asarray(self._scalars), np.asarray(self._parents))

    def __setstate__(self, state):
        scalars, parents = state
        tmp = MergeTree(scalars, [None if p < 0 else int(p) for p in parents])
        for name in MergeTree.__slots__:
            setattr(self, name, getattr(tmp, name))

    def __repr__(self) -> str:
        return f"MergeTree(V={self.n_vertices}, leaves={len(self._leaves)})"


class LabelTable:
    """Bidirectional mapping between positive integer labels and vertices.

    The forward map label -> vertex is single valued; the inverse is a
    multimap since one vertex may carry several labels.
    """

    __slots__ = ("_label_to_vertex", "_vertex_to_labels")

    def __init__(self, label_to_vertex: Mapping[int, int]):
        fwd: dict[int, int] = {}
        inv: dict[int, list[int]] = {}
        for label, vertex in label_to_vertex.items():
            label = int(label)
            vertex = int(vertex)
            if label <= 0:
                raise errors.ValidationError(f"label {label} is not a positive integer")
            if label in fwd:
                raise errors.DuplicateLabel(f"label {label} mapped to two vertices")
            fwd[label] = vertex
            inv.setdefault(vertex, []).append(label)
        self._label_to_vertex = fwd
        self._vertex_to_labels = {v: tuple(sorted(ls)) for v, ls in inv.items()}

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(sorted(self._label_to_vertex))

    def vertex_of(self, label: int) -> int:
        try:
            return self._label_to_vertex[label]
        except KeyError:
            raise errors.UnknownLabel(f"label {label} is not assigned") from None

    def labels_of(self, vertex: int) -> tuple[int, ...]:
        return self._vertex_to_labels.get(vertex, ())

    def items(self) -> Iterable[tuple[int, int]]:
        return sorted(self._label_to_vertex.items())

    def as_dict(self) -> dict[int, int]:
        return dict(self._label_to_vertex)

    def with_added(self, extra: Mapping[int, int]) -> "LabelTable":
        merged = dict(self._label_to_vertex)
        for label, vertex in extra.items():
            if label in merged:
                raise errors.DuplicateLabel(f"label {label} already assigned")
            merged[label] = vertex
        return LabelTable(merged)

    def __len__(self) -> int:
        return len(self._label_to_vertex)


class LabeledMergeTree:
    """A merge tree together with its label table.  Treated as immutable;
    derived variants are built with :meth:`with_extra_labels`."""

    __slots__ = ("tree", "labels")

    def __init__(self, tree: MergeTree, labels: LabelTable):
        self.tree = tree
        self.labels = labels

    def validate(self) -> None:
        self.tree.validate()
        for label, vertex in self.labels.items():
            if not 0 <= vertex < self.tree.n_vertices:
                raise errors.InvalidVertex(
                    f"label {label} points at missing vertex {vertex}"
                )
        for leaf in self.tree.leaves:
            if not self.labels.labels_of(leaf):
                raise errors.MissingLeafLabel(f"leaf {leaf} carries no label")

    def leaf_labels(self) -> tuple[int, ...]:
        """Sorted labels sitting on leaves of the tree."""
        leafset = set(self.tree.leaves)
        return tuple(
            sorted(l for l, v in self.labels.items() if v in leafset)
        )

    def vertices_for(self, labels: Sequence[int]) -> np.ndarray:
        return np.asarray([self.labels.vertex_of(l) for l in labels], dtype=np.int64)

    def with_extra_labels(self, extra: Mapping[int, int]) -> "LabeledMergeTree":
        return LabeledMergeTree(self.tree, self.labels.with_added(extra))

    def __repr__(self) -> str:
        return f"LabeledMergeTree({self.tree!r}, labels={len(self.labels)})"


@dataclass(frozen=True)
class LabeledMatrix:
    """Dense real matrix whose rows and columns are indexed by label lists."""

    row_labels: tuple[int, ...]
    col_labels: tuple[int, ...]
    entries: np.ndarray

    def __post_init__(self):
        if len(set(self.row_labels)) != len(self.row_labels):
            raise errors.DuplicateLabel("duplicate row label")
        if len(set(self.col_labels)) != len(self.col_labels):
            raise errors.DuplicateLabel("duplicate column label")
        e = np.asarray(self.entries, dtype=np.float64)
        if e.shape != (len(self.row_labels), len(self.col_labels)):
            raise errors.LabelMismatch(
                f"entry shape {e.shape} does not match labels "
                f"({len(self.row_labels)}, {len(self.col_labels)})"
            )
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    def row(self, label: int) -> np.ndarray:
        try:
            return self.entries[self.row_labels.index(label)]
        except ValueError:
            raise errors.UnknownLabel(f"no row for label {label}") from None


class Agreement(Enum):
    FULL = "full"
    PARTIAL = "partial"
    DISAGREEMENT = "disagreement"


@dataclass(frozen=True)
class AgreementInfo:
    """Shared and per-tree leaf label sets for a comparison pair."""

    case: Agreement
    known: tuple[int, ...]
    unknown_a: tuple[int, ...]
    unknown_b: tuple[int, ...]

    @property
    def n_unknown_a(self) -> int:
        return len(self.unknown_a)

    @property
    def n_unknown_b(self) -> int:
        return len(self.unknown_b)


def classify_agreement(a: LabeledMergeTree, b: LabeledMergeTree) -> AgreementInfo:
    """Split the two trees' leaf labels into known (shared) and unknown sets."""
    la = set(a.leaf_labels())
    lb = set(b.leaf_labels())
    known = la & lb
    if la == lb:
        case = Agreement.FULL
    elif known:
        case = Agreement.PARTIAL
    else:
        case = Agreement.DISAGREEMENT
    return AgreementInfo(
        case=case,
        known=tuple(sorted(known)),
        unknown_a=tuple(sorted(la - known)),
        unknown_b=tuple(sorted(lb - known)),
    )


def induced_matrix(lt: LabeledMergeTree, labels: Sequence[int]) -> LabeledMatrix:
    """Square symmetric matrix of LCA scalars over the given label list.

    Entry (i, j) is the scalar of lca(vertex(label_i), vertex(label_j));
    the diagonal holds the labeled vertex's own scalar.
    """
    labels = tuple(int(l) for l in labels)
    if len(set(labels)) != len(labels):
        raise errors.DuplicateLabel("label subset contains duplicates")
    verts = lt.vertices_for(labels)
    lcas = lt.tree.lca_many(verts[:, None], verts[None, :])
    return LabeledMatrix(labels, labels, lt.tree.scalars[lcas])


def inf_norm_diff(a: LabeledMatrix, b: LabeledMatrix) -> float:
    """Maximum absolute entrywise difference, aligned by label.

    Diagonal entries participate.  Raises LabelMismatch unless both matrices
    index the same row and column label sets (any order).
    """
    if set(a.row_labels) != set(b.row_labels) or set(a.col_labels) != set(
        b.col_labels
    ):
        raise errors.LabelMismatch("matrices indexed by different label sets")
    if a.entries.size == 0:
        return 0.0
    if a.row_labels == b.row_labels and a.col_labels == b.col_labels:
        bb = b.entries
    else:
        ri = [b.row_labels.index(l) for l in a.row_labels]
        ci = [b.col_labels.index(l) for l in a.col_labels]
        bb = b.entries[np.ix_(ri, ci)]
    return float(np.max(np.abs(a.entries - bb)))
