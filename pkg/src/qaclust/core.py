"""Assignments, contingency tables and the similarity functions between
clustering assignments.

Assignments are integer label vectors of length ``n`` with values in
``[0, k)``.  The length-``k**n`` indicator form is never materialised here
(see :mod:`qaclust.oracle` for that).
"""

from __future__ import annotations

import numpy as np

from . import _kernels

__all__ = [
    "as_labels",
    "similarity_s",
    "similarity_sprime",
    "purity",
    "contingency",
    "ContingencyTable",
    "ReplicaChain",
]


def as_labels(labels, k=None):
    """Validate ``labels`` and return them as a 1-D int64 array.

    Parameters
    ----------
    labels : array_like of int
    k : int, optional
        Cluster count.  When given, every label must lie in ``[0, k)``.
    """
    a = np.asarray(labels)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("an assignment must be a non-empty 1-D label vector")
    if not np.issubdtype(a.dtype, np.integer):
        if not np.all(np.equal(np.mod(a, 1), 0)):
            raise ValueError("labels must be integers")
    a = a.astype(np.int64)
    if a.min() < 0:
        raise ValueError("labels must be non-negative")
    if k is not None:
        if k < 1:
            raise ValueError("k must be >= 1")
        if a.max() >= k:
            raise ValueError(f"label {a.max()} out of range for k={k}")
    return a


def _pair(a, b, k=None):
    a = as_labels(a, k)
    b = as_labels(b, k)
    if a.shape != b.shape:
        raise ValueError(f"assignments differ in length: {a.size} != {b.size}")
    return a, b


def similarity_s(a, b):
    """Fraction of points carrying the same label in ``a`` and ``b``."""
    a, b = _pair(a, b)
    return np.count_nonzero(a == b) / a.size


def similarity_sprime(a, b):
    """1 if ``a`` and ``b`` agree at every index, else 0."""
    a, b = _pair(a, b)
    return int(np.array_equal(a, b))


def contingency(a, b, k=None):
    """Build the :class:`ContingencyTable` of ``a`` (rows) against ``b`` (columns)."""
    return ContingencyTable.from_labels(a, b, k)


def purity(a, b, k=None):
    """Label-permutation invariant overlap of ``b`` as seen from ``a``.

    The sum over rows ``c`` of ``a``'s clusters of the largest count shared
    with a single cluster of ``b``, divided by ``n``.  Not symmetric in its
    arguments.
    """
    return contingency(a, b, k).purity()


class ContingencyTable:
    """Counts ``counts[c, c'] = |{i : a[i] = c and b[i] = c'}|`` with cached
    row maxima.

    ``a`` labels the rows ("left" side) and ``b`` the columns ("right" side).
    """

    __slots__ = ("counts", "row_max", "n")

    def __init__(self, counts, row_max=None, *, copy=True):
        if copy:
            counts = np.array(counts, dtype=np.int64)
            if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
                raise ValueError("counts must be a square k x k array")
            if counts.min() < 0:
                raise ValueError("counts must be non-negative")
            row_max = counts.max(axis=1)
        # with copy=False the arrays are adopted as views (used by ReplicaChain)
        self.counts = counts
        self.row_max = row_max
        self.n = int(counts.sum())

    @classmethod
    def from_labels(cls, a, b, k=None):
        a, b = _pair(a, b, k)
        if k is None:
            k = int(max(a.max(), b.max())) + 1
        counts = np.zeros((k, k), dtype=np.int64)
        np.add.at(counts, (a, b), 1)
        return cls(counts)

    @property
    def k(self):
        return self.counts.shape[0]

    def copy(self):
        return ContingencyTable(self.counts)

    def purity(self):
        return int(self.row_max.sum()) / self.n

    def move(self, side, other, old, new):
        """Relabel one point from ``old`` to ``new``.

        ``side`` says which assignment the point is relabelled in: ``"left"``
        (rows) or ``"right"`` (columns).  ``other`` is the point's label in
        the opposite assignment.
        """
        if side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        if old == new:
            return self
        left = side == "left"
        src = (old, other) if left else (other, old)
        if self.counts[src] < 1:
            raise ValueError(f"underflow: cell {src} is empty")
        _kernels.table_move(self.counts, self.row_max, left, other, old, new)
        return self

    def candidate_row_max_sums(self, other, old):
        """Row-maximum sums after moving one left-side point, per candidate row.

        The point currently sits in cell ``(old, other)``; entry ``c`` of the
        result is the integer sum of row maxima once it sits in
        ``(c, other)``.  O(k); nothing is mutated.
        """
        if self.counts[old, other] < 1:
            raise ValueError(f"underflow: cell {(old, other)} is empty")
        out = np.zeros(self.k, dtype=np.int64)
        _kernels.candidate_row_max_sums(self.counts, self.row_max, other, old, out)
        return out

    def check(self):
        """Raise AssertionError if the cached maxima disagree with counts."""
        assert np.array_equal(self.row_max, self.counts.max(axis=1)), "stale row maxima"
        assert int(self.counts.sum()) == self.n, "total count changed"

    def __eq__(self, other):
        if not isinstance(other, ContingencyTable):
            return NotImplemented
        return np.array_equal(self.counts, other.counts) and np.array_equal(self.row_max, other.row_max)

    def __repr__(self):
        return f"ContingencyTable({self.counts.tolist()})"


class ReplicaChain:
    """``m`` assignments on a ring with cached directed contingency tables.

    For every replica ``j`` two tables are kept with ``j`` on the row side:
    ``forward[j]`` against replica ``j+1`` and ``backward[j]`` against replica
    ``j-1`` (indices mod ``m``).  With ``m == 1`` the only neighbour is the
    replica itself, whose purity is identically 1, and no tables are kept.
    """

    def __init__(self, replicas, k):
        self.k = int(k)
        reps = [as_labels(r, self.k) for r in replicas]
        if not reps:
            raise ValueError("a replica chain needs at least one replica")
        self.n = reps[0].size
        if any(r.size != self.n for r in reps):
            raise ValueError("all replicas must have the same number of points")
        self.m = len(reps)
        self.labels = np.array(reps, dtype=np.int64)
        self.rebuild()

    @property
    def replicas(self):
        return list(self.labels)

    def rebuild(self):
        m, k, lab = self.m, self.k, self.labels
        shape = (m, k, k)
        self._fc = np.zeros(shape, dtype=np.int64)
        self._bc = np.zeros(shape, dtype=np.int64)
        if m > 1:
            for j in range(m):
                np.add.at(self._fc[j], (lab[j], lab[(j + 1) % m]), 1)
                np.add.at(self._bc[j], (lab[j], lab[(j - 1) % m]), 1)
        self._fm = self._fc.max(axis=2)
        self._bm = self._bc.max(axis=2)
        if m == 1:
            self.forward = self.backward = []
        else:
            self.forward = [ContingencyTable(self._fc[j], self._fm[j], copy=False) for j in range(m)]
            self.backward = [ContingencyTable(self._bc[j], self._bm[j], copy=False) for j in range(m)]

    def neighbor_purity(self, j):
        """``purity(r_j, r_{j-1}) + purity(r_j, r_{j+1})``."""
        if not 0 <= j < self.m:
            raise IndexError(j)
        if self.m == 1:
            return 2.0
        return (int(self._fm[j].sum()) + int(self._bm[j].sum())) / self.n

    def candidate_neighbor_purity(self, j, i):
        """Neighbour purity of replica ``j`` with point ``i`` set to each label."""
        if self.m == 1:
            return np.full(self.k, 2.0)
        return _kernels.chain_candidates(self._fc, self._fm, self._bc, self._bm, self.labels, j, i)

    def mean_adjacent_purity(self):
        """Mean over ``j`` of ``purity(r_j, r_{j+1})``."""
        if self.m == 1:
            return 1.0
        return int(self._fm.sum()) / (self.m * self.n)

    def relabel(self, j, i, c):
        if self.m == 1:
            self.labels[j, i] = c
            return
        _kernels.chain_relabel(self._fc, self._fm, self._bc, self._bm, self.labels, j, i, c)

    def check(self):
        """Compare every cached table with a from-scratch rebuild."""
        if self.m == 1:
            return
        m, k, lab = self.m, self.k, self.labels
        for j in range(m):
            assert self.forward[j] == contingency(lab[j], lab[(j + 1) % m], k), f"forward[{j}] stale"
            assert self.backward[j] == contingency(lab[j], lab[(j - 1) % m], k), f"backward[{j}] stale"
