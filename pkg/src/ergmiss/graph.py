"""Undirected binary graphs, partially observed graphs and node covariates.

Graphs are stored as dense symmetric ``uint8`` adjacency matrices with a zero
diagonal. Vectors over dyads always use the canonical ``i < j`` row-major
order returned by :func:`dyad_index`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

NA = -1


class DegenerateGraphError(ValueError):
    """Raised when a graph is too small for the requested index."""


@lru_cache(maxsize=64)
def dyad_index(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of the ``n(n-1)/2`` dyads in canonical order."""
    rows, cols = np.triu_indices(n, k=1)
    rows = rows.astype(np.int64)
    cols = cols.astype(np.int64)
    rows.flags.writeable = False
    cols.flags.writeable = False
    return rows, cols


def n_dyads(n: int) -> int:
    return n * (n - 1) // 2


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class Graph:
    """Immutable undirected simple graph on vertices ``0..n-1``."""

    __slots__ = ("_adj",)

    def __init__(self, adj):
        a = np.array(adj, dtype=np.uint8, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {a.shape}")
        if np.any(a > 1):
            raise ValueError("adjacency must be binary")
        if np.any(np.diag(a)):
            raise ValueError("self-loops are not allowed")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        self._adj = _frozen(a)

    @classmethod
    def _trusted(cls, adj: np.ndarray):
        obj = cls.__new__(cls)
        obj._adj = _frozen(np.ascontiguousarray(adj, dtype=np.uint8))
        return obj

    @classmethod
    def empty(cls, n: int):
        return cls._trusted(np.zeros((n, n), dtype=np.uint8))

    @classmethod
    def complete(cls, n: int):
        a = np.ones((n, n), dtype=np.uint8)
        np.fill_diagonal(a, 0)
        return cls._trusted(a)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]):
        a = np.zeros((n, n), dtype=np.uint8)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            a[i, j] = a[j, i] = 1
        return cls._trusted(a)

    @classmethod
    def from_dyads(cls, n: int, values):
        v = np.asarray(values)
        if v.shape != (n_dyads(n),):
            raise ValueError(f"expected {n_dyads(n)} dyad values, got {v.shape}")
        a = np.zeros((n, n), dtype=np.uint8)
        r, c = dyad_index(n)
        a[r, c] = v
        a[c, r] = v
        return cls._trusted(a)

    @property
    def adj(self) -> np.ndarray:
        return self._adj

    @property
    def n(self) -> int:
        return self._adj.shape[0]

    @property
    def n_dyads(self) -> int:
        return n_dyads(self.n)

    @property
    def edge_count(self) -> int:
        return int(self._adj.sum()) // 2

    def dyads(self) -> np.ndarray:
        r, c = dyad_index(self.n)
        return self._adj[r, c].copy()

    def edges(self) -> list[tuple[int, int]]:
        r, c = dyad_index(self.n)
        on = self._adj[r, c] == 1
        return list(zip(r[on].tolist(), c[on].tolist()))

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return np.array_equal(self._adj, other._adj)

    def __hash__(self):
        return hash(self._adj.tobytes())

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, edges={self.edge_count})"


class MissMask(Graph):
    """Missingness indicator ``D``: an edge marks an unobserved dyad."""

    __slots__ = ()

    @property
    def missing_count(self) -> int:
        return self.edge_count

    @property
    def missing_fraction(self) -> float:
        N = self.n_dyads
        return self.missing_count / N if N else 0.0

    @classmethod
    def from_graph(cls, g: Graph) -> "MissMask":
        return cls._trusted(g.adj)


class PartialGraph:
    """Graph with dyad states 0, 1 or ``NA`` (stored as -1)."""

    __slots__ = ("_state",)

    def __init__(self, state):
        s = np.array(state, dtype=np.int8, copy=True)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("state matrix must be square")
        if not np.array_equal(s, s.T):
            raise ValueError("state matrix must be symmetric")
        if np.any(np.diag(s) != 0):
            raise ValueError("diagonal must be 0")
        if not np.isin(s, (0, 1, NA)).all():
            raise ValueError("states must be 0, 1 or NA")
        s.flags.writeable = False
        self._state = s

    @property
    def state(self) -> np.ndarray:
        return self._state

    @property
    def n(self) -> int:
        return self._state.shape[0]

    @property
    def n_dyads(self) -> int:
        return n_dyads(self.n)

    @property
    def mask(self) -> MissMask:
        return MissMask._trusted((self._state == NA).astype(np.uint8))

    @property
    def na_count(self) -> int:
        return int((self._state == NA).sum()) // 2

    @property
    def observed_count(self) -> int:
        return self.n_dyads - self.na_count

    @property
    def observed_edge_count(self) -> int:
        return int((self._state == 1).sum()) // 2

    def na_dyads(self) -> np.ndarray:
        """Canonical indices of the NA dyads."""
        r, c = dyad_index(self.n)
        return np.flatnonzero(self._state[r, c] == NA)

    def dyads(self) -> np.ndarray:
        r, c = dyad_index(self.n)
        return self._state[r, c].copy()

    def __eq__(self, other):
        if not isinstance(other, PartialGraph):
            return NotImplemented
        return np.array_equal(self._state, other._state)

    def __repr__(self):
        return (f"PartialGraph(n={self.n}, observed_edges={self.observed_edge_count}, "
                f"na={self.na_count})")


def _check_same_n(a, b):
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n} vertices")


def apply_mask(x: Graph, d: Graph) -> PartialGraph:
    """Observed network: ``x`` where ``d`` is 0 and NA where ``d`` is 1."""
    _check_same_n(x, d)
    s = x.adj.astype(np.int8)
    s[d.adj == 1] = NA
    return PartialGraph(s)


def zero_impute(p: PartialGraph) -> Graph:
    return Graph._trusted((p.state == 1).astype(np.uint8))


def degree_sequence(g: Graph) -> np.ndarray:
    return g.adj.sum(axis=1, dtype=np.int64)


def density(g: Graph) -> float:
    if g.n < 2:
        raise DegenerateGraphError("density needs at least 2 vertices")
    return g.edge_count / g.n_dyads


def degree_centralisation(g: Graph) -> float:
    """Freeman degree centralisation, 1 for a star and 0 for a regular graph."""
    n = g.n
    if n < 3:
        raise DegenerateGraphError("centralisation needs at least 3 vertices")
    deg = degree_sequence(g)
    return float((deg.max() - deg).sum()) / ((n - 1) * (n - 2))


@dataclass(frozen=True)
class NodeData:
    """Per-node covariates; every column has one entry per vertex."""

    n: int
    numeric: Mapping[str, np.ndarray] = field(default_factory=dict)
    categorical: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        num = {}
        for name, col in self.numeric.items():
            a = np.asarray(col, dtype=float)
            if a.shape != (self.n,):
                raise ValueError(f"numeric column {name!r} has {a.size} entries, expected {self.n}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"numeric column {name!r} has non-finite entries")
            num[name] = _frozen(a.copy())
        cat = {}
        for name, col in self.categorical.items():
            a = np.asarray(col, dtype=object)
            if a.shape != (self.n,):
                raise ValueError(f"categorical column {name!r} has {a.size} entries, expected {self.n}")
            cat[name] = _frozen(a.copy())
        overlap = set(num) & set(cat)
        if overlap:
            raise ValueError(f"columns declared both numeric and categorical: {sorted(overlap)}")
        object.__setattr__(self, "numeric", num)
        object.__setattr__(self, "categorical", cat)

    def column(self, name: str) -> np.ndarray:
        if name in self.numeric:
            return self.numeric[name]
        if name in self.categorical:
            return self.categorical[name]
        raise KeyError(f"unknown node attribute {name!r}")
