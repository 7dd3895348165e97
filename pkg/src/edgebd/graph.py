"""Directed acyclic graphs with incrementally maintained reachability.

Adjacency and reachability are stored as packed bit rows (Python ints), so
closure updates touch whole rows at once and every acyclicity test is a
single bit probe.  ``Dag.edges`` and ``Dag.reach`` expose the same data as
boolean numpy matrices.
"""
from __future__ import annotations

import json
from functools import lru_cache

import numpy as np

__all__ = ["Dag", "iter_bits", "bits_to_bool", "transitive_closure"]


def iter_bits(mask: int):
    """Yield the indices of set bits in ``mask``, lowest first."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@lru_cache(maxsize=1 << 16)
def bits_to_bool(mask: int, n: int) -> np.ndarray:
    """Length-``n`` boolean vector of the bits of ``mask`` (read-only, cached)."""
    raw = np.frombuffer(mask.to_bytes((n + 7) // 8 or 1, "little"), dtype=np.uint8)
    out = np.unpackbits(raw, bitorder="little")[:n].astype(bool)
    out.setflags(write=False)
    return out


def transitive_closure(adjacency) -> np.ndarray:
    """Reachability (paths of length >= 1) by depth-first search from every node."""
    adj = np.asarray(adjacency, dtype=bool)
    n = adj.shape[0]
    out = np.zeros((n, n), dtype=bool)
    for src in range(n):
        stack = list(np.flatnonzero(adj[src]))
        while stack:
            v = stack.pop()
            if not out[src, v]:
                out[src, v] = True
                stack.extend(np.flatnonzero(adj[v]))
    return out


class Dag:
    """A DAG on a fixed node set ``0..n_nodes-1``.

    Mutating operations (``add_edge``, ``remove_edge``) work in place and keep
    the reachability closure exact.  ``add_edge`` followed by ``remove_edge``
    of the same edge restores the object bit for bit.
    """

    __slots__ = ("n_nodes", "n_edges", "_full", "_pa", "_ch", "_desc", "_anc")

    def __init__(self, n_nodes: int, edges=()):
        if n_nodes < 1:
            raise ValueError("a Dag needs at least one node")
        self.n_nodes = int(n_nodes)
        self.n_edges = 0
        self._full = (1 << self.n_nodes) - 1
        self._pa = [0] * self.n_nodes
        self._ch = [0] * self.n_nodes
        self._desc = [0] * self.n_nodes
        self._anc = [0] * self.n_nodes
        for i, j in edges:
            self.add_edge(int(i), int(j))

    # construction / conversion

    @classmethod
    def from_adjacency(cls, adjacency) -> "Dag":
        adj = np.asarray(adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be a square matrix")
        n = adj.shape[0]
        if adj.diagonal().any():
            raise ValueError("self-edges are not allowed")
        reach = transitive_closure(adj)
        if reach.diagonal().any():
            raise ValueError("adjacency contains a directed cycle")
        g = cls(n)
        for i in range(n):
            g._ch[i] = int(sum(1 << int(j) for j in np.flatnonzero(adj[i])))
            g._pa[i] = int(sum(1 << int(j) for j in np.flatnonzero(adj[:, i])))
            g._desc[i] = int(sum(1 << int(j) for j in np.flatnonzero(reach[i])))
            g._anc[i] = int(sum(1 << int(j) for j in np.flatnonzero(reach[:, i])))
        g.n_edges = int(adj.sum())
        return g

    @classmethod
    def from_key(cls, n_nodes: int, key: int) -> "Dag":
        # any insertion order of an acyclic edge set is valid
        return cls(n_nodes, [divmod(b, n_nodes) for b in iter_bits(key)])

    def copy(self) -> "Dag":
        g = Dag.__new__(Dag)
        g.n_nodes = self.n_nodes
        g.n_edges = self.n_edges
        g._full = self._full
        g._pa = self._pa.copy()
        g._ch = self._ch.copy()
        g._desc = self._desc.copy()
        g._anc = self._anc.copy()
        return g

    def __eq__(self, other):
        if not isinstance(other, Dag):
            return NotImplemented
        return (self.n_nodes == other.n_nodes and self.n_edges == other.n_edges
                and self._pa == other._pa and self._ch == other._ch
                and self._desc == other._desc and self._anc == other._anc)

    def __hash__(self):
        return hash((self.n_nodes, self.key))

    def __repr__(self):
        return f"Dag(n_nodes={self.n_nodes}, edges={self.edge_list()})"

    # queries

    @property
    def edges(self) -> np.ndarray:
        return np.array([bits_to_bool(m, self.n_nodes) for m in self._ch], dtype=bool)

    @property
    def reach(self) -> np.ndarray:
        return np.array([bits_to_bool(m, self.n_nodes) for m in self._desc], dtype=bool)

    @property
    def key(self) -> int:
        """Adjacency bits packed row-major (bit ``i*n + j`` is edge i->j)."""
        n = self.n_nodes
        return sum(m << (i * n) for i, m in enumerate(self._ch))

    def has_edge(self, i: int, j: int) -> bool:
        return bool((self._ch[i] >> j) & 1)

    def reaches(self, i: int, j: int) -> bool:
        return bool((self._desc[i] >> j) & 1)

    def parents(self, j: int) -> tuple:
        return tuple(iter_bits(self._pa[j]))

    def children(self, i: int) -> tuple:
        return tuple(iter_bits(self._ch[i]))

    def parent_mask(self, j: int) -> int:
        return self._pa[j]

    def in_degree(self, j: int) -> int:
        return self._pa[j].bit_count()

    def edge_list(self) -> list:
        return [(i, j) for i in range(self.n_nodes) for j in iter_bits(self._ch[i])]

    def valid_parent_mask(self, j: int) -> int:
        """Bitmask of nodes i for which adding i->j keeps the graph acyclic."""
        return self._full & ~(1 << j) & ~self._pa[j] & ~self._desc[j]

    def _check_pair(self, i, j):
        n = self.n_nodes
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"node index out of range for {n} nodes: ({i}, {j})")
        if i == j:
            raise ValueError(f"self-edge {i}->{j} is not allowed")

    def is_valid_addition(self, i: int, j: int) -> bool:
        self._check_pair(i, j)
        return not ((self._ch[i] >> j) & 1) and not ((self._desc[j] >> i) & 1)

    def valid_additions(self) -> list:
        """All valid single-edge additions, row-major."""
        valid_cols = [self.valid_parent_mask(j) for j in range(self.n_nodes)]
        return [(i, j) for i in range(self.n_nodes) for j in range(self.n_nodes)
                if (valid_cols[j] >> i) & 1]

    def n_valid_additions(self) -> int:
        return sum(self.valid_parent_mask(j).bit_count() for j in range(self.n_nodes))

    # mutation

    def add_edge(self, i: int, j: int) -> None:
        if not self.is_valid_addition(i, j):
            raise ValueError(f"adding {i}->{j} would duplicate an edge or close a cycle")
        self._ch[i] |= 1 << j
        self._pa[j] |= 1 << i
        self.n_edges += 1
        sources = (1 << i) | self._anc[i]
        targets = (1 << j) | self._desc[j]
        desc, anc = self._desc, self._anc
        for a in iter_bits(sources):
            desc[a] |= targets
        for b in iter_bits(targets):
            anc[b] |= sources

    def remove_edge(self, i: int, j: int) -> None:
        self._check_pair(i, j)
        if not (self._ch[i] >> j) & 1:
            raise ValueError(f"edge {i}->{j} is not present")
        self._ch[i] &= ~(1 << j)
        self._pa[j] &= ~(1 << i)
        self.n_edges -= 1

        # Only rows of {i} | anc(i) can lose descendants, and only within
        # {j} | desc(j).  anc(i) itself is unchanged by the removal.
        desc, anc, ch = self._desc, self._anc, self._ch
        sources = (1 << i) | anc[i]
        targets = (1 << j) | desc[j]
        # an edge a->c gives anc(c) a strict superset of anc(a): children first
        order = sorted(iter_bits(sources), key=lambda a: anc[a].bit_count(), reverse=True)
        for a in order:
            row = 0
            for c in iter_bits(ch[a]):
                row |= (1 << c) | desc[c]
            desc[a] = row
        for b in iter_bits(targets):
            col = anc[b] & ~sources
            for a in iter_bits(sources):
                if (desc[a] >> b) & 1:
                    col |= 1 << a
            anc[b] = col

    # serialization

    def to_json(self) -> dict:
        return {"n": self.n_nodes, "edges": [list(e) for e in self.edge_list()]}

    @classmethod
    def from_json(cls, obj) -> "Dag":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(int(obj["n"]), [tuple(e) for e in obj["edges"]])

    def to_edge_list_text(self) -> str:
        return "".join(f"{i} {j}\n" for i, j in self.edge_list())

    @classmethod
    def from_edge_list_text(cls, n_nodes: int, text: str) -> "Dag":
        edges = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                i, j = line.split()
                edges.append((int(i), int(j)))
        return cls(n_nodes, edges)
