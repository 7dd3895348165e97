"""Categorical datasets: CSV ingestion and ancestral sampling from a known network."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import Dag

__all__ = [
    "Dataset",
    "GenerativeNetwork",
    "load_csv",
    "write_csv",
    "generate",
    "surrogate_benchmark",
    "random_cpts",
    "fig1_dag",
    "random_dag",
    "parent_config_index",
]


def fig1_dag() -> Dag:
    """The four-node diamond 0->1, 0->2, 1->3, 2->3."""
    return Dag(4, [(0, 1), (0, 2), (1, 3), (2, 3)])


def random_dag(n_nodes: int, n_edges: int, rng, max_parents: int | None = None) -> Dag:
    """Random DAG with ``n_edges`` edges consistent with a random node order."""
    order = rng.permutation(n_nodes)
    pairs = [(int(order[a]), int(order[b])) for a in range(n_nodes) for b in range(a + 1, n_nodes)]
    if n_edges > len(pairs):
        raise ValueError(f"at most {len(pairs)} edges fit on {n_nodes} nodes")
    g = Dag(n_nodes)
    for k in rng.permutation(len(pairs)):
        if g.n_edges == n_edges:
            break
        i, j = pairs[k]
        if max_parents is not None and g.in_degree(j) >= max_parents:
            continue
        g.add_edge(i, j)
    return g


def parent_config_index(data: np.ndarray, parents, cardinalities) -> tuple[np.ndarray, int]:
    """Mixed-radix index of each row's parent configuration (first parent most significant).

    Returns the per-row index and the number of possible configurations.
    """
    idx = np.zeros(data.shape[0], dtype=np.int64)
    q = 1
    for p in parents:
        r = int(cardinalities[p])
        idx = idx * r + data[:, p]
        q *= r
    return idx, q


@dataclass(frozen=True)
class Dataset:
    """M observations of N categorical variables, stored as dense codes."""

    data: np.ndarray                 # (M, N) int64 codes
    cardinalities: np.ndarray        # (N,) state counts
    names: tuple = ()
    labels: tuple = ()               # per column, the original label of each code

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.int64)
        if data.ndim != 2:
            raise ValueError("data must be a 2-d (rows, variables) array")
        card = np.asarray(self.cardinalities, dtype=np.int64)
        if card.shape != (data.shape[1],):
            raise ValueError("one cardinality per column is required")
        if np.any(card < 1):
            raise ValueError("cardinalities must be positive")
        if data.size and (data.min() < 0 or np.any(data.max(axis=0) >= card)):
            raise ValueError("data codes must lie in 0..cardinality-1")
        data.setflags(write=False)
        card.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "cardinalities", card)
        names = tuple(self.names) or tuple(f"X{i + 1}" for i in range(data.shape[1]))
        object.__setattr__(self, "names", names)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(
                tuple(str(c) for c in range(int(r))) for r in card))

    @property
    def n_vars(self) -> int:
        return self.data.shape[1]

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    def column(self, j: int) -> np.ndarray:
        return self.data[:, j]

    def label_mapping(self) -> dict:
        return {name: list(lab) for name, lab in zip(self.names, self.labels)}

    def write_mapping_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.label_mapping(), indent=2) + "\n")


def _is_identity_labels(values: list) -> bool:
    try:
        ints = {int(v) for v in values}
    except ValueError:
        return False
    if any(str(int(v)) != v for v in values):
        return False
    return ints == set(range(len(ints)))


def load_csv(path, has_header: bool = True) -> Dataset:
    """Read a comma-separated file of categorical observations.

    Labels are coded per column in order of first appearance, except that a
    column whose labels are exactly the integers 0..r-1 keeps them as codes
    (so written codes read back unchanged).  Lines starting with ``#`` are
    skipped.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    rows = [r for r in rows if r]
    if has_header:
        if not rows:
            raise ValueError(f"{path}: empty file")
        header, rows = rows[0], rows[1:]
    else:
        header = None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(header) if header is not None else len(rows[0])
    for k, r in enumerate(rows):
        if len(r) != width:
            raise ValueError(f"{path}: ragged row {k + 1} has {len(r)} cells, expected {width}")
        if any(c.strip() == "" for c in r):
            raise ValueError(f"{path}: row {k + 1} has an empty cell (missing values are not supported)")

    data = np.empty((len(rows), width), dtype=np.int64)
    labels, card = [], []
    for j in range(width):
        col = [r[j].strip() for r in rows]
        seen = list(dict.fromkeys(col))
        if len(seen) < 2:
            name = header[j] if header else f"column {j}"
            raise ValueError(f"{path}: {name} takes a single value; every variable needs >= 2 states")
        if _is_identity_labels(seen):
            seen = sorted(seen, key=int)
        code = {v: c for c, v in enumerate(seen)}
        data[:, j] = [code[v] for v in col]
        labels.append(tuple(seen))
        card.append(len(seen))
    names = tuple(h.strip() for h in header) if header is not None else ()
    return Dataset(data, np.array(card), names, tuple(labels))


def write_csv(ds: Dataset, path, header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            for line in header_comment.splitlines():
                fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ds.names)
        w.writerows(ds.data.tolist())


@dataclass
class GenerativeNetwork:
    """A DAG plus one conditional probability table per node.

    ``cpts[j]`` has shape (q_j, r_j): row c is the distribution of node j
    given parent configuration c (mixed radix over sorted parents).
    """

    dag: Dag
    cardinalities: np.ndarray
    cpts: list = field(default_factory=list)

    def __post_init__(self):
        self.cardinalities = np.asarray(self.cardinalities, dtype=np.int64)
        if len(self.cardinalities) != self.dag.n_nodes:
            raise ValueError("one cardinality per node is required")
        if len(self.cpts) != self.dag.n_nodes:
            raise ValueError("one CPT per node is required")
        self.cpts = [np.asarray(t, dtype=float) for t in self.cpts]
        for j, t in enumerate(self.cpts):
            q = int(np.prod([self.cardinalities[p] for p in self.dag.parents(j)], dtype=np.int64))
            if t.shape != (q, self.cardinalities[j]):
                raise ValueError(f"CPT of node {j} has shape {t.shape}, expected {(q, int(self.cardinalities[j]))}")
            if np.any(t < 0) or np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-12):
                raise ValueError(f"CPT rows of node {j} must be probability vectors")

    def topological_order(self) -> list:
        g = self.dag
        return sorted(range(g.n_nodes), key=lambda j: g._anc[j].bit_count())

    def to_json(self) -> dict:
        return {
            "dag": self.dag.to_json(),
            "cardinalities": self.cardinalities.tolist(),
            "cpts": [t.tolist() for t in self.cpts],
        }

    @classmethod
    def from_json(cls, obj) -> "GenerativeNetwork":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(Dag.from_json(obj["dag"]), obj["cardinalities"], obj["cpts"])


def random_cpts(dag: Dag, cardinalities, concentration: float, rng) -> GenerativeNetwork:
    """CPT rows drawn independently from a symmetric Dirichlet(concentration)."""
    if concentration <= 0:
        raise ValueError("concentration must be positive")
    card = np.asarray(cardinalities, dtype=np.int64)
    if card.ndim == 0:
        card = np.full(dag.n_nodes, int(card))
    cpts = []
    for j in range(dag.n_nodes):
        q = int(np.prod([card[p] for p in dag.parents(j)], dtype=np.int64))
        t = rng.dirichlet(np.full(int(card[j]), float(concentration)), size=q)
        cpts.append(t / t.sum(axis=1, keepdims=True))
    return GenerativeNetwork(dag, card, cpts)


def generate(net: GenerativeNetwork, m: int, rng, names=()) -> Dataset:
    """Draw ``m`` rows by ancestral sampling in topological order."""
    if m < 0:
        raise ValueError("row count must be nonnegative")
    n = net.dag.n_nodes
    data = np.zeros((m, n), dtype=np.int64)
    for j in net.topological_order():
        idx, _ = parent_config_index(data, net.dag.parents(j), net.cardinalities)
        cdf = np.cumsum(net.cpts[j], axis=1)
        u = rng.random(m)
        codes = (u[:, None] >= cdf[idx]).sum(axis=1)
        data[:, j] = np.minimum(codes, net.cardinalities[j] - 1)
    return Dataset(data, net.cardinalities, tuple(names))


def surrogate_benchmark(seed: int = 2024, n_vars: int = 37, n_edges: int = 46, rows: int = 1000,
                        concentration: float = 0.3, max_parents: int = 4):
    """Seeded stand-in for a medium-size categorical benchmark network.

    A random DAG with at most ``max_parents`` parents per node, 2 to 4 states
    per variable and peaked Dirichlet CPT rows.  Returns ``(network, dataset)``.
    """
    rng = np.random.default_rng(seed)
    dag = random_dag(n_vars, n_edges, rng, max_parents=max_parents)
    card = rng.integers(2, 5, size=n_vars)
    net = random_cpts(dag, card, concentration, rng)
    return net, generate(net, rows, rng)
