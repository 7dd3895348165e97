"""Summaries of chain traces: edge marginals, error tables, score series, best graph."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Dag
from .trace import BIRTH, DEATH, REVERSE, ChainTrace

__all__ = [
    "EdgeProbEstimate",
    "edge_probabilities",
    "pool_estimates",
    "error_table",
    "score_series",
    "running_best",
    "best_graph",
    "graph_frequencies",
    "write_matrix_csv",
    "read_matrix_csv",
]


@dataclass
class EdgeProbEstimate:
    probs: np.ndarray
    log_total_weight: float
    n_jumps: int

    @property
    def total_weight(self) -> float:
        return math.exp(self.log_total_weight)


def _normalized_weights(log_w: np.ndarray) -> tuple[np.ndarray, float]:
    mx = float(np.max(log_w))
    w = np.exp(log_w - mx)
    return w, mx


def _burn_start(n: int, burn_in_fraction: float) -> int:
    if not 0.0 <= burn_in_fraction < 1.0:
        raise ValueError("burn_in_fraction must lie in [0, 1)")
    start = int(math.floor(burn_in_fraction * n))
    if start >= n:
        raise ValueError("no records left after burn-in")
    return start


def edge_probabilities(trace: ChainTrace, burn_in_fraction: float = 0.1) -> EdgeProbEstimate:
    """Holding-weighted fraction of records whose graph contains each edge.

    Each edge's presence is tracked as intervals of record indices, so the
    cost is one pass over the moves rather than one graph per record.
    """
    n_rec = len(trace)
    start = _burn_start(n_rec, burn_in_fraction)
    w, shift = _normalized_weights(trace.log_holding[start:])
    cum = np.concatenate(([0.0], np.cumsum(w)))   # cum[t - start] = weight before record t
    total = cum[-1]

    n = trace.initial_graph.n_nodes
    acc = np.zeros((n, n))
    born = {e: 0 for e in trace.initial_graph.edge_list()}

    def close(e, t_end):
        s = max(born.pop(e), start)
        if t_end > s:
            acc[e] += cum[t_end - start] - cum[s - start]

    kinds, ii, jj = trace.kind.tolist(), trace.i.tolist(), trace.j.tolist()
    for t in range(n_rec):
        k = kinds[t]
        if k == BIRTH:
            born[(ii[t], jj[t])] = t + 1
        elif k == DEATH:
            close((ii[t], jj[t]), t + 1)
        elif k == REVERSE:
            close((ii[t], jj[t]), t + 1)
            born[(jj[t], ii[t])] = t + 1
    for e in list(born):
        close(e, n_rec)
    probs = np.clip(acc / total, 0.0, 1.0)
    return EdgeProbEstimate(probs, shift + math.log(total), n_rec - start)


def pool_estimates(estimates) -> EdgeProbEstimate:
    """Combine chains, weighting each by its total holding time."""
    estimates = list(estimates)
    if not estimates:
        raise ValueError("nothing to pool")
    log_w = np.array([e.log_total_weight for e in estimates])
    w, shift = _normalized_weights(log_w)
    probs = sum(wi * e.probs for wi, e in zip(w, estimates)) / w.sum()
    return EdgeProbEstimate(probs, shift + math.log(w.sum()), sum(e.n_jumps for e in estimates))


def error_table(est, exact) -> np.ndarray:
    """|estimated - exact| entrywise; the diagonal is NaN (not applicable)."""
    probs = est.probs if isinstance(est, EdgeProbEstimate) else np.asarray(est, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if probs.shape != exact.shape or probs.ndim != 2 or probs.shape[0] != probs.shape[1]:
        raise ValueError(f"shape mismatch: estimate {probs.shape} vs exact {exact.shape}")
    err = np.abs(probs - exact)
    np.fill_diagonal(err, np.nan)
    return err


def score_series(trace: ChainTrace) -> np.ndarray:
    """(n_records, 3) array of cum_time, log_score, aic."""
    return np.column_stack([trace.cum_time, trace.log_score, trace.aic])


def running_best(values, lower_is_better: bool = True) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return np.minimum.accumulate(values) if lower_is_better else np.maximum.accumulate(values)


def best_graph(trace: ChainTrace) -> tuple[Dag, float]:
    """Highest-scoring graph held in the trace; ties go to the earliest record."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    t = int(np.argmax(trace.log_score))
    return trace.graph_at(t), float(trace.log_score[t])


def graph_frequencies(trace: ChainTrace, burn_in_fraction: float = 0.0) -> dict:
    """Holding-weighted share of each visited graph, keyed by ``Dag.key``."""
    start = _burn_start(len(trace), burn_in_fraction)
    w, _ = _normalized_weights(trace.log_holding[start:])
    out: dict = {}
    for t, g in trace.iter_graphs(start):
        k = g.key
        out[k] = out.get(k, 0.0) + w[t - start]
    total = w.sum()
    return {k: v / total for k, v in out.items()}


def write_matrix_csv(path, matrix, names, header_comment: str | None = None) -> None:
    """Square matrix with node-name headers; NaN cells are written as ``--``."""
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            for line in header_comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write("Node," + ",".join(names) + "\n")
        for name, row in zip(names, matrix):
            cells = ["--" if np.isnan(v) else repr(float(v)) for v in row]
            fh.write(name + "," + ",".join(cells) + "\n")


def read_matrix_csv(path) -> tuple[np.ndarray, list]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            rows.append(line.rstrip("\n").split(","))
    if not rows or rows[0][0] != "Node":
        raise ValueError(f"{path}: not a node matrix CSV (missing 'Node' header)")
    names = rows[0][1:]
    body = rows[1:]
    if len(body) != len(names) or any(len(r) != len(names) + 1 for r in body):
        raise ValueError(f"{path}: matrix is not square")
    mat = np.array([[np.nan if c == "--" else float(c) for c in r[1:]] for r in body])
    return mat, names
