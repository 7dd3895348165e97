"""Exact posterior over all DAGs on a handful of nodes.

Used as ground truth for the samplers: exact edge marginals, the posterior
mode, and global checks that the birth-death generator and the MH kernel
leave the exact posterior invariant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .bd_sampler import init_rates
from .graph import Dag
from .score import ScoreModel

__all__ = [
    "MAX_ENUM_NODES",
    "MAX_GENERATOR_NODES",
    "ExactPosterior",
    "acyclic_keys",
    "enumerate_dags",
    "exact_posterior",
    "exact_edge_marginals",
    "generator_matrix",
    "generator_stationarity_check",
    "pairwise_balance_residual",
]

MAX_ENUM_NODES = 5
MAX_GENERATOR_NODES = 4


def _check_n(n: int, cap: int = MAX_ENUM_NODES):
    if not 1 <= n <= cap:
        raise ValueError(f"exact enumeration supports 1 <= n <= {cap} nodes, got {n} "
                         "(6 nodes already have 3,781,503 DAGs)")


def acyclic_keys(n: int) -> np.ndarray:
    """Row-major adjacency keys of every DAG on ``n`` nodes, ascending.

    Brute force: each of the 2^(n(n-1)) off-diagonal edge subsets is kept iff
    its adjacency matrix is nilpotent (A^n = 0).
    """
    _check_n(n)
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    n_sub = 1 << len(pairs)
    subsets = np.arange(n_sub, dtype=np.int64)
    adj = np.zeros((n_sub, n, n), dtype=np.uint8)
    keys = np.zeros(n_sub, dtype=np.int64)
    for bit, (i, j) in enumerate(pairs):
        present = (subsets >> bit) & 1
        adj[:, i, j] = present
        keys |= present << (i * n + j)
    power = adj.copy()
    for _ in range(n - 1):
        power = np.minimum(power @ adj, 1).astype(np.uint8)
    acyclic = ~power.reshape(n_sub, -1).any(axis=1)
    return np.sort(keys[acyclic])


def enumerate_dags(n: int) -> list:
    """Every DAG on ``n`` nodes exactly once (n <= 5)."""
    return [Dag.from_key(n, int(k)) for k in acyclic_keys(n)]


@dataclass
class ExactPosterior:
    n: int
    dags: list
    keys: np.ndarray
    log_weights: np.ndarray      # unnormalized log P(G | D)
    log_Z: float
    index: dict                  # Dag.key -> position

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_Z)

    def mode(self) -> tuple[Dag, float]:
        k = int(np.argmax(self.log_weights))
        return self.dags[k], float(self.log_weights[k] - self.log_Z)

    def top(self, k: int = 10) -> list:
        order = np.argsort(-self.log_weights, kind="stable")[:k]
        return [(self.dags[a], float(self.log_weights[a] - self.log_Z)) for a in order]

    def with_log_weights(self, log_weights) -> "ExactPosterior":
        lw = np.asarray(log_weights, dtype=float)
        return ExactPosterior(self.n, self.dags, self.keys, lw, float(logsumexp(lw)), self.index)


def exact_posterior(m: ScoreModel, dags=None) -> ExactPosterior:
    """Score every DAG of the model's size and normalize.

    DAGs with a node above ``m.max_parents`` are outside the support and
    are left out.
    """
    n = m.n_nodes
    _check_n(n)
    if dags is None:
        dags = enumerate_dags(n)
    if m.max_parents is not None:
        dags = [g for g in dags if all(g.in_degree(j) <= m.max_parents for j in range(n))]
    lw = np.array([m.graph_log_score(g) for g in dags])
    keys = np.array([g.key for g in dags], dtype=np.int64)
    return ExactPosterior(n, dags, keys, lw, float(logsumexp(lw)),
                          {int(k): a for a, k in enumerate(keys)})


def exact_edge_marginals(p: ExactPosterior) -> np.ndarray:
    """P(i->j in G | D) for every ordered pair; zero diagonal."""
    n = p.n
    bits = (p.keys[:, None] >> np.arange(n * n, dtype=np.int64)) & 1
    return (p.probabilities @ bits).reshape(n, n)


def generator_matrix(p: ExactPosterior, m: ScoreModel) -> np.ndarray:
    """Rate matrix Q of the birth-death process over ``p.dags``.

    Off-diagonal rates are read from the sampler's own birth-rate tables
    (births) and are 1 for every death; each row sums to zero.
    """
    _check_n(p.n, MAX_GENERATOR_NODES)
    n_states = len(p.dags)
    Q = np.zeros((n_states, n_states))
    n = p.n
    for a, g in enumerate(p.dags):
        t = init_rates(g, m)
        key = g.key
        for i, j in zip(*np.nonzero(t.valid)):
            Q[a, p.index[key | (1 << (int(i) * n + int(j)))]] += math.exp(t.log_b[i, j])
        for i, j in g.edge_list():
            Q[a, p.index[key & ~(1 << (i * n + j))]] += 1.0
        Q[a, a] = -Q[a].sum()
    return Q


def generator_stationarity_check(p: ExactPosterior, m: ScoreModel, pi=None) -> float:
    """max |(pi^T Q)_b|; zero (up to rounding) iff ``pi`` is stationary.

    ``pi`` defaults to the exact posterior probabilities of ``p``.
    """
    Q = generator_matrix(p, m)
    pi = p.probabilities if pi is None else np.asarray(pi, dtype=float)
    return float(np.max(np.abs(pi @ Q)))


def pairwise_balance_residual(p: ExactPosterior, P: np.ndarray, pi=None) -> float:
    """max over state pairs of |pi_a P_ab - pi_b P_ba|."""
    pi = p.probabilities if pi is None else np.asarray(pi, dtype=float)
    flow = pi[:, None] * P
    return float(np.max(np.abs(flow - flow.T)))
