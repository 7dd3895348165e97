"""Dirichlet-multinomial family scores, graph priors and AIC."""
from __future__ import annotations

import math
from collections import OrderedDict

import numpy as np
from scipy.special import gammaln

from .data import Dataset, parent_config_index
from .graph import Dag, iter_bits

__all__ = ["ScoreModel", "parse_prior"]


def parse_prior(text: str) -> tuple[str, float]:
    """Parse ``"uniform"`` or ``"edge:BETA"`` into (kind, beta)."""
    if text == "uniform":
        return "uniform", 0.0
    kind, _, value = text.partition(":")
    if kind != "edge" or not value:
        raise ValueError(f"unknown prior {text!r}; use 'uniform' or 'edge:BETA'")
    beta = float(value)
    if not beta >= 0:
        raise ValueError("edge penalty must be >= 0")
    return "edge", beta


class _Cache:
    """Plain dict, or LRU eviction when ``maxsize`` is given."""

    def __init__(self, maxsize=None):
        self.maxsize = maxsize
        self._d = {} if maxsize is None else OrderedDict()

    def get(self, key):
        v = self._d.get(key)
        if v is not None and self.maxsize is not None:
            self._d.move_to_end(key)
        return v

    def put(self, key, value):
        self._d[key] = value
        if self.maxsize is not None and len(self._d) > self.maxsize:
            self._d.popitem(last=False)

    def __len__(self):
        return len(self._d)

    def clear(self):
        self._d.clear()


class ScoreModel:
    """Modular posterior score over DAGs for one dataset.

    The family term is the Dirichlet-multinomial marginal likelihood with a
    constant per-cell hyperparameter ``alpha``::

        sum_c [ lnG(r a) - lnG(r a + N_c) + sum_k ( lnG(a + N_ck) - lnG(a) ) ]

    The graph prior is uniform or ``-beta * n_edges`` (``prior="edge"``).
    Family scores are cached by (child, parent bitmask).

    Parameters
    ----------
    dataset : Dataset
    alpha : float
        Dirichlet pseudo-count per cell.
    prior : {"uniform", "edge"}
    beta : float
        Per-edge log penalty for ``prior="edge"``.
    max_parents : int, optional
        Cap on parent-set size; graphs exceeding it are outside the support.
    cache_size : int, optional
        Bound on cached family scores (LRU).  Unbounded by default.
    """

    def __init__(self, dataset: Dataset, alpha: float = 1.0, prior: str = "uniform",
                 beta: float = 0.0, max_parents: int | None = None, cache_size: int | None = None):
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        if prior not in ("uniform", "edge"):
            raise ValueError(f"unknown prior kind {prior!r}")
        if prior == "edge" and not beta >= 0:
            raise ValueError("edge penalty beta must be >= 0")
        if max_parents is not None and max_parents < 0:
            raise ValueError("max_parents must be >= 0")
        self.dataset = dataset
        self.alpha = float(alpha)
        self.prior = prior
        self.beta = float(beta) if prior == "edge" else 0.0
        self.max_parents = max_parents
        self.n_nodes = dataset.n_vars
        self._card = [int(r) for r in dataset.cardinalities]
        self._cache = _Cache(cache_size)
        self._aic_cache = _Cache(cache_size)
        self.n_evaluations = 0

    @property
    def edge_log_prior_delta(self) -> float:
        """log P(G + e) - log P(G) for any single added edge."""
        return -self.beta

    def config(self) -> dict:
        return {"alpha": self.alpha, "prior": self.prior, "beta": self.beta,
                "max_parents": self.max_parents}

    # family terms

    def _as_mask(self, child, parents) -> int:
        n = self.n_nodes
        if not 0 <= child < n:
            raise IndexError(f"unknown node {child}")
        if isinstance(parents, int):
            mask = parents
        else:
            mask = 0
            for p in parents:
                if not 0 <= p < n:
                    raise IndexError(f"unknown node {p}")
                mask |= 1 << int(p)
        if (mask >> child) & 1:
            raise ValueError(f"node {child} cannot be its own parent")
        if self.max_parents is not None and mask.bit_count() > self.max_parents:
            raise ValueError(f"parent set of size {mask.bit_count()} exceeds max_parents={self.max_parents}")
        return mask

    def _counts(self, child: int, mask: int):
        """Nonzero cell counts N_ck and the matching config totals N_c."""
        data = self.dataset.data
        idx, q = parent_config_index(data, iter_bits(mask), self._card)
        r = self._card[child]
        joint = idx * r + data[:, child]
        if q * r <= max(4 * len(joint), 1 << 12):
            table = np.bincount(joint, minlength=q * r).reshape(q, r)
            n_c = table.sum(axis=1)
            occupied = n_c > 0
            table, n_c = table[occupied], n_c[occupied]
            cells = table > 0
            return table[cells], np.broadcast_to(n_c[:, None], table.shape)[cells], n_c
        cell_ids, n_ck = np.unique(joint, return_counts=True)
        configs, n_c = np.unique(idx, return_counts=True)
        n_c_cell = n_c[np.searchsorted(configs, cell_ids // r)]
        return n_ck, n_c_cell, n_c

    def family_log_score(self, child: int, parents=()) -> float:
        """log P(child column | parent columns), parameters integrated out."""
        mask = self._as_mask(child, parents)
        return self._family(child, mask)

    def _family(self, child: int, mask: int) -> float:
        key = (child, mask)
        v = self._cache.get(key)
        if v is None:
            v = self._compute_family(child, mask)
            self._cache.put(key, v)
        return v

    def _compute_family(self, child: int, mask: int) -> float:
        self.n_evaluations += 1
        if self.dataset.n_rows == 0:
            return 0.0
        n_ck, _, n_c = self._counts(child, mask)
        a = self.alpha
        ra = self._card[child] * a
        val = (len(n_c) * gammaln(ra) - gammaln(ra + n_c).sum()
               + (gammaln(a + n_ck) - gammaln(a)).sum())
        return float(val)

    def family_aic_terms(self, child: int, parents=()) -> tuple[float, int]:
        """(maximised log-likelihood, free-parameter count) of one family."""
        mask = self._as_mask(child, parents)
        return self._family_aic(child, mask)

    def _family_aic(self, child: int, mask: int):
        key = (child, mask)
        v = self._aic_cache.get(key)
        if v is None:
            if self.dataset.n_rows == 0:
                raise ValueError("AIC needs at least one observation")
            n_ck, n_c_cell, _ = self._counts(child, mask)
            loglik = float(np.sum(n_ck * np.log(n_ck / n_c_cell)))
            q = math.prod(self._card[p] for p in iter_bits(mask))
            v = (loglik, (self._card[child] - 1) * q)
            self._aic_cache.put(key, v)
        return v

    # graph terms

    def graph_log_prior(self, g: Dag) -> float:
        return -self.beta * g.n_edges if self.prior == "edge" else 0.0

    def graph_log_score(self, g: Dag) -> float:
        """Unnormalized log P(G | D)."""
        self._check_graph(g)
        return self.graph_log_prior(g) + sum(
            self._family(j, self._as_mask(j, g.parent_mask(j))) for j in range(g.n_nodes))

    def aic(self, g: Dag) -> float:
        """-2 * maximised log-likelihood + 2 * free parameters (lower is better)."""
        self._check_graph(g)
        loglik, k = 0.0, 0
        for j in range(g.n_nodes):
            ll, p = self._family_aic(j, g.parent_mask(j))
            loglik += ll
            k += p
        return -2.0 * loglik + 2.0 * k

    def score_delta_for_edge(self, g: Dag, i: int, j: int, direction: str = "add") -> float:
        """log P(G'|D) - log P(G|D) for adding or removing edge i->j.

        Only the child's family changes, so two family scores suffice.
        """
        pa = g.parent_mask(j)
        if direction == "add":
            if not g.is_valid_addition(i, j):
                raise ValueError(f"adding {i}->{j} is not a legal move")
            after = self._as_mask(j, pa | (1 << i))
            return self._family(j, after) - self._family(j, pa) + self.edge_log_prior_delta
        if direction == "remove":
            if not g.has_edge(i, j):
                raise ValueError(f"removing {i}->{j} is not a legal move: edge absent")
            return self._family(j, pa & ~(1 << i)) - self._family(j, pa) - self.edge_log_prior_delta
        raise ValueError(f"direction must be 'add' or 'remove', not {direction!r}")

    def allows_parent_count(self, k: int) -> bool:
        return self.max_parents is None or k <= self.max_parents

    def _check_graph(self, g: Dag):
        if g.n_nodes != self.n_nodes:
            raise ValueError(f"graph has {g.n_nodes} nodes, dataset has {self.n_nodes} variables")

    def clear_cache(self):
        self._cache.clear()
        self._aic_cache.clear()
