"""Continuous-time edge birth-and-death process over DAGs.

Every existing edge dies at rate 1.  A valid edge i->j is born at rate

    b(G, i->j) = P(G + i->j | D) / P(G | D),

which is the ratio of two family scores of the child j (times the prior
ratio).  With these rates the process has P(G | D) as its invariant law.

Birth rates are kept in a table and updated after each jump: the column of
the child whose parent set changed is recomputed, and candidates whose
validity flipped are switched on or off in the mask.  The table stores a
rate for every non-parent candidate of a column, valid or not, so a
candidate that becomes valid again already holds its current rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .graph import Dag, bits_to_bool, iter_bits
from .score import ScoreModel
from .trace import BIRTH, DEATH, ChainTrace

__all__ = ["Move", "BirthRateTable", "init_rates", "step", "apply_move", "run", "HOLDING_MODES"]

HOLDING_MODES = ("expected", "sampled")


class Move(NamedTuple):
    kind: str   # "B" birth, "D" death, "R" rejected (MH only)
    i: int
    j: int


@dataclass
class BirthRateTable:
    log_b: np.ndarray             # (N, N) log birth rates; NaN where undefined
    valid: np.ndarray             # (N, N) mask of valid additions
    family: list                  # current log family score per node
    lambda_d: int = 0
    n_recomputed: int = 0         # rate entries (re)computed since creation
    _valid_cols: list = field(default_factory=list, repr=False)
    _w: np.ndarray = None         # log_b masked to -inf off the valid set, flattened

    def __post_init__(self):
        if self._w is None:
            self._w = np.where(self.valid, self.log_b, -np.inf).ravel()

    def _sync_column(self, j: int) -> None:
        n = self.log_b.shape[0]
        self._w[j::n] = np.where(self.valid[:, j], self.log_b[:, j], -np.inf)

    def log_lambda_b(self) -> float:
        w = self.log_b[self.valid]
        if w.size == 0:
            return -math.inf
        mx = w.max()
        return float(mx + np.log(np.exp(w - mx).sum()))

    @property
    def lambda_b(self) -> float:
        return math.exp(self.log_lambda_b())

    def birth_probabilities(self) -> np.ndarray:
        """(N, N) probabilities b / lambda_b over valid additions."""
        w = np.where(self.valid, self.log_b, -np.inf)
        if not self.valid.any():
            return np.zeros_like(self.log_b)
        p = np.exp(w - w.max())
        return p / p.sum()

    def equals(self, other: "BirthRateTable", atol: float = 1e-9) -> bool:
        if not np.array_equal(self.valid, other.valid) or self.lambda_d != other.lambda_d:
            return False
        v = self.valid
        if not np.allclose(self.log_b[v], other.log_b[v], rtol=0, atol=atol):
            return False
        a, b = self.log_lambda_b(), other.log_lambda_b()
        return a == b or abs(a - b) <= atol


def _column_valid_mask(g: Dag, m: ScoreModel, j: int) -> int:
    if m.max_parents is not None and g.in_degree(j) >= m.max_parents:
        return 0
    return g.valid_parent_mask(j)


def _refresh_column(g: Dag, t: BirthRateTable, m: ScoreModel, j: int) -> None:
    pa = g.parent_mask(j)
    base = m._family(j, pa)
    t.family[j] = base
    col = np.full(g.n_nodes, np.nan)
    if m.max_parents is None or pa.bit_count() < m.max_parents:
        prior = m.edge_log_prior_delta
        candidates = ((1 << g.n_nodes) - 1) & ~pa & ~(1 << j)
        for i in iter_bits(candidates):
            col[i] = m._family(j, pa | (1 << i)) - base + prior
            t.n_recomputed += 1
    t.log_b[:, j] = col


def _set_valid_column(g: Dag, t: BirthRateTable, m: ScoreModel, j: int) -> bool:
    mask = _column_valid_mask(g, m, j)
    if mask == t._valid_cols[j]:
        return False
    t._valid_cols[j] = mask
    t.valid[:, j] = bits_to_bool(mask, g.n_nodes)
    return True


def init_rates(g: Dag, m: ScoreModel) -> BirthRateTable:
    """Birth-rate table for every candidate edge of ``g``."""
    m._check_graph(g)
    n = g.n_nodes
    t = BirthRateTable(
        log_b=np.full((n, n), np.nan),
        valid=np.zeros((n, n), dtype=bool),
        family=[0.0] * n,
        lambda_d=g.n_edges,
        _valid_cols=[0] * n,
    )
    for j in range(n):
        if not m.allows_parent_count(g.in_degree(j)):
            raise ValueError(f"node {j} has more than max_parents={m.max_parents} parents")
        _refresh_column(g, t, m, j)
        _set_valid_column(g, t, m, j)
        t._sync_column(j)
    return t


def step(g: Dag, t: BirthRateTable, m: ScoreModel, rng, mode: str = "expected"):
    """Choose the next jump out of ``g``.

    Returns ``(move, log_holding)``: the jump, and the log of the time spent
    in ``g`` before it.  In ``"expected"`` mode the holding time is its mean
    1 / (lambda_b + lambda_d); in ``"sampled"`` mode it is an exponential draw.
    """
    n = g.n_nodes
    w = t._w
    mx = w.max()
    if mx == -np.inf:
        log_lb, c = -np.inf, None
    else:
        c = np.exp(w - mx).cumsum()
        log_lb = mx + math.log(c[-1])
    log_ld = math.log(t.lambda_d) if t.lambda_d else -math.inf
    if log_lb == -math.inf and log_ld == -math.inf:
        raise ValueError("no birth or death is possible (a one-node network has no moves)")
    log_total = float(np.logaddexp(log_lb, log_ld))

    if rng.random() < math.exp(log_ld - log_total):
        r = min(int(rng.random() * t.lambda_d), t.lambda_d - 1)
        for i in range(n):
            row = g._ch[i]
            c = row.bit_count()
            if r < c:
                for jj in iter_bits(row):
                    if r == 0:
                        move = Move("D", i, jj)
                        break
                    r -= 1
                break
            r -= c
    else:
        k = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
        if k >= n * n or not t.valid.flat[k]:
            k = int(np.flatnonzero(t._w > -np.inf)[-1])
        move = Move("B", k // n, k % n)

    if mode == "expected":
        log_h = -log_total
    elif mode == "sampled":
        log_h = math.log(rng.standard_exponential()) - log_total
    else:
        raise ValueError(f"holding mode must be one of {HOLDING_MODES}")
    return move, log_h


def apply_move(g: Dag, t: BirthRateTable, m: ScoreModel, move: Move) -> None:
    """Apply ``move`` to ``g`` and bring the rate table up to date."""
    kind, k, l = move
    # validity can only change in column l (new parent set) and in the
    # columns of k and its ancestors (their descendant sets change)
    affected = (1 << k) | g._anc[k] | (1 << l)
    if kind == "B":
        if not g.is_valid_addition(k, l) or not t.valid[k, l]:
            raise ValueError(f"birth {k}->{l} is not a valid addition")
        g.add_edge(k, l)
        t.lambda_d += 1
    elif kind == "D":
        if not g.has_edge(k, l):
            raise ValueError(f"death of absent edge {k}->{l}")
        g.remove_edge(k, l)
        t.lambda_d -= 1
    else:
        raise ValueError(f"unknown move kind {kind!r}")
    _refresh_column(g, t, m, l)
    for j in iter_bits(affected):
        if _set_valid_column(g, t, m, j) or j == l:
            t._sync_column(j)


def run(g0: Dag, m: ScoreModel, n_jumps: int, rng, mode: str = "expected",
        record_aic: bool = True, meta: dict | None = None) -> ChainTrace:
    """Simulate ``n_jumps`` jumps starting from ``g0`` (which is not modified)."""
    if n_jumps < 1:
        raise ValueError("n_jumps must be >= 1")
    if mode not in HOLDING_MODES:
        raise ValueError(f"holding mode must be one of {HOLDING_MODES}")
    if g0.n_nodes < 2:
        raise ValueError("the birth-death process needs at least two nodes")
    g = g0.copy()
    t = init_rates(g, m)
    info = {"sampler": "bd", "holding": mode}
    info.update(meta or {})
    trace = ChainTrace.allocate(g, n_jumps, info)
    trace.rate_updates = np.zeros(n_jumps, dtype=np.int32)

    record_aic = record_aic and m.dataset.n_rows > 0
    prior = m.graph_log_prior(g)
    if record_aic:
        fam_ll, fam_k = map(list, zip(*(m._family_aic(j, g.parent_mask(j)) for j in range(g.n_nodes))))
        aic = -2.0 * sum(fam_ll) + 2.0 * sum(fam_k)
    else:
        aic = math.nan

    kind_a, i_a, j_a = trace.kind, trace.i, trace.j
    logh_a, time_a, score_a, aic_a, upd_a = (trace.log_holding, trace.cum_time, trace.log_score,
                                             trace.aic, trace.rate_updates)
    cum = 0.0
    for s in range(n_jumps):
        move, log_h = step(g, t, m, rng, mode)
        cum += math.exp(log_h)
        kind_a[s] = BIRTH if move.kind == "B" else DEATH
        i_a[s], j_a[s] = move.i, move.j
        logh_a[s] = log_h
        time_a[s] = cum
        score_a[s] = prior + sum(t.family)
        aic_a[s] = aic
        before = t.n_recomputed
        apply_move(g, t, m, move)
        upd_a[s] = t.n_recomputed - before
        prior += m.edge_log_prior_delta if move.kind == "B" else -m.edge_log_prior_delta
        if record_aic:
            l = move.j
            fam_ll[l], fam_k[l] = m._family_aic(l, g.parent_mask(l))
            aic = -2.0 * sum(fam_ll) + 2.0 * sum(fam_k)
    trace.meta["final_log_score"] = prior + sum(t.family)
    return trace
