"""Discrete-time structure MCMC with single-edge add/delete proposals.

The proposal is uniform over the neighbourhood N(G) of valid additions and
deletions (plus, optionally, reversals), and a move to G' is accepted with
probability min(1, P(G'|D) |N(G)| / (P(G|D) |N(G')|)).
"""
from __future__ import annotations

import math

import numpy as np

from .bd_sampler import Move
from .graph import Dag, iter_bits
from .score import ScoreModel
from .trace import BIRTH, DEATH, REJECT, REVERSE, ChainTrace

__all__ = ["MhChain", "mh_propose", "mh_step", "mh_run", "neighbourhood", "neighbourhood_size",
           "mh_transition_matrix", "REVERSE"]


def _add_masks(g: Dag, max_parents):
    if max_parents is None:
        return [g.valid_parent_mask(j) for j in range(g.n_nodes)]
    return [g.valid_parent_mask(j) if g.in_degree(j) < max_parents else 0
            for j in range(g.n_nodes)]


def _reversible(g: Dag, i: int, j: int, max_parents) -> bool:
    """Whether i->j can be turned into j->i without a cycle."""
    if max_parents is not None and g.in_degree(i) >= max_parents:
        return False
    # j->i closes a cycle iff some other path i ~> j exists, i.e. through a child of i
    for c in iter_bits(g._ch[i] & ~(1 << j)):
        if c == j or (g._desc[c] >> j) & 1:
            return False
    return True


def neighbourhood(g: Dag, max_parents=None, reversal: bool = False) -> list:
    """All single-edge moves out of ``g`` as ``Move`` tuples (B, D, then V)."""
    moves = [Move("B", i, j) for j, mask in enumerate(_add_masks(g, max_parents))
             for i in iter_bits(mask)]
    edges = g.edge_list()
    moves += [Move("D", i, j) for i, j in edges]
    if reversal:
        moves += [Move("V", i, j) for i, j in edges if _reversible(g, i, j, max_parents)]
    return moves


def neighbourhood_size(g: Dag, max_parents=None, reversal: bool = False) -> int:
    size = sum(mask.bit_count() for mask in _add_masks(g, max_parents)) + g.n_edges
    if reversal:
        size += sum(_reversible(g, i, j, max_parents) for i, j in g.edge_list())
    return size


def mh_propose(g: Dag, rng, max_parents=None, reversal: bool = False) -> Move:
    """Uniform draw from the single-edge neighbourhood of ``g``."""
    if reversal:
        moves = neighbourhood(g, max_parents, True)
        if not moves:
            raise ValueError("empty neighbourhood (a one-node network has no moves)")
        return moves[int(rng.integers(len(moves)))]
    masks = _add_masks(g, max_parents)
    return _pick(g, masks, sum(mask.bit_count() for mask in masks), rng)


def _pick(g: Dag, masks: list, n_add: int, rng) -> Move:
    total = n_add + g.n_edges
    if total == 0:
        raise ValueError("empty neighbourhood (a one-node network has no moves)")
    r = min(int(rng.random() * total), total - 1)
    if r < n_add:
        for j, mask in enumerate(masks):
            c = mask.bit_count()
            if r < c:
                for i in iter_bits(mask):
                    if r == 0:
                        return Move("B", i, j)
                    r -= 1
            r -= c
    r -= n_add
    for i, row in enumerate(g._ch):
        c = row.bit_count()
        if r < c:
            for j in iter_bits(row):
                if r == 0:
                    return Move("D", i, j)
                r -= 1
        r -= c
    raise AssertionError("proposal index out of range")


def _size_after_birth(g: Dag, masks: list, n_add: int, i: int, j: int, max_parents) -> int:
    """|N(G + i->j)| without mutating ``g`` (add/delete neighbourhood)."""
    sources = (1 << i) | g._anc[i]
    targets = (1 << j) | g._desc[j]
    full = g._full
    pa, desc = g._pa, g._desc
    total = n_add
    for c in iter_bits(sources | (1 << j)):
        total -= masks[c].bit_count()
        pa_c = pa[c] | (1 << i) if c == j else pa[c]
        if max_parents is not None and pa_c.bit_count() >= max_parents:
            continue
        d = desc[c] | targets if (sources >> c) & 1 else desc[c]
        total += (full & ~(1 << c) & ~pa_c & ~d).bit_count()
    return total + g.n_edges + 1


def _log_ratio(g: Dag, m: ScoreModel, move: Move) -> float:
    kind, i, j = move
    if kind == "B":
        return m.score_delta_for_edge(g, i, j, "add")
    if kind == "D":
        return m.score_delta_for_edge(g, i, j, "remove")
    pa_j, pa_i = g.parent_mask(j), g.parent_mask(i)
    return (m._family(j, pa_j & ~(1 << i)) - m._family(j, pa_j)
            + m._family(i, pa_i | (1 << j)) - m._family(i, pa_i))


def _apply(g: Dag, move: Move) -> None:
    kind, i, j = move
    if kind == "B":
        g.add_edge(i, j)
    elif kind == "D":
        g.remove_edge(i, j)
    else:
        g.remove_edge(i, j)
        g.add_edge(j, i)


def _undo(g: Dag, move: Move) -> None:
    kind, i, j = move
    if kind == "B":
        g.remove_edge(i, j)
    elif kind == "D":
        g.add_edge(i, j)
    else:
        g.remove_edge(j, i)
        g.add_edge(i, j)


class MhChain:
    """State of one Metropolis-Hastings chain over DAGs."""

    def __init__(self, dag: Dag, model: ScoreModel, reversal: bool = False):
        model._check_graph(dag)
        if dag.n_nodes < 2:
            raise ValueError("structure MCMC needs at least two nodes")
        self.dag = dag.copy()
        self.model = model
        self.reversal = reversal
        self.n_steps = 0
        self.n_accepted = 0
        self.log_score = model.graph_log_score(self.dag)
        self.last_move = None

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_steps if self.n_steps else math.nan


def mh_step(c: MhChain, rng) -> bool:
    """One proposal and accept/reject; returns whether the move was taken."""
    g, m = c.dag, c.model
    cap = m.max_parents
    if c.reversal:
        move = mh_propose(g, rng, cap, True)
        n_before = neighbourhood_size(g, cap, True)
    else:
        masks = _add_masks(g, cap)
        n_add = sum(mask.bit_count() for mask in masks)
        n_before = n_add + g.n_edges
        move = _pick(g, masks, n_add, rng)
    delta = _log_ratio(g, m, move)
    if move.kind == "B" and not c.reversal:
        n_after = _size_after_birth(g, masks, n_add, move.i, move.j, cap)
        applied = False
    else:
        _apply(g, move)
        n_after = neighbourhood_size(g, cap, c.reversal)
        applied = True
    log_accept = delta + math.log(n_before) - math.log(n_after)
    u = rng.random()
    c.n_steps += 1
    c.last_move = move
    if log_accept >= 0 or u < math.exp(log_accept):
        if not applied:
            _apply(g, move)
        c.n_accepted += 1
        c.log_score += delta
        return True
    if applied:
        _undo(g, move)
    return False


def mh_run(g0: Dag, m: ScoreModel, n_steps: int, rng, reversal: bool = False,
           record_aic: bool = True, meta: dict | None = None) -> ChainTrace:
    """Run ``n_steps`` MH steps from ``g0``; every record has unit holding weight."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    chain = MhChain(g0, m, reversal)
    g = chain.dag
    info = {"sampler": "mh", "reversal": reversal}
    info.update(meta or {})
    trace = ChainTrace.allocate(g, n_steps, info)
    trace.cum_time[:] = np.arange(1, n_steps + 1, dtype=float)

    record_aic = record_aic and m.dataset.n_rows > 0
    if record_aic:
        fam_ll, fam_k = map(list, zip(*(m._family_aic(j, g.parent_mask(j)) for j in range(g.n_nodes))))
        aic = -2.0 * sum(fam_ll) + 2.0 * sum(fam_k)
    else:
        aic = math.nan

    kind_a, i_a, j_a, score_a, aic_a = trace.kind, trace.i, trace.j, trace.log_score, trace.aic
    codes = {"B": BIRTH, "D": DEATH, "V": REVERSE}
    for s in range(n_steps):
        score_a[s] = chain.log_score
        aic_a[s] = aic
        accepted = mh_step(chain, rng)
        move = chain.last_move
        kind_a[s] = codes[move.kind] if accepted else REJECT
        i_a[s], j_a[s] = move.i, move.j
        if accepted and record_aic:
            for v in ((move.i, move.j) if move.kind == "V" else (move.j,)):
                fam_ll[v], fam_k[v] = m._family_aic(v, g.parent_mask(v))
            aic = -2.0 * sum(fam_ll) + 2.0 * sum(fam_k)
    trace.meta["acceptance_rate"] = chain.acceptance_rate
    trace.meta["final_log_score"] = chain.log_score
    return trace


def mh_transition_matrix(dags, index: dict, m: ScoreModel, reversal: bool = False) -> np.ndarray:
    """One-step transition matrix of the chain over an enumerated DAG list.

    ``index`` maps ``Dag.key`` to the position in ``dags``.
    """
    n_states = len(dags)
    P = np.zeros((n_states, n_states))
    cap = m.max_parents
    for a, g in enumerate(dags):
        g = g.copy()
        moves = neighbourhood(g, cap, reversal)
        n_a = len(moves)
        for move in moves:
            delta = _log_ratio(g, m, move)
            _apply(g, move)
            b = index[g.key]
            n_b = neighbourhood_size(g, cap, reversal)
            _undo(g, move)
            P[a, b] += math.exp(min(0.0, delta + math.log(n_a) - math.log(n_b))) / n_a
        P[a, a] = 1.0 - P[a].sum()
    return P
