import itertools
import math

import numpy as np
import pytest

from edgebd import (Dag, Move, ScoreModel, edge_probabilities, exact_edge_marginals, exact_posterior,
                    mh_propose, mh_run, mh_step, mh_transition_matrix, MhChain, random_dag)
from edgebd.exact import enumerate_dags, pairwise_balance_residual
from edgebd.mh_sampler import _add_masks, _size_after_birth, neighbourhood, neighbourhood_size

from conftest import empty_dataset


def brute_neighbourhood(g, cap=None):
    out = set()
    for i, j in itertools.permutations(range(g.n_nodes), 2):
        if g.has_edge(i, j):
            out.add(("D", i, j))
        elif g.is_valid_addition(i, j) and (cap is None or g.in_degree(j) < cap):
            out.add(("B", i, j))
    return out


def proposal_counts(g, n, seed, **kw):
    rng = np.random.default_rng(seed)
    counts = {}
    for _ in range(n):
        mv = tuple(mh_propose(g, rng, **kw))
        counts[mv] = counts.get(mv, 0) + 1
    return counts


class TestProposal:
    def test_empty_two(self):
        counts = proposal_counts(Dag(2), 2000, 0)
        assert set(counts) == {("B", 0, 1), ("B", 1, 0)}

    def test_complete_three(self):
        counts = proposal_counts(Dag(3, [(0, 1), (0, 2), (1, 2)]), 3000, 1)
        assert set(counts) == {("D", 0, 1), ("D", 0, 2), ("D", 1, 2)}

    @pytest.mark.parametrize("reversal", [False, True])
    def test_fig1_uniform(self, fig1, reversal):
        support = brute_neighbourhood(fig1)
        if reversal:
            support |= {("V", 0, 1), ("V", 0, 2), ("V", 1, 3), ("V", 2, 3)}
        n = 100_000
        counts = proposal_counts(fig1, n, 2, reversal=reversal)
        assert set(counts) == support
        p = 1 / len(support)
        se = math.sqrt(p * (1 - p) / n)
        for key in support:
            assert abs(counts[key] / n - p) <= 3 * se, key

    def test_cap(self, fig1):
        assert set(map(tuple, neighbourhood(fig1, max_parents=1))) == brute_neighbourhood(fig1, 1)

    def test_size_after_birth_matches_applied(self):
        rng = np.random.default_rng(3)
        for cap in (None, 1, 2):
            for _ in range(30):
                g = random_dag(6, int(rng.integers(0, 9)), rng, max_parents=cap)
                masks = _add_masks(g, cap)
                n_add = sum(mk.bit_count() for mk in masks)
                for mv in neighbourhood(g, cap):
                    if mv.kind != "B":
                        continue
                    h = g.copy()
                    h.add_edge(mv.i, mv.j)
                    assert _size_after_birth(g, masks, n_add, mv.i, mv.j, cap) == \
                        len(brute_neighbourhood(h, cap)) == neighbourhood_size(h, cap)


class TestStep:
    def test_flat_target_equal_neighbourhoods_accepts(self):
        m = ScoreModel(empty_dataset(3))
        rng = np.random.default_rng(0)
        c = MhChain(Dag(3), m)
        checked = 0
        for _ in range(3000):
            before = c.dag.copy()
            accepted = mh_step(c, rng)
            h = before.copy()
            mv = c.last_move
            (h.add_edge if mv.kind == "B" else h.remove_edge)(mv.i, mv.j)
            if neighbourhood_size(h) == neighbourhood_size(before):
                assert accepted
                checked += 1
            elif not accepted:
                assert c.dag == before
        assert checked > 100

    def test_two_node_acceptance(self):
        # empty -> single edge shrinks N from 2 to 1: always accepted; the way back: half the time
        m = ScoreModel(empty_dataset(2))
        rng = np.random.default_rng(4)
        c = MhChain(Dag(2, [(0, 1)]), m)
        n, acc = 20000, 0
        for _ in range(n):
            c.dag = Dag(2, [(0, 1)])
            acc += mh_step(c, rng)
        assert abs(acc / n - 0.5) < 3 * math.sqrt(0.25 / n)
        for _ in range(200):
            c.dag = Dag(2)
            assert mh_step(c, rng)

    def test_acyclic_throughout(self, fig1_model):
        c = MhChain(Dag(4), fig1_model, reversal=True)
        rng = np.random.default_rng(1)
        for _ in range(2000):
            mh_step(c, rng)
            assert not c.dag.reach.diagonal().any()
        assert c.log_score == pytest.approx(fig1_model.graph_log_score(c.dag), abs=1e-9)


class TestRun:
    def test_one_step(self, fig1_model):
        tr = mh_run(Dag(4), fig1_model, 1, np.random.default_rng(0))
        assert len(tr) == 1 and tr.cum_time[0] == 1.0

    def test_rejections_repeat_scores(self, fig1_model):
        tr = mh_run(Dag(4), fig1_model, 3000, np.random.default_rng(2))
        rejected = np.flatnonzero(tr.kind[:-1] == 2)
        assert rejected.size > 0
        assert np.array_equal(tr.log_score[rejected + 1], tr.log_score[rejected])
        assert np.array_equal(tr.aic[rejected + 1], tr.aic[rejected])
        for t, g in tr.iter_graphs():
            if t % 97 == 0:
                assert tr.log_score[t] == pytest.approx(fig1_model.graph_log_score(g), abs=1e-9)
                assert tr.aic[t] == pytest.approx(fig1_model.aic(g), abs=1e-8)
        assert np.all(tr.log_holding == 0.0)

    def test_deterministic(self, fig1_model):
        a = mh_run(Dag(4), fig1_model, 500, np.random.default_rng(7), reversal=True)
        b = mh_run(Dag(4), fig1_model, 500, np.random.default_rng(7), reversal=True)
        assert np.array_equal(a.kind, b.kind) and np.array_equal(a.i, b.i)
        assert np.array_equal(a.log_score, b.log_score)
        assert a.replay() == b.replay()

    def test_three_node_marginals(self, chain3_data):
        m = ScoreModel(chain3_data)
        exact = exact_edge_marginals(exact_posterior(m))
        tr = mh_run(Dag(3), m, 300_000, np.random.default_rng(1))
        assert np.max(np.abs(edge_probabilities(tr).probs - exact)) < 0.02


class TestTransitionMatrix:
    @pytest.mark.parametrize("reversal", [False, True])
    def test_pairwise_balance(self, chain3_data, reversal):
        m = ScoreModel(chain3_data, prior="edge", beta=0.3)
        p = exact_posterior(m)
        P = mh_transition_matrix(p.dags, p.index, m, reversal)
        assert np.allclose(P.sum(axis=1), 1.0, atol=1e-13)
        assert P.min() >= 0.0
        assert pairwise_balance_residual(p, P) < 1e-12
        assert np.max(np.abs(p.probabilities @ P - p.probabilities)) < 1e-12

    def test_balance_with_cap(self, fig1_data):
        m = ScoreModel(fig1_data, max_parents=1)
        p = exact_posterior(m)
        P = mh_transition_matrix(p.dags, p.index, m)
        assert pairwise_balance_residual(p, P) < 1e-12

    def test_balance_detects_wrong_target(self, chain3_data):
        m = ScoreModel(chain3_data)
        p = exact_posterior(m)
        P = mh_transition_matrix(p.dags, p.index, m)
        assert pairwise_balance_residual(p, P, np.full(25, 1 / 25)) > 1e-6

    def test_states_cover_enumeration(self):
        dags = enumerate_dags(3)
        index = {g.key: a for a, g in enumerate(dags)}
        P = mh_transition_matrix(dags, index, ScoreModel(empty_dataset(3)))
        assert P.shape == (25, 25)
