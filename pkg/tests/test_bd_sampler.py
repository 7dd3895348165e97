import math

import numpy as np
import pytest

from edgebd import (Dag, Move, ScoreModel, apply_move, edge_probabilities, exact_edge_marginals,
                    exact_posterior, graph_frequencies, init_rates, random_dag, run, step)
from edgebd.exact import enumerate_dags

from conftest import empty_dataset, seeded_dataset


def brute_force_log_b(g, m):
    """Full-score ratio for every valid addition, recomputing both graphs from scratch."""
    base = m.graph_log_score(g)
    out = {}
    for i, j in g.valid_additions():
        h = g.copy()
        h.add_edge(i, j)
        out[i, j] = m.graph_log_score(h) - base
    return out


def assert_table_matches_fresh(g, t, m):
    fresh = init_rates(g, m)
    assert t.equals(fresh, atol=1e-9)
    assert np.array_equal(t._w.reshape(t.valid.shape) > -np.inf, fresh.valid)


class TestInitRates:
    def test_empty_graph_no_data(self):
        m = ScoreModel(empty_dataset(4))
        t = init_rates(Dag(4), m)
        off = ~np.eye(4, dtype=bool)
        assert np.array_equal(t.valid, off)
        assert np.all(t.log_b[off] == 0.0)
        assert t.lambda_b == pytest.approx(12.0)
        assert t.lambda_d == 0

    def test_complete_three(self):
        m = ScoreModel(empty_dataset(3))
        t = init_rates(Dag(3, [(0, 1), (0, 2), (1, 2)]), m)
        assert not t.valid.any()
        assert t.lambda_b == 0.0 and t.lambda_d == 3

    def test_fig1_brute_force(self, fig1, fig1_data):
        m = ScoreModel(fig1_data, prior="edge", beta=0.4)
        t = init_rates(fig1, m)
        expected = brute_force_log_b(fig1, m)
        assert set(zip(*np.nonzero(t.valid))) == set(expected)
        for (i, j), v in expected.items():
            assert t.log_b[i, j] == pytest.approx(v, abs=1e-10)
        lam = sum(math.exp(v) for v in expected.values())
        assert t.lambda_b == pytest.approx(lam, rel=1e-12)

    def test_over_cap_graph_rejected(self, fig1, fig1_data):
        with pytest.raises(ValueError):
            init_rates(fig1, ScoreModel(fig1_data, max_parents=1))


class TestStep:
    def test_empty_graph_always_births(self, fig1_model):
        g = Dag(4)
        t = init_rates(g, fig1_model)
        rng = np.random.default_rng(0)
        assert all(step(g, t, fig1_model, rng)[0].kind == "B" for _ in range(200))

    def test_complete_graph_uniform_deaths(self):
        m = ScoreModel(empty_dataset(3))
        g = Dag(3, [(0, 1), (0, 2), (1, 2)])
        t = init_rates(g, m)
        rng = np.random.default_rng(1)
        n = 30000
        moves = [step(g, t, m, rng)[0] for _ in range(n)]
        assert all(mv.kind == "D" for mv in moves)
        for e in g.edge_list():
            f = sum((mv.i, mv.j) == e for mv in moves) / n
            assert abs(f - 1 / 3) < 3 * math.sqrt((1 / 3) * (2 / 3) / n)

    def test_no_moves_raises(self):
        m = ScoreModel(empty_dataset(1))
        with pytest.raises(ValueError):
            step(Dag(1), init_rates(Dag(1), m), m, np.random.default_rng(0))

    def test_expected_holding_is_inverse_total_rate(self, fig1, fig1_model):
        t = init_rates(fig1, fig1_model)
        _, log_h = step(fig1, t, fig1_model, np.random.default_rng(0), "expected")
        assert log_h == pytest.approx(-math.log(t.lambda_b + t.lambda_d), abs=1e-12)

    def test_sampled_holding_mean(self, fig1, fig1_model):
        t = init_rates(fig1, fig1_model)
        rng = np.random.default_rng(8)
        h = np.array([math.exp(step(fig1, t, fig1_model, rng, "sampled")[1]) for _ in range(20000)])
        mean = 1 / (t.lambda_b + t.lambda_d)
        assert abs(h.mean() - mean) < 4 * mean / math.sqrt(len(h))

    def test_fig1_move_frequencies(self, fig1, fig1_data):
        m = ScoreModel(fig1_data, alpha=0.3)
        t = init_rates(fig1, m)
        # exact categorical distribution from the brute-force rates
        rates = {("B",) + e: math.exp(v) for e, v in brute_force_log_b(fig1, m).items()}
        rates.update({("D",) + e: 1.0 for e in fig1.edge_list()})
        total = sum(rates.values())
        rng = np.random.default_rng(2024)
        n = 100_000
        counts = {}
        for _ in range(n):
            mv = step(fig1, t, m, rng)[0]
            counts[tuple(mv)] = counts.get(tuple(mv), 0) + 1
        assert set(counts) <= set(rates)
        for key, rate in rates.items():
            p = rate / total
            se = math.sqrt(p * (1 - p) / n)
            assert abs(counts.get(key, 0) / n - p) <= 3 * se + 1e-12, key

    def test_unknown_mode(self, fig1, fig1_model):
        with pytest.raises(ValueError):
            step(fig1, init_rates(fig1, fig1_model), fig1_model, np.random.default_rng(0), "mean")


class TestApplyMove:
    def test_every_single_birth_six_nodes(self):
        rng = np.random.default_rng(6)
        data = seeded_dataset(random_dag(6, 6, rng), 3, 120, seed=7)
        m = ScoreModel(data, prior="edge", beta=0.2)
        for _ in range(5):
            g0 = random_dag(6, int(rng.integers(0, 9)), rng)
            t0 = init_rates(g0, m)
            for i, j in g0.valid_additions():
                g, t = g0.copy(), init_rates(g0, m)
                apply_move(g, t, m, Move("B", i, j))
                assert_table_matches_fresh(g, t, m)
            assert t0.equals(init_rates(g0, m))

    def test_reverse_becomes_invalid(self):
        m = ScoreModel(empty_dataset(2))
        g = Dag(2)
        t = init_rates(g, m)
        assert t.valid[1, 0]
        apply_move(g, t, m, Move("B", 0, 1))
        assert not t.valid[1, 0] and not t.valid[0, 1]
        assert t.lambda_b == 0.0

    def test_death_restores_empty_parent_rates(self, fig1_data):
        m = ScoreModel(fig1_data)
        g = Dag(4, [(0, 2), (1, 3)])
        t = init_rates(g, m)
        apply_move(g, t, m, Move("D", 0, 2))
        empty_col = init_rates(Dag(4, [(1, 3)]), m).log_b[:, 2]
        assert np.allclose(t.log_b[:, 2], empty_col, equal_nan=True, atol=1e-12)
        assert_table_matches_fresh(g, t, m)

    def test_recomputes_bounded(self):
        rng = np.random.default_rng(9)
        data = seeded_dataset(random_dag(8, 9, rng), 2, 80, seed=10)
        m = ScoreModel(data)
        tr = run(Dag(8), m, 2000, np.random.default_rng(11))
        assert tr.rate_updates.max() <= 7

    def test_illegal_moves(self, fig1, fig1_model):
        t = init_rates(fig1, fig1_model)
        with pytest.raises(ValueError):
            apply_move(fig1.copy(), t, fig1_model, Move("B", 3, 0))
        with pytest.raises(ValueError):
            apply_move(fig1.copy(), t, fig1_model, Move("D", 0, 3))

    def test_cap_blocks_full_columns(self, fig1_data):
        m = ScoreModel(fig1_data, max_parents=1)
        g = Dag(4)
        t = init_rates(g, m)
        apply_move(g, t, m, Move("B", 0, 3))
        assert not t.valid[:, 3].any()
        assert_table_matches_fresh(g, t, m)
        apply_move(g, t, m, Move("D", 0, 3))
        assert t.valid[1, 3]
        assert_table_matches_fresh(g, t, m)


class TestRun:
    def test_single_jump(self, fig1_model):
        tr = run(Dag(4), fig1_model, 1, np.random.default_rng(0))
        assert len(tr) == 1 and tr.move(0)[0] == "B"
        assert tr.log_score[0] == fig1_model.graph_log_score(Dag(4))

    def test_records_hold_pre_jump_graph(self, fig1_model):
        tr = run(Dag(4), fig1_model, 300, np.random.default_rng(3))
        for t, g in tr.iter_graphs():
            assert tr.log_score[t] == pytest.approx(fig1_model.graph_log_score(g), abs=1e-9)
            assert tr.aic[t] == pytest.approx(fig1_model.aic(g), abs=1e-8)
            lam = init_rates(g, fig1_model)
            assert tr.log_holding[t] == pytest.approx(-math.log(lam.lambda_b + lam.lambda_d), abs=1e-9)
        assert np.allclose(tr.cum_time, np.cumsum(tr.holding_weight))

    def test_replay_matches_final(self, fig1_model):
        tr = run(Dag(4), fig1_model, 2000, np.random.default_rng(4))
        final = tr.replay()
        assert tr.meta["final_log_score"] == pytest.approx(fig1_model.graph_log_score(final), abs=1e-9)

    def test_three_node_marginals(self, chain3_data):
        m = ScoreModel(chain3_data)
        exact = exact_edge_marginals(exact_posterior(m))
        tr = run(Dag(3), m, 200_000, np.random.default_rng(12))
        est = edge_probabilities(tr)
        assert np.max(np.abs(est.probs - exact)) < 0.02

    def test_sampled_mode_is_unbiased(self, chain3_data):
        m = ScoreModel(chain3_data)
        exact = exact_edge_marginals(exact_posterior(m))
        tr = run(Dag(3), m, 200_000, np.random.default_rng(13), mode="sampled")
        assert np.max(np.abs(edge_probabilities(tr).probs - exact)) < 0.03

    def test_visits_every_dag(self):
        m = ScoreModel(empty_dataset(3))
        tr = run(Dag(3), m, 5000, np.random.default_rng(5))
        assert len(graph_frequencies(tr)) == 25

    def test_respects_cap(self, fig1_data):
        m = ScoreModel(fig1_data, max_parents=1)
        tr = run(Dag(4), m, 3000, np.random.default_rng(5))
        for _, g in tr.iter_graphs():
            assert max(g.in_degree(j) for j in range(4)) <= 1

    def test_capped_marginals(self, chain3_data):
        m = ScoreModel(chain3_data, max_parents=1)
        exact = exact_edge_marginals(exact_posterior(m))
        tr = run(Dag(3), m, 100_000, np.random.default_rng(14))
        assert np.max(np.abs(edge_probabilities(tr).probs - exact)) < 0.03

    @pytest.mark.parametrize("n,jumps", [(1, 5), (3, 0)])
    def test_rejects_bad_arguments(self, n, jumps):
        m = ScoreModel(empty_dataset(n))
        with pytest.raises(ValueError):
            run(Dag(n), m, jumps, np.random.default_rng(0))

    def test_input_graph_untouched(self, fig1, fig1_model):
        before = fig1.copy()
        run(fig1, fig1_model, 100, np.random.default_rng(0))
        assert fig1 == before

    def test_enumeration_agrees_with_visits(self):
        # every visited graph on 3 nodes is one of the enumerated DAGs
        m = ScoreModel(empty_dataset(3))
        keys = {g.key for g in enumerate_dags(3)}
        tr = run(Dag(3), m, 2000, np.random.default_rng(15))
        assert set(graph_frequencies(tr)) <= keys
