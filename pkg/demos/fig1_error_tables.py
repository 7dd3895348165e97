"""Edge-marginal error tables for the four-node diamond network.

Data are drawn from the diamond 0->1, 0->2, 1->3, 2->3 with four states per
variable and random Dirichlet(1) CPTs.  For M = 100 and M = 500 rows we
enumerate all 543 DAGs to get exact edge marginals, run the birth-death
sampler, and print |estimate - exact| in a node-by-node table.

    python demos/fig1_error_tables.py [n_jumps]
"""
import sys
import time

import numpy as np

from edgebd import (Dag, ScoreModel, edge_probabilities, error_table, exact_edge_marginals,
                    exact_posterior, fig1_dag, generate, random_cpts, run)
from edgebd.cli import format_error_table

n_jumps = int(sys.argv[1]) if len(sys.argv) > 1 else 100_000
names = ["X1", "X2", "X3", "X4"]
net = random_cpts(fig1_dag(), 4, 1.0, np.random.default_rng(100))

for m_rows in (100, 500):
    ds = generate(net, m_rows, np.random.default_rng(m_rows))
    model = ScoreModel(ds)
    exact = exact_edge_marginals(exact_posterior(model))

    t0 = time.perf_counter()
    trace = run(Dag(4), model, n_jumps, np.random.default_rng(1))
    est = edge_probabilities(trace)
    err = error_table(est, exact)

    print(f"\nM = {m_rows}: {n_jumps} jumps in {time.perf_counter() - t0:.1f}s")
    print("exact marginals")
    print(format_error_table(np.where(np.eye(4, dtype=bool), np.nan, exact), names))
    print("error magnitudes")
    print(format_error_table(err, names))
    print(f"max error {np.nanmax(err):.4f}, mean error {np.nanmean(err):.4f}")
